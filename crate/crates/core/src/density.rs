//! Weighted Gaussian kernel density estimation on response grids.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::{compensated_sum, Scalar};

/// Nonnegative per-training-row weights for one query, normalized to sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector<T>(Vec<T>);

impl<T: Scalar> WeightVector<T> {
    /// Normalizes `raw` to sum to one. Negative or non-finite entries are rejected.
    pub fn normalized(raw: Vec<T>) -> Result<Self> {
        if raw.iter().any(|w| !w.is_finite() || *w < T::zero()) {
            return Err(Error::arg("weights", "weights must be finite and nonnegative"));
        }
        let total = compensated_sum(raw.iter().copied());
        if !(total > T::zero()) {
            return Err(Error::arg("weights", "weights sum to zero"));
        }
        Ok(WeightVector(raw.into_iter().map(|w| w / total).collect()))
    }

    /// Equal weight on each of `n` rows.
    pub fn uniform(n: usize) -> Self {
        WeightVector(vec![T::one() / T::of_usize(n); n])
    }

    /// All mass on row `i` of `n`.
    pub fn one_hot(n: usize, i: usize) -> Self {
        let mut w = vec![T::zero(); n];
        w[i] = T::one();
        WeightVector(w)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `1 / sum w_i^2`.
    pub fn effective_size(&self) -> T {
        T::one() / compensated_sum(self.0.iter().map(|&w| w * w))
    }

    pub(crate) fn from_normalized_unchecked(w: Vec<T>) -> Self {
        WeightVector(w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BandwidthSpec<T> {
    /// One value per response dimension, or a single value applied to all of them.
    Fixed(Vec<T>),
    /// Weighted Silverman rule evaluated per query.
    Adaptive,
}

impl<T: Scalar> BandwidthSpec<T> {
    pub fn fixed(h: T) -> Self {
        BandwidthSpec::Fixed(vec![h])
    }

    /// Per-dimension bandwidth for a query with weights `w` over responses `z`.
    pub fn resolve(&self, z: ArrayView2<T>, w: &WeightVector<T>) -> Result<Bandwidth<T>> {
        match self {
            BandwidthSpec::Fixed(h) => {
                let d = z.ncols();
                let h = match h.len() {
                    1 => vec![h[0]; d],
                    len if len == d => h.clone(),
                    len => {
                        return Err(Error::arg(
                            "bandwidth",
                            format!("{len} values for {d} response dimensions"),
                        ))
                    }
                };
                check_bandwidth(&h)?;
                Ok(Bandwidth { h, fallback: false })
            }
            BandwidthSpec::Adaptive => Ok(adaptive_bandwidth(z, w)),
        }
    }
}

/// A resolved bandwidth. `fallback` marks the range-based rule of [`adaptive_bandwidth`].
#[derive(Debug, Clone, PartialEq)]
pub struct Bandwidth<T> {
    pub h: Vec<T>,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate<T> {
    /// Grid points, one row per point.
    pub grid: Array2<T>,
    pub values: Vec<T>,
    pub bandwidth: Vec<T>,
    pub bandwidth_fallback: bool,
}

fn check_bandwidth<T: Scalar>(h: &[T]) -> Result<()> {
    if h.iter().all(|&v| v > T::zero() && v.is_finite()) {
        Ok(())
    } else {
        Err(Error::arg("bandwidth", "bandwidth must be positive and finite"))
    }
}

/// Gaussian density with mean 0 and standard deviation `h`, at `u`.
#[inline]
pub fn gaussian_kernel<T: Scalar>(u: T, h: T) -> T {
    let s = u / h;
    (-(s * s) / T::of(2.0)).exp() / (h * (T::of(2.0) * T::PI()).sqrt())
}

/// Weighted product-Gaussian KDE of responses `z` evaluated at each row of `grid`.
pub fn weighted_kde<T: Scalar>(
    z: ArrayView2<T>,
    w: &WeightVector<T>,
    grid: ArrayView2<T>,
    h: &[T],
) -> Result<DensityEstimate<T>> {
    let d = z.ncols();
    if grid.ncols() != d || h.len() != d {
        return Err(Error::arg(
            "grid",
            format!(
                "dimension mismatch: responses have {d} columns, grid {}, bandwidth {}",
                grid.ncols(),
                h.len()
            ),
        ));
    }
    if w.len() != z.nrows() {
        return Err(Error::arg(
            "weights",
            format!("{} weights for {} responses", w.len(), z.nrows()),
        ));
    }
    check_bandwidth(h)?;

    let norm: T = h
        .iter()
        .fold(T::one(), |acc, &hk| acc * hk * (T::of(2.0) * T::PI()).sqrt());
    let half = T::of(0.5);
    // Beyond this squared distance a kernel term is below the smallest subnormal.
    let cutoff = T::of(2.0) * -(T::min_positive_value() * T::epsilon()).ln();

    let active: Vec<usize> = (0..z.nrows())
        .filter(|&i| w.as_slice()[i] > T::zero())
        .collect();
    let mut values = vec![T::zero(); grid.nrows()];
    for (g, out) in grid.rows().into_iter().zip(values.iter_mut()) {
        let mut acc = T::zero();
        for &i in &active {
            let mut q = T::zero();
            for k in 0..d {
                let s = (g[k] - z[[i, k]]) / h[k];
                q += s * s;
            }
            if q > cutoff {
                continue;
            }
            acc += w.as_slice()[i] * (-(q * half)).exp();
        }
        *out = acc / norm;
    }
    Ok(DensityEstimate {
        grid: grid.to_owned(),
        values,
        bandwidth: h.to_vec(),
        bandwidth_fallback: false,
    })
}

/// Weighted Silverman bandwidth `1.06 sigma_k n_eff^(-1/5)` per response dimension.
///
/// `sigma_k` is the weighted standard deviation of column `k` and
/// `n_eff = 1 / sum w_i^2`. When `n_eff < 2` or a weighted deviation is zero,
/// that dimension uses `1.06 range_k n_eff^(-1/5) / 4` over the full column
/// range instead and the result is flagged.
pub fn adaptive_bandwidth<T: Scalar>(z: ArrayView2<T>, w: &WeightVector<T>) -> Bandwidth<T> {
    let n_eff = w.effective_size();
    let shrink = T::of(1.06) * n_eff.powf(T::of(-0.2));
    let ws = w.as_slice();
    let mut fallback = false;
    let h = z
        .columns()
        .into_iter()
        .map(|col| {
            let mean = compensated_sum(col.iter().zip(ws).map(|(&v, &wi)| wi * v));
            let var = compensated_sum(col.iter().zip(ws).map(|(&v, &wi)| {
                let dv = v - mean;
                wi * dv * dv
            }));
            let sd = var.max(T::zero()).sqrt();
            if n_eff >= T::of(2.0) && sd > T::zero() {
                shrink * sd
            } else {
                fallback = true;
                let (lo, hi) = col
                    .iter()
                    .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
                        (lo.min(v), hi.max(v))
                    });
                let range = hi - lo;
                if range > T::zero() {
                    shrink * range / T::of(4.0)
                } else {
                    shrink
                }
            }
        })
        .collect();
    Bandwidth { h, fallback }
}

/// A regular rectangular grid: the outer product of strictly increasing axes.
///
/// Points are enumerated lexicographically with the last coordinate varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice<T> {
    axes: Vec<Vec<T>>,
}

impl<T: Scalar> Lattice<T> {
    pub fn from_axes(axes: Vec<Vec<T>>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::arg("grid", "grid has no dimensions"));
        }
        for (k, axis) in axes.iter().enumerate() {
            if axis.is_empty() {
                return Err(Error::arg("grid", format!("axis {k} is empty")));
            }
            if axis.windows(2).any(|p| !(p[0] < p[1])) || axis.iter().any(|v| !v.is_finite()) {
                return Err(Error::arg(
                    "grid",
                    format!("axis {k} is not strictly increasing"),
                ));
            }
        }
        Ok(Lattice { axes })
    }

    /// `steps` equispaced points from `lo` to `hi` inclusive on each axis.
    pub fn uniform(spec: &[(T, T, usize)]) -> Result<Self> {
        let axes = spec
            .iter()
            .map(|&(lo, hi, steps)| {
                if steps < 2 {
                    return Err(Error::arg("grid", format!("need at least 2 steps, got {steps}")));
                }
                let span = hi - lo;
                let last = T::of_usize(steps - 1);
                Ok((0..steps)
                    .map(|i| if i + 1 == steps { hi } else { lo + span * T::of_usize(i) / last })
                    .collect())
            })
            .collect::<Result<Vec<Vec<T>>>>()?;
        Self::from_axes(axes)
    }

    /// Recovers the lattice behind a list of points, checking that the points
    /// are exactly the lattice in canonical order.
    pub fn from_points(points: ArrayView2<T>) -> Result<Self> {
        let d = points.ncols();
        if d == 0 || points.nrows() == 0 {
            return Err(Error::arg("grid", "grid is empty"));
        }
        let mut axes = Vec::with_capacity(d);
        for col in points.columns() {
            let mut v: Vec<T> = col.to_vec();
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::arg("grid", "grid contains non-finite values"));
            }
            v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            v.dedup();
            axes.push(v);
        }
        if d == 1 {
            if points.column(0).iter().zip(&axes[0]).any(|(a, b)| a != b)
                || axes[0].len() != points.nrows()
            {
                return Err(Error::arg("grid", "1-D grid must be strictly increasing"));
            }
            return Self::from_axes(axes);
        }
        let lattice = Self::from_axes(axes)?;
        if lattice.len() != points.nrows() || lattice.points() != points {
            return Err(Error::arg("grid", "multi-dimensional grid is not a regular lattice"));
        }
        Ok(lattice)
    }

    pub fn axes(&self) -> &[Vec<T>] {
        &self.axes
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Array2<T> {
        let d = self.dim();
        let mut out = Array2::zeros((self.len(), d));
        let mut idx = vec![0usize; d];
        for mut row in out.rows_mut() {
            for k in 0..d {
                row[k] = self.axes[k][idx[k]];
            }
            for k in (0..d).rev() {
                idx[k] += 1;
                if idx[k] < self.axes[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
        out
    }

    fn trapezoid_weights(axis: &[T]) -> Vec<T> {
        let n = axis.len();
        let half = T::of(0.5);
        (0..n)
            .map(|i| {
                let lo = if i > 0 { axis[i] - axis[i - 1] } else { T::zero() };
                let hi = if i + 1 < n { axis[i + 1] - axis[i] } else { T::zero() };
                half * (lo + hi)
            })
            .collect()
    }

    /// Trapezoid-rule weight of every lattice point, in point order.
    pub fn quadrature_weights(&self) -> Vec<T> {
        let per_axis: Vec<Vec<T>> = self.axes.iter().map(|a| Self::trapezoid_weights(a)).collect();
        let mut out = vec![T::one()];
        for w in &per_axis {
            out = out
                .iter()
                .flat_map(|&a| w.iter().map(move |&b| a * b))
                .collect();
        }
        out
    }

    /// Iterated trapezoid integral of `values` given in point order.
    pub fn integrate(&self, values: &[T]) -> Result<T> {
        if values.len() != self.len() {
            return Err(Error::arg(
                "values",
                format!("{} values for {} grid points", values.len(), self.len()),
            ));
        }
        let mut current = values.to_vec();
        // Collapse the last (fastest) axis first.
        for axis in self.axes.iter().rev() {
            let w = Self::trapezoid_weights(axis);
            current = current
                .chunks(axis.len())
                .map(|chunk| compensated_sum(chunk.iter().zip(&w).map(|(&v, &wi)| v * wi)))
                .collect();
        }
        Ok(current[0])
    }

    /// Multilinear interpolation of `values` at `z`; `None` outside the hull.
    pub fn interpolate(&self, values: &[T], z: &[T]) -> Option<T> {
        let d = self.dim();
        if z.len() != d || values.len() != self.len() {
            return None;
        }
        let mut base = Vec::with_capacity(d);
        let mut frac = Vec::with_capacity(d);
        for (axis, &v) in self.axes.iter().zip(z) {
            let (lo, hi) = (axis[0], axis[axis.len() - 1]);
            if !(v >= lo && v <= hi) {
                return None;
            }
            if axis.len() == 1 {
                base.push(0);
                frac.push(T::zero());
                continue;
            }
            // Index of the cell [axis[j], axis[j+1]] containing v.
            let j = axis.partition_point(|&a| a <= v).clamp(1, axis.len() - 1) - 1;
            let t = (v - axis[j]) / (axis[j + 1] - axis[j]);
            base.push(j);
            frac.push(t);
        }
        let mut strides = vec![1usize; d];
        for k in (0..d.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.axes[k + 1].len();
        }
        let mut acc = T::zero();
        for corner in 0..(1usize << d) {
            let mut weight = T::one();
            let mut offset = 0;
            let mut skip = false;
            for k in 0..d {
                let up = (corner >> (d - 1 - k)) & 1 == 1;
                if up {
                    if frac[k] == T::zero() {
                        skip = true;
                        break;
                    }
                    weight *= frac[k];
                    offset += (base[k] + 1) * strides[k];
                } else {
                    weight *= T::one() - frac[k];
                    offset += base[k] * strides[k];
                }
            }
            if !skip {
                acc += weight * values[offset];
            }
        }
        Some(acc)
    }
}

/// Trapezoid integral of `values` over `grid`.
///
/// A 1-D grid must be strictly increasing; a multi-dimensional grid must be a
/// regular lattice in canonical order (last coordinate fastest).
pub fn grid_integral<T: Scalar>(values: &[T], grid: ArrayView2<T>) -> Result<T> {
    Lattice::from_points(grid)?.integrate(values)
}
