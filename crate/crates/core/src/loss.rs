//! Held-out estimate of the L2 conditional density loss, up to the constant
//! that does not depend on the estimator:
//!
//! ```text
//! mean_i ∫ f̂(z | x_i)^2 dz  -  2 mean_i f̂(z_i | x_i)
//! ```

use ndarray::ArrayView2;
use rayon::prelude::*;

use crate::density::{BandwidthSpec, DensityEstimate, Lattice};
use crate::error::{Error, Result};
use crate::forest::Forest;
use crate::scalar::{compensated_sum, Scalar};

/// Anything that can evaluate a conditional density on a grid of response points.
pub trait ConditionalDensity<T>: Sync {
    /// Density values `f̂(g | x)` for every row `g` of `grid`.
    fn density_on_grid(&self, x: &[T], grid: ArrayView2<T>) -> Result<Vec<T>>;
}

impl<T, F> ConditionalDensity<T> for F
where
    F: Fn(&[T], ArrayView2<T>) -> Result<Vec<T>> + Sync,
{
    fn density_on_grid(&self, x: &[T], grid: ArrayView2<T>) -> Result<Vec<T>> {
        self(x, grid)
    }
}

/// A fitted forest paired with a bandwidth rule.
pub struct ForestDensity<'a, T> {
    pub forest: &'a Forest<T>,
    pub bandwidth: BandwidthSpec<T>,
}

impl<T: Scalar> ConditionalDensity<T> for ForestDensity<'_, T> {
    fn density_on_grid(&self, x: &[T], grid: ArrayView2<T>) -> Result<Vec<T>> {
        Ok(self.forest.predict_density(x, grid, &self.bandwidth)?.values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport<T> {
    /// `term_sq - 2 term_lik`.
    pub loss: T,
    /// Mean over test points of `∫ f̂^2`.
    pub term_sq: T,
    /// Mean over test points of `f̂(z_i | x_i)`.
    pub term_lik: T,
    pub n_test: usize,
    /// Standard error of the per-point contributions `∫ f̂_i^2 - 2 f̂_i(z_i)`.
    pub se: T,
    /// Test responses outside the grid hull; they contribute zero likelihood.
    pub outside_hull: usize,
}

/// Estimates the loss of `estimator` on `(x_test, z_test)`.
///
/// `grid` must be a lattice (see [`Lattice::from_points`]) spanning the
/// responses. Off-grid responses are evaluated by multilinear interpolation.
/// Test points are processed in parallel; the reduction runs in index order,
/// so the result does not depend on the thread count.
pub fn cde_loss<T: Scalar, E: ConditionalDensity<T> + ?Sized>(
    estimator: &E,
    x_test: ArrayView2<T>,
    z_test: ArrayView2<T>,
    grid: ArrayView2<T>,
) -> Result<LossReport<T>> {
    let m = x_test.nrows();
    if m == 0 {
        return Err(Error::arg("x_test", "test set is empty"));
    }
    if z_test.nrows() != m {
        return Err(Error::arg(
            "z_test",
            format!("{} responses for {m} test rows", z_test.nrows()),
        ));
    }
    if z_test.ncols() != grid.ncols() {
        return Err(Error::arg(
            "grid",
            format!(
                "grid has {} columns, responses have {}",
                grid.ncols(),
                z_test.ncols()
            ),
        ));
    }
    let lattice = Lattice::from_points(grid)?;

    let per_point: Vec<(T, Option<T>)> = (0..m)
        .into_par_iter()
        .map(|i| {
            let x = x_test.row(i).to_vec();
            let z = z_test.row(i).to_vec();
            let values = estimator.density_on_grid(&x, grid)?;
            if values.len() != lattice.len() {
                return Err(Error::arg(
                    "estimator",
                    format!("{} values for {} grid points", values.len(), lattice.len()),
                ));
            }
            let squared: Vec<T> = values.iter().map(|&v| v * v).collect();
            let sq = lattice.integrate(&squared)?;
            Ok((sq, lattice.interpolate(&values, &z)))
        })
        .collect::<Result<_>>()?;

    let outside_hull = per_point.iter().filter(|(_, l)| l.is_none()).count();
    let sq: Vec<T> = per_point.iter().map(|p| p.0).collect();
    let lik: Vec<T> = per_point.iter().map(|p| p.1.unwrap_or(T::zero())).collect();
    let contrib: Vec<T> = sq
        .iter()
        .zip(&lik)
        .map(|(&s, &l)| s - T::of(2.0) * l)
        .collect();

    let mf = T::of_usize(m);
    let term_sq = compensated_sum(sq.iter().copied()) / mf;
    let term_lik = compensated_sum(lik.iter().copied()) / mf;
    let loss = term_sq - T::of(2.0) * term_lik;
    let se = if m > 1 {
        let mean = compensated_sum(contrib.iter().copied()) / mf;
        let var = compensated_sum(contrib.iter().map(|&c| (c - mean) * (c - mean)))
            / T::of_usize(m - 1);
        (var / mf).sqrt()
    } else {
        T::zero()
    };
    Ok(LossReport {
        loss,
        term_sq,
        term_lik,
        n_test: m,
        se,
        outside_hull,
    })
}

/// Multilinear interpolation of an estimate at `z`; `None` outside the grid hull.
pub fn interpolate_density<T: Scalar>(estimate: &DensityEstimate<T>, z: &[T]) -> Result<Option<T>> {
    let lattice = Lattice::from_points(estimate.grid.view())?;
    if z.len() != lattice.dim() {
        return Err(Error::arg(
            "z",
            format!("expected {} coordinates, got {}", lattice.dim(), z.len()),
        ));
    }
    Ok(lattice.interpolate(&estimate.values, z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::gaussian_kernel;
    use ndarray::{array, Array2};

    fn line(lo: f64, hi: f64, n: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, 1), |(i, _)| lo + (hi - lo) * i as f64 / (n - 1) as f64)
    }

    #[test]
    fn unit_density_on_unit_interval() {
        let grid = line(0.0, 1.0, 101);
        let one = |_: &[f64], g: ArrayView2<f64>| Ok(vec![1.0; g.nrows()]);
        let x = Array2::<f64>::zeros((3, 1));
        let z = array![[0.1], [0.5], [0.97]];
        let r = cde_loss(&one, x.view(), z.view(), grid.view()).unwrap();
        assert_eq!(r.term_sq, 1.0);
        assert_eq!(r.term_lik, 1.0);
        assert_eq!(r.loss, -1.0);
        assert_eq!(r.se, 0.0);
        assert_eq!(r.outside_hull, 0);
    }

    #[test]
    fn zero_density_has_zero_loss() {
        let grid = line(0.0, 1.0, 11);
        let zero = |_: &[f64], g: ArrayView2<f64>| Ok(vec![0.0; g.nrows()]);
        let x = Array2::<f64>::zeros((2, 1));
        let r = cde_loss(&zero, x.view(), array![[0.2], [0.3]].view(), grid.view()).unwrap();
        assert_eq!(r.loss, 0.0);
    }

    fn gaussian_case(points: usize) -> LossReport<f64> {
        let h = 0.2;
        let zi = 0.7;
        let grid = line(zi - 2.0, zi + 2.0, points);
        let est = move |_: &[f64], g: ArrayView2<f64>| {
            Ok(g.column(0).iter().map(|&v| gaussian_kernel(v - zi, h)).collect())
        };
        let x = Array2::<f64>::zeros((1, 1));
        cde_loss(&est, x.view(), array![[zi]].view(), grid.view()).unwrap()
    }

    #[test]
    fn gaussian_closed_form() {
        let h = 0.2;
        let r = gaussian_case(4001);
        let pi = std::f64::consts::PI;
        let sq = 1.0 / (2.0 * h * pi.sqrt());
        let lik = 1.0 / (h * (2.0 * pi).sqrt());
        assert!((r.term_sq - sq).abs() < 1e-6);
        assert!((r.term_lik - lik).abs() < 1e-12);
        assert!((r.loss - (sq - 2.0 * lik)).abs() < 1e-3);
        assert!((r.loss + 2.57895).abs() < 1e-3);
        assert_eq!(r.loss, r.term_sq - 2.0 * r.term_lik);
    }

    #[test]
    fn grid_refinement_converges() {
        assert!((gaussian_case(1001).loss - gaussian_case(4001).loss).abs() < 1e-4);
    }

    #[test]
    fn scale_consistency() {
        let grid = line(-1.0, 2.0, 61);
        let base = |x: &[f64], g: ArrayView2<f64>| {
            Ok(g.column(0).iter().map(|&v| gaussian_kernel(v - x[0], 0.3)).collect::<Vec<f64>>())
        };
        let doubled = |x: &[f64], g: ArrayView2<f64>| {
            Ok(base(x, g)?.into_iter().map(|v| 2.0 * v).collect())
        };
        let x = array![[0.0], [0.5], [1.0]];
        let z = array![[0.1], [0.4], [1.3]];
        let a = cde_loss(&base, x.view(), z.view(), grid.view()).unwrap();
        let b = cde_loss(&doubled, x.view(), z.view(), grid.view()).unwrap();
        assert!((b.term_sq - 4.0 * a.term_sq).abs() < 1e-12);
        assert!((b.term_lik - 2.0 * a.term_lik).abs() < 1e-12);
    }

    #[test]
    fn outside_hull_counts_and_contributes_nothing() {
        let grid = line(0.0, 1.0, 11);
        let one = |_: &[f64], g: ArrayView2<f64>| Ok(vec![1.0; g.nrows()]);
        let x = Array2::<f64>::zeros((2, 1));
        let r = cde_loss(&one, x.view(), array![[0.5], [3.0]].view(), grid.view()).unwrap();
        assert_eq!(r.outside_hull, 1);
        assert_eq!(r.term_lik, 0.5);
    }

    #[test]
    fn errors() {
        let grid = line(0.0, 1.0, 11);
        let one = |_: &[f64], g: ArrayView2<f64>| Ok(vec![1.0; g.nrows()]);
        let empty = Array2::<f64>::zeros((0, 1));
        assert!(cde_loss(&one, empty.view(), empty.view(), grid.view()).is_err());
        let short = |_: &[f64], _: ArrayView2<f64>| Ok(vec![1.0; 3]);
        let x = Array2::<f64>::zeros((1, 1));
        assert!(cde_loss(&short, x.view(), array![[0.5]].view(), grid.view()).is_err());
    }

    #[test]
    fn interpolate_estimate() {
        let est = DensityEstimate {
            grid: array![[0.0], [1.0]],
            values: vec![1.0, 3.0],
            bandwidth: vec![0.1],
            bandwidth_fallback: false,
        };
        assert_eq!(interpolate_density(&est, &[0.5]).unwrap(), Some(2.0));
        assert_eq!(interpolate_density(&est, &[1.0]).unwrap(), Some(3.0));
        assert_eq!(interpolate_density(&est, &[1.5]).unwrap(), None);
        assert!(interpolate_density(&est, &[0.5, 0.5]).is_err());
    }
}
