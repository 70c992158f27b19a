//! Orthonormal cosine basis on `[0, 1]` and its tensor products.
//!
//! `phi_0(z) = 1`, `phi_j(z) = sqrt(2) cos(pi j z)` for `j >= 1`. Responses are
//! min-max rescaled onto the unit cube before evaluation.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest supported response dimension. The tensor basis grows as `n_basis^dim`.
pub const MAX_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisSpec {
    n_basis: usize,
    dim: usize,
}

impl BasisSpec {
    pub fn new(n_basis: usize, dim: usize) -> Result<Self> {
        if n_basis < 2 {
            return Err(Error::arg(
                "n_basis",
                format!("need at least 2 basis functions, got {n_basis}"),
            ));
        }
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::arg(
                "dim",
                format!("response dimension must be in 1..={MAX_DIM}, got {dim}"),
            ));
        }
        Ok(BasisSpec { n_basis, dim })
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of tensor-product functions, `n_basis^dim`.
    pub fn len(&self) -> usize {
        self.n_basis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Evaluates the tensor basis at a point of `[0,1]^dim`.
    pub fn evaluate<T: Scalar>(&self, z: &[T]) -> Result<Vec<T>> {
        if z.len() != self.dim {
            return Err(Error::arg(
                "z",
                format!("expected {} coordinates, got {}", self.dim, z.len()),
            ));
        }
        for &v in z {
            check_unit(v)?;
        }
        let mut out = vec![T::zero(); self.len()];
        let mut scratch = vec![T::zero(); self.n_basis];
        tensor_into(z, self.n_basis, &mut scratch, &mut out);
        Ok(out)
    }

    /// Basis matrix for rescaled responses, one row per observation.
    ///
    /// The constant function (index 0) is dropped: it adds the same amount to
    /// every split score. Columns follow the tensor flattening order with the
    /// leading all-zeros index removed.
    pub fn split_matrix<T: Scalar>(&self, z_scaled: ArrayView2<T>) -> Result<Array2<T>> {
        if z_scaled.ncols() != self.dim {
            return Err(Error::arg(
                "z",
                format!(
                    "expected {} response columns, got {}",
                    self.dim,
                    z_scaled.ncols()
                ),
            ));
        }
        let m = self.len() - 1;
        let mut out = Array2::zeros((z_scaled.nrows(), m));
        let mut row = vec![T::zero(); self.len()];
        let mut scratch = vec![T::zero(); self.n_basis];
        let mut z = vec![T::zero(); self.dim];
        for (i, zrow) in z_scaled.rows().into_iter().enumerate() {
            for (dst, &v) in z.iter_mut().zip(zrow.iter()) {
                check_unit(v)?;
                *dst = v;
            }
            tensor_into(&z, self.n_basis, &mut scratch, &mut row);
            for (dst, &v) in out.row_mut(i).iter_mut().zip(&row[1..]) {
                *dst = v;
            }
        }
        Ok(out)
    }
}

fn check_unit<T: Scalar>(z: T) -> Result<()> {
    if z >= T::zero() && z <= T::one() {
        Ok(())
    } else {
        Err(Error::Domain {
            value: z.to_f64().unwrap_or(f64::NAN),
        })
    }
}

fn cosine_into<T: Scalar>(z: T, out: &mut [T]) {
    let sqrt2 = T::SQRT_2();
    let pi_z = T::PI() * z;
    for (j, v) in out.iter_mut().enumerate() {
        *v = if j == 0 {
            T::one()
        } else {
            sqrt2 * (T::of_usize(j) * pi_z).cos()
        };
    }
}

// Lexicographic flattening, last coordinate fastest.
fn tensor_into<T: Scalar>(z: &[T], n_basis: usize, scratch: &mut [T], out: &mut [T]) {
    let mut filled = 1;
    out[0] = T::one();
    for &zk in z {
        cosine_into(zk, scratch);
        // Expand in place from the back so earlier entries are read before being overwritten.
        for a in (0..filled).rev() {
            let base = out[a];
            for (b, &u) in scratch.iter().enumerate().rev() {
                out[a * n_basis + b] = base * u;
            }
        }
        filled *= n_basis;
    }
}

/// `[phi_0(z), ..., phi_{n_basis-1}(z)]` for `z` in `[0, 1]`.
pub fn cosine_basis<T: Scalar>(z: T, n_basis: usize) -> Result<Vec<T>> {
    check_unit(z)?;
    let mut out = vec![T::zero(); n_basis];
    cosine_into(z, &mut out);
    Ok(out)
}

/// Tensor-product basis at `z`; `spec.dim()` must equal `z.len()`.
pub fn tensor_basis<T: Scalar>(z: &[T], spec: &BasisSpec) -> Result<Vec<T>> {
    spec.evaluate(z)
}

/// Min-max rescales each response column onto `[0, 1]`.
///
/// With `bounds = None` the bounds are taken from the data and returned for
/// reuse; with stored bounds, values outside them are clamped.
pub fn rescale_response<T: Scalar>(
    z: ArrayView2<T>,
    bounds: Option<&[(T, T)]>,
) -> Result<(Array2<T>, Vec<(T, T)>)> {
    let bounds = match bounds {
        Some(b) => {
            if b.len() != z.ncols() {
                return Err(Error::arg(
                    "bounds",
                    format!("{} bounds for {} response columns", b.len(), z.ncols()),
                ));
            }
            for (k, &(lo, hi)) in b.iter().enumerate() {
                if !(hi > lo) {
                    return Err(Error::DegenerateResponse { column: k });
                }
            }
            b.to_vec()
        }
        None => {
            if z.nrows() < 2 {
                return Err(Error::input(
                    "z",
                    format!("need at least 2 responses, got {}", z.nrows()),
                ));
            }
            let mut out = Vec::with_capacity(z.ncols());
            for (k, col) in z.columns().into_iter().enumerate() {
                let mut lo = T::infinity();
                let mut hi = T::neg_infinity();
                for &v in col {
                    if !v.is_finite() {
                        return Err(Error::input("z", format!("non-finite value in column {k}")));
                    }
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                if !(hi > lo) {
                    return Err(Error::DegenerateResponse { column: k });
                }
                out.push((lo, hi));
            }
            out
        }
    };
    let mut scaled = z.to_owned();
    for (mut col, &(lo, hi)) in scaled.columns_mut().into_iter().zip(&bounds) {
        let span = hi - lo;
        col.mapv_inplace(|v| ((v - lo) / span).max(T::zero()).min(T::one()));
    }
    Ok((scaled, bounds))
}
