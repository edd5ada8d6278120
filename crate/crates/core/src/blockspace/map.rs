use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Coupling matrix of one block (`A_i` or `B_j`).
///
/// Matrix-valued blocks couple through `±I` on the vectorized variable, which
/// would be `n² × n²` if stored densely; those use `ScaledIdentity`.
#[derive(Debug, Clone, PartialEq)]
pub enum LinearMap {
    Dense(DMatrix<f64>),
    ScaledIdentity { dim: usize, scale: f64 },
}

impl LinearMap {
    pub fn identity(dim: usize) -> Self {
        LinearMap::ScaledIdentity { dim, scale: 1.0 }
    }

    pub fn scaled(dim: usize, scale: f64) -> Self {
        LinearMap::ScaledIdentity { dim, scale }
    }

    pub fn rows(&self) -> usize {
        match self {
            LinearMap::Dense(m) => m.nrows(),
            LinearMap::ScaledIdentity { dim, .. } => *dim,
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            LinearMap::Dense(m) => m.ncols(),
            LinearMap::ScaledIdentity { dim, .. } => *dim,
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            LinearMap::Dense(m) => m * x,
            LinearMap::ScaledIdentity { scale, .. } => x * *scale,
        }
    }

    /// `out += A x`
    pub fn apply_add(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        match self {
            LinearMap::Dense(m) => out.gemv(1.0, m, x, 1.0),
            LinearMap::ScaledIdentity { scale, .. } => out.axpy(*scale, x, 1.0),
        }
    }

    pub fn apply_transpose(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            LinearMap::Dense(m) => m.tr_mul(v),
            LinearMap::ScaledIdentity { scale, .. } => v * *scale,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            LinearMap::Dense(m) => m.clone(),
            LinearMap::ScaledIdentity { dim, scale } => DMatrix::identity(*dim, *dim) * *scale,
        }
    }

    /// `AᵀA`
    pub fn gram(&self) -> DMatrix<f64> {
        match self {
            LinearMap::Dense(m) => m.tr_mul(m),
            LinearMap::ScaledIdentity { dim, scale } => {
                DMatrix::identity(*dim, *dim) * (scale * scale)
            }
        }
    }

    /// Smallest and largest singular values.
    pub fn singular_value_range(&self) -> Result<(f64, f64)> {
        match self {
            LinearMap::ScaledIdentity { scale, .. } => Ok((scale.abs(), scale.abs())),
            LinearMap::Dense(m) => {
                if m.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numeric("non-finite entry in block map".into()));
                }
                if m.ncols() == 0 || m.nrows() == 0 {
                    return Ok((0.0, 0.0));
                }
                let sv = m.clone().svd(false, false).singular_values;
                let max = sv.max();
                // a wide map has only `rows` singular values; the missing ones are zero
                let min = if m.ncols() > m.nrows() { 0.0 } else { sv.min() };
                Ok((min, max))
            }
        }
    }

    /// `Some(scale)` when the map is a multiple of the identity.
    pub fn as_scaled_identity(&self) -> Option<f64> {
        match self {
            LinearMap::ScaledIdentity { scale, .. } => Some(*scale),
            LinearMap::Dense(m) => {
                if !m.is_square() || m.nrows() == 0 {
                    return None;
                }
                let s = m[(0, 0)];
                let exact = m
                    .iter()
                    .enumerate()
                    .all(|(k, v)| if k % (m.nrows() + 1) == 0 { *v == s } else { *v == 0.0 });
                exact.then_some(s)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tall_map_full_rank() {
        let m = LinearMap::Dense(DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]));
        let (lo, hi) = m.singular_value_range().unwrap();
        // singular values of [[1,0],[0,1],[1,1]] are sqrt(3) and 1
        assert!((lo - 1.0).abs() < 1e-12);
        assert!((hi - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn scaled_identity_detection() {
        let d = LinearMap::Dense(DMatrix::identity(3, 3) * -1.0);
        assert_eq!(d.as_scaled_identity(), Some(-1.0));
        let mut m = DMatrix::identity(3, 3);
        m[(0, 1)] = 0.5;
        assert_eq!(LinearMap::Dense(m).as_scaled_identity(), None);
    }

    #[test]
    fn apply_matches_dense() {
        let s = LinearMap::scaled(3, -2.0);
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(s.apply(&x), s.to_dense() * &x);
        let mut out = DVector::from_element(3, 1.0);
        s.apply_add(&x, &mut out);
        assert_eq!(out.as_slice(), &[-1.0, -3.0, -5.0]);
    }
}
