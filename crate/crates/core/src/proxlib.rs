//! Closed-form proximal maps used by the latent-variable graphical model
//! blocks: the log-det quadratic prox, entrywise soft shrinkage and the
//! projection onto the positive semidefinite cone. The two spectral maps share
//! one symmetric eigendecomposition contract ([`SymEig`]).

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative tolerance guaranteed by [`sym_eig`] for reconstruction and
/// orthogonality.
pub const EIG_TOL: f64 = 1e-10;

/// Eigendecomposition `M = U diag(values) Uᵀ` with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub vectors: DMatrix<f64>,
    pub values: DVector<f64>,
}

impl SymEig {
    /// `U diag(f(values)) Uᵀ`.
    pub fn rebuild_with(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let g = f(self.values[j]);
            scaled.column_mut(j).scale_mut(g);
        }
        let mut out = scaled * self.vectors.transpose();
        symmetrize_in_place(&mut out);
        out
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.rebuild_with(|v| v)
    }
}

pub(crate) fn symmetrize_in_place(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Symmetric eigendecomposition of `(M + Mᵀ)/2`, eigenvalues ascending.
pub fn sym_eig(m: &DMatrix<f64>) -> Result<SymEig> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "sym_eig needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite entry in eigen input".into()));
    }
    let mut sym = m.clone();
    symmetrize_in_place(&mut sym);
    let n = sym.nrows();
    if n == 0 {
        return Ok(SymEig {
            vectors: DMatrix::zeros(0, 0),
            values: DVector::zeros(0),
        });
    }
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SymEig { vectors, values })
}

/// Positive root of `a γ² + ρ γ − 1 = 0`, evaluated without cancellation.
pub fn logdet_gamma(rho: f64, a: f64) -> f64 {
    let disc = (rho * rho + 4.0 * a).sqrt();
    if rho >= 0.0 {
        2.0 / (rho + disc)
    } else {
        (disc - rho) / (2.0 * a)
    }
}

/// Solves `min_X ⟨X, R⟩ − logdet X + (a/2)‖X‖²_F` over symmetric positive
/// definite `X`, i.e. `a X² + R X − I = 0`. Callers fold their affine data
/// (cost matrix, anchor, multiplier) into `R`.
pub fn prox_logdet(r: &DMatrix<f64>, a: f64) -> Result<DMatrix<f64>> {
    Ok(prox_logdet_spectral(r, a)?.0)
}

/// Like [`prox_logdet`] but also returns the decomposition of `R` and the
/// eigenvalues `γ` of the solution.
pub fn prox_logdet_spectral(
    r: &DMatrix<f64>,
    a: f64,
) -> Result<(DMatrix<f64>, SymEig, DVector<f64>)> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::Argument(format!(
            "log-det prox coefficient must be positive, got {a}"
        )));
    }
    let eig = sym_eig(r)?;
    let gamma = eig.values.map(|rho| logdet_gamma(rho, a));
    let x = eig.rebuild_with(|rho| logdet_gamma(rho, a));
    Ok((x, eig, gamma))
}

#[inline]
pub fn shrink_scalar(v: f64, kappa: f64) -> f64 {
    let mag = v.abs() - kappa;
    if mag > 0.0 {
        mag.copysign(v)
    } else {
        0.0
    }
}

/// Entrywise `sign(m)·max(|m| − κ, 0)`.
pub fn soft_shrink(m: &DMatrix<f64>, kappa: f64) -> DMatrix<f64> {
    assert!(kappa >= 0.0, "shrinkage threshold must be nonnegative");
    m.map(|v| shrink_scalar(v, kappa))
}

pub fn soft_shrink_in_place(values: &mut [f64], kappa: f64) {
    assert!(kappa >= 0.0, "shrinkage threshold must be nonnegative");
    for v in values.iter_mut() {
        *v = shrink_scalar(*v, kappa);
    }
}

/// Frobenius-nearest positive semidefinite matrix, `V diag(max(ρ, 0)) Vᵀ`.
pub fn psd_project(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = sym_eig(m)?;
    Ok(eig.rebuild_with(|rho| rho.max(0.0)))
}
