use nalgebra::{DMatrix, DVector};

use super::map::LinearMap;
use crate::error::{Error, Result};
use crate::proxlib;

/// Feasible set a block's minimizer must lie in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintSet {
    Unconstrained,
    PsdCone,
}

/// Block objective with an exact proximal solver.
///
/// Every variant answers [`Objective::prox_solve`]:
/// `argmin_{x ∈ X} f(x) + (weight/2)‖A x − anchor‖²`, which is the shape every
/// block subproblem of the grouped iteration reduces to once the multiplier,
/// the other blocks and the proximal term are folded into the anchor.
///
/// Matrix-valued variants act on column-major vectorized `n × n` matrices.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// `½ xᵀ P x + qᵀ x` with `P` symmetric positive semidefinite.
    Quadratic {
        hessian: DMatrix<f64>,
        linear: DVector<f64>,
    },
    /// `⟨X, C⟩ − log det X` on symmetric positive definite `X`.
    LogDetTrace { cost: DMatrix<f64> },
    /// `ν ‖x‖₁`
    L1 { weight: f64 },
    /// `μ tr(L)` restricted to the positive semidefinite cone.
    TracePsd { weight: f64 },
}

pub(crate) fn side_of(dim: usize) -> Option<usize> {
    let n = (dim as f64).sqrt().round() as usize;
    (n * n == dim).then_some(n)
}

pub fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

pub fn mat_of(v: &DVector<f64>, n: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(n, n, v.as_slice())
}

impl Objective {
    pub fn tag(&self) -> &'static str {
        match self {
            Objective::Quadratic { .. } => "quadratic",
            Objective::LogDetTrace { .. } => "logdet_trace",
            Objective::L1 { .. } => "l1",
            Objective::TracePsd { .. } => "trace_psd",
        }
    }

    pub fn constraint_set(&self) -> ConstraintSet {
        match self {
            Objective::TracePsd { .. } => ConstraintSet::PsdCone,
            _ => ConstraintSet::Unconstrained,
        }
    }

    /// Checks that the objective is defined on a block of dimension `dim`.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        match self {
            Objective::Quadratic { hessian, linear } => {
                if hessian.nrows() != dim || hessian.ncols() != dim || linear.len() != dim {
                    return Err(Error::Dimension(format!(
                        "quadratic objective is {}x{} / {} for a block of dim {dim}",
                        hessian.nrows(),
                        hessian.ncols(),
                        linear.len()
                    )));
                }
            }
            Objective::LogDetTrace { cost } => {
                if cost.nrows() * cost.ncols() != dim || !cost.is_square() {
                    return Err(Error::Dimension(format!(
                        "log-det cost is {}x{}, block dim {dim}",
                        cost.nrows(),
                        cost.ncols()
                    )));
                }
            }
            Objective::TracePsd { .. } => {
                if side_of(dim).is_none() {
                    return Err(Error::Dimension(format!(
                        "trace/PSD block needs a square matrix variable, dim {dim}"
                    )));
                }
            }
            Objective::L1 { .. } => {}
        }
        Ok(())
    }

    pub fn eval(&self, x: &DVector<f64>) -> Result<f64> {
        match self {
            Objective::Quadratic { hessian, linear } => {
                Ok(0.5 * x.dot(&(hessian * x)) + linear.dot(x))
            }
            Objective::LogDetTrace { cost } => {
                let n = cost.nrows();
                let xm = mat_of(x, n);
                let chol = nalgebra::Cholesky::new(symmetrized(&xm)).ok_or_else(|| {
                    Error::Domain("log-det argument is not positive definite".into())
                })?;
                let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
                Ok(xm.dot(cost) - logdet)
            }
            Objective::L1 { weight } => Ok(weight * x.iter().map(|v| v.abs()).sum::<f64>()),
            Objective::TracePsd { weight } => {
                let n = side_of(x.len())
                    .ok_or_else(|| Error::Dimension("trace block is not square".into()))?;
                let xm = mat_of(x, n);
                let min = proxlib::sym_eig(&xm)?.values.min();
                if min < -PSD_SLACK * xm.amax().max(1.0) {
                    return Err(Error::Domain(format!(
                        "trace block argument not PSD (min eigenvalue {min:e})"
                    )));
                }
                Ok(weight * xm.trace())
            }
        }
    }

    /// `argmin_{x ∈ X} f(x) + (weight/2)‖map·x − anchor‖²`.
    pub fn prox_solve(
        &self,
        map: &LinearMap,
        anchor: &DVector<f64>,
        weight: f64,
    ) -> Result<DVector<f64>> {
        if !(weight > 0.0) {
            return Err(Error::Argument(format!("prox weight must be positive, got {weight}")));
        }
        if anchor.len() != map.rows() {
            return Err(Error::Dimension(format!(
                "anchor has length {}, map has {} rows",
                anchor.len(),
                map.rows()
            )));
        }
        if let Objective::Quadratic { hessian, linear } = self {
            // (P + w AᵀA) x = w Aᵀ v − q
            let lhs = hessian + map.gram() * weight;
            let rhs = map.apply_transpose(anchor) * weight - linear;
            return solve_spd(lhs, rhs);
        }
        // remaining variants need A = a·I: ‖a x − v‖² = a²‖x − v/a‖²
        let scale = map.as_scaled_identity().ok_or_else(|| {
            Error::Unsupported(format!(
                "{} objective requires a scaled-identity coupling map",
                self.tag()
            ))
        })?;
        if scale == 0.0 {
            return Err(Error::Argument("zero coupling map".into()));
        }
        let z = anchor / scale;
        let w = weight * scale * scale;
        match self {
            Objective::LogDetTrace { cost } => {
                // C − X⁻¹ + w (X − Z) = 0  ⇔  w X² + (C − w Z) X − I = 0
                let n = cost.nrows();
                let r = cost - mat_of(&z, n) * w;
                Ok(vec_of(&proxlib::prox_logdet(&r, w)?))
            }
            Objective::L1 { weight: nu } => {
                let mut out = z;
                proxlib::soft_shrink_in_place(out.as_mut_slice(), nu / w);
                Ok(out)
            }
            Objective::TracePsd { weight: mu } => {
                let n = side_of(z.len())
                    .ok_or_else(|| Error::Dimension("trace block is not square".into()))?;
                let shifted = mat_of(&z, n) - DMatrix::identity(n, n) * (mu / w);
                Ok(vec_of(&proxlib::psd_project(&shifted)?))
            }
            Objective::Quadratic { .. } => unreachable!(),
        }
    }
}

/// Eigenvalue slack used when checking that PSD iterates stay in the cone.
pub const PSD_SLACK: f64 = 1e-10;

fn symmetrized(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn solve_spd(lhs: DMatrix<f64>, rhs: DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = nalgebra::Cholesky::new(lhs.clone()) {
        return Ok(ch.solve(&rhs));
    }
    lhs.lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric("singular block subproblem".into()))
}
