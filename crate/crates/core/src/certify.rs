//! Analysis matrices of the prediction-correction reading of the iteration and
//! runtime certificates for the inequalities the convergence theory asserts.
//!
//! All matrices are assembled densely in the first-group/second-group
//! coordinates of the scheme being analysed. A y-first run is analysed as the
//! x-first scheme on the group-swapped problem with swapped parameters.
//! Special case (b) is analysed on the reduced coordinates `v = (y, λ)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::blockspace::{objective_value, residual, GroupedPoint, SeparableProblem};
use crate::engine::{orient_point, orient_problem, Trajectory};
use crate::error::{Error, Result};
use crate::proxlib::sym_eig;
use crate::stepsize::{xi_constants, SpecialCase, StepsizeParams, Variant, XiConstants};

/// Relative slack allowed on every inequality certificate.
pub const CERT_SLACK: f64 = 1e-9;
/// Allowance, relative to `|d|ᵀ|A||d|`, for round-off in a quadratic form.
pub const FORM_ROUNDOFF: f64 = 1e-12;
/// Relative tolerance of the correction identity.
pub const CORRECTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Coordinates {
    /// `w = (x, y, λ)`
    Full,
    /// `v = (y, λ)`
    YLambda,
}

#[derive(Debug, Clone)]
pub struct AnalysisMatrices {
    pub coordinates: Coordinates,
    pub q: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub hx: DMatrix<f64>,
    pub hy: DMatrix<f64>,
    pub hx0: DMatrix<f64>,
    pub hy0: DMatrix<f64>,
}

/// `[σ on the diagonal, −1 elsewhere]`, `count × count`.
pub fn pattern_matrix(count: usize, sigma: f64) -> DMatrix<f64> {
    DMatrix::from_fn(count, count, |i, j| if i == j { sigma } else { -1.0 })
}

fn offsets(dims: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(dims.len() + 1);
    let mut acc = 0;
    out.push(0);
    for d in dims {
        acc += d;
        out.push(acc);
    }
    out
}

/// `β [σ AᵢᵀAᵢ on the diagonal, −AᵢᵀAⱼ off it]`
fn proximal_block(maps: &[DMatrix<f64>], sigma: f64, beta: f64) -> DMatrix<f64> {
    let dims: Vec<usize> = maps.iter().map(|a| a.ncols()).collect();
    let off = offsets(&dims);
    let total = off[dims.len()];
    let mut out = DMatrix::zeros(total, total);
    for (i, ai) in maps.iter().enumerate() {
        for (j, aj) in maps.iter().enumerate() {
            let coef = if i == j { sigma } else { -1.0 };
            let block = ai.transpose() * aj * (coef * beta);
            out.view_mut((off[i], off[j]), (dims[i], dims[j])).copy_from(&block);
        }
    }
    out
}

/// Second-group block `[a·BⱼᵀBⱼ diag, b·BⱼᵀBₗ off-diag, e·Bⱼᵀ; f·Bⱼ, g·I]`.
fn second_group_block(maps: &[DMatrix<f64>], n: usize, diag: f64, off_diag: f64, upper: f64, lower: f64, corner: f64) -> DMatrix<f64> {
    let dims: Vec<usize> = maps.iter().map(|b| b.ncols()).collect();
    let off = offsets(&dims);
    let my = off[dims.len()];
    let mut out = DMatrix::zeros(my + n, my + n);
    for (i, bi) in maps.iter().enumerate() {
        for (j, bj) in maps.iter().enumerate() {
            let coef = if i == j { diag } else { off_diag };
            if coef != 0.0 {
                let block = bi.transpose() * bj * coef;
                out.view_mut((off[i], off[j]), (dims[i], dims[j])).copy_from(&block);
            }
        }
        out.view_mut((off[i], my), (dims[i], n)).copy_from(&(bi.transpose() * upper));
        out.view_mut((my, off[i]), (n, dims[i])).copy_from(&(bi * lower));
    }
    out.view_mut((my, my), (n, n)).fill_with_identity();
    out.view_mut((my, my), (n, n)).scale_mut(corner);
    out
}

fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ra, rb) = (a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(ra + rb, ra + rb);
    out.view_mut((0, 0), (ra, ra)).copy_from(a);
    out.view_mut((ra, ra), (rb, rb)).copy_from(b);
    out
}

/// Assembles `Q, M, H, G, H_x, H_y` and the scalar patterns for an x-first
/// scheme on `problem`. Case (b) yields the reduced `(y, λ)` matrices.
pub fn build_analysis(
    problem: &SeparableProblem,
    params: &StepsizeParams,
    special_case: SpecialCase,
) -> Result<AnalysisMatrices> {
    let StepsizeParams { tau, s, sigma1, sigma2, beta } = *params;
    if !(tau + s > 0.0) {
        return Err(Error::SingularM(tau + s));
    }
    if !(beta > 0.0) {
        return Err(Error::Argument(format!("beta must be positive, got {beta}")));
    }
    let n = problem.n();
    let a: Vec<DMatrix<f64>> = problem.x_blocks.iter().map(|b| b.map.to_dense()).collect();
    let b: Vec<DMatrix<f64>> = problem.y_blocks.iter().map(|b| b.map.to_dense()).collect();
    let mx = problem.x_dim();
    let my = problem.y_dim();
    let ts = tau + s;

    let hx = proximal_block(&a, sigma1, beta);
    let hy = proximal_block(&b, sigma2, beta);
    let q_tilde = second_group_block(&b, n, (sigma2 + 1.0) * beta, 0.0, -tau, -1.0, 1.0 / beta);
    let h_tilde = second_group_block(
        &b,
        n,
        (sigma2 + 1.0 - tau * s / ts) * beta,
        -tau * s / ts * beta,
        -tau / ts,
        -tau / ts,
        1.0 / (beta * ts),
    );
    let g_tilde = second_group_block(&b, n, (sigma2 + 1.0 - s) * beta, -s * beta, s - 1.0, s - 1.0, (2.0 - tau - s) / beta);

    let mut m_tilde = DMatrix::identity(my + n, my + n);
    let off = offsets(&b.iter().map(|m| m.ncols()).collect::<Vec<_>>());
    for (j, bj) in b.iter().enumerate() {
        m_tilde.view_mut((my, off[j]), (n, bj.ncols())).copy_from(&(bj * (-s * beta)));
    }
    m_tilde.view_mut((my, my), (n, n)).fill_with_identity();
    m_tilde.view_mut((my, my), (n, n)).scale_mut(ts);

    let hx0 = pattern_matrix(problem.p(), sigma1);
    let hy0 = pattern_matrix(problem.q(), sigma2);

    Ok(match special_case {
        SpecialCase::B => AnalysisMatrices {
            coordinates: Coordinates::YLambda,
            q: q_tilde,
            m: m_tilde,
            h: h_tilde,
            g: g_tilde,
            hx,
            hy,
            hx0,
            hy0,
        },
        SpecialCase::None | SpecialCase::A => AnalysisMatrices {
            coordinates: Coordinates::Full,
            q: block_diag(&hx, &q_tilde),
            m: block_diag(&DMatrix::identity(mx, mx), &m_tilde),
            h: block_diag(&hx, &h_tilde),
            g: block_diag(&hx, &g_tilde),
            hx,
            hy,
            hx0,
            hy0,
        },
    })
}

/// Relative defects `‖H − QM⁻¹‖/‖H‖` and `‖G − (Q + Qᵀ − MᵀHM)‖/‖G‖`
/// (Frobenius, denominators floored at 1).
pub fn identity_defects(mats: &AnalysisMatrices) -> Result<(f64, f64)> {
    // H = Q M⁻¹  ⇔  Hᵀ = M⁻ᵀ Qᵀ
    let qm_inv_t = mats
        .m
        .transpose()
        .lu()
        .solve(&mats.q.transpose())
        .ok_or_else(|| Error::Numeric("M is singular".into()))?;
    let h_def = (&mats.h - qm_inv_t.transpose()).norm() / mats.h.norm().max(1.0);
    let g_from = &mats.q + mats.q.transpose() - mats.m.transpose() * &mats.h * &mats.m;
    let g_def = (&mats.g - g_from).norm() / mats.g.norm().max(1.0);
    Ok((h_def, g_def))
}

fn min_eig(m: &DMatrix<f64>) -> Result<f64> {
    Ok(sym_eig(m)?.values.min())
}

/// Smallest eigenvalue of the symmetrized `H` and whether it is positive.
pub fn check_h_pd(problem: &SeparableProblem, params: &StepsizeParams, special_case: SpecialCase) -> Result<(bool, f64)> {
    let mats = build_analysis(problem, params, special_case)?;
    let lo = min_eig(&mats.h)?;
    Ok((lo > 0.0, lo))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Xi1Estimate {
    /// `β · min` over the pattern contributions that exist in this case.
    pub value: f64,
    /// `λ_min(H_{x,0})` when the x pattern enters the bound.
    pub from_x: Option<f64>,
    /// `λ_min(H_{y,0})` when the y pattern enters the bound.
    pub from_y: Option<f64>,
}

impl Xi1Estimate {
    pub fn is_valid(&self) -> bool {
        self.value > 0.0
    }
}

/// Explicit constant for the block-difference term of the lower bound.
///
/// The special cases drop the pattern that degenerates: case (a) uses the x
/// pattern only and case (b) the y pattern only.
pub fn estimate_xi1(problem: &SeparableProblem, params: &StepsizeParams, special_case: SpecialCase) -> Result<Xi1Estimate> {
    let from_x = match special_case {
        SpecialCase::B => None,
        _ => Some(min_eig(&pattern_matrix(problem.p(), params.sigma1))?),
    };
    let from_y = match special_case {
        SpecialCase::A => None,
        _ => Some(min_eig(&pattern_matrix(problem.q(), params.sigma2))?),
    };
    let lo = from_x.into_iter().chain(from_y).fold(f64::INFINITY, f64::min);
    Ok(Xi1Estimate { value: params.beta * lo, from_x, from_y })
}

/// `J(w) = (−Aᵀλ, −Bᵀλ, Ax + By − c)` flattened.
pub fn vi_operator(problem: &SeparableProblem, w: &GroupedPoint) -> Result<DVector<f64>> {
    let r = residual(problem, w)?;
    let mut parts: Vec<f64> = Vec::with_capacity(problem.total_dim());
    for (block, _) in problem.x_blocks.iter().zip(&w.x).chain(problem.y_blocks.iter().zip(&w.y)) {
        parts.extend((-block.map.apply_transpose(&w.lambda)).iter());
    }
    parts.extend(r.iter());
    Ok(DVector::from_vec(parts))
}

/// `h(u_t) − h(u_ref) + ⟨w_t − w_ref, J(w_ref)⟩`
pub fn vi_gap(problem: &SeparableProblem, w_t: &GroupedPoint, w_ref: &GroupedPoint) -> Result<f64> {
    let j = vi_operator(problem, w_ref)?;
    let diff = w_t.flatten() - w_ref.flatten();
    Ok(objective_value(problem, w_t)? - objective_value(problem, w_ref)? + diff.dot(&j))
}

/// Per-step outcome of one inequality: `margin ≥ −tol` passes.
#[derive(Debug, Clone, Default, Serialize)]
pub struct StepReport {
    /// Iteration index of the first entry.
    pub first_k: usize,
    pub margin: Vec<f64>,
    pub tol: Vec<f64>,
    pub violations: usize,
    pub first_violation: Option<usize>,
}

impl StepReport {
    fn new(first_k: usize) -> Self {
        Self { first_k, ..Default::default() }
    }

    fn push(&mut self, margin: f64, tol: f64) {
        let k = self.first_k + self.margin.len();
        let ok = margin >= -tol;
        if !ok {
            self.violations += 1;
            self.first_violation.get_or_insert(k);
        }
        self.margin.push(margin);
        self.tol.push(tol);
    }

    pub fn ok(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovReport {
    /// `V_k` for `k = 1 … K`.
    pub values: Vec<f64>,
    pub descent: StepReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErgodicReport {
    pub eta: f64,
    /// `vi_gap(w_t, w*)` for `t = 1 … T`.
    pub gap: Vec<f64>,
    /// `η/2 − t·gap_t`
    pub rate: StepReport,
    /// `gap_t ≥ −1e-10`
    pub nonnegative: StepReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub coordinates: Coordinates,
    pub h_min_eigenvalue: f64,
    pub h_positive_definite: bool,
    pub xi1: Xi1Estimate,
    pub xi: XiConstants,
    pub correction: StepReport,
    pub contraction: StepReport,
    pub lyapunov: LyapunovReport,
    pub lower_bound: StepReport,
    pub ergodic: Option<ErgodicReport>,
    pub ok: bool,
}

impl CertificateReport {
    /// `(certificate, k)` of the earliest failure, in a fixed check order.
    pub fn first_violation(&self) -> Option<(&'static str, usize)> {
        let mut checks: Vec<(&'static str, &StepReport)> = vec![
            ("correction", &self.correction),
            ("contraction", &self.contraction),
            ("lyapunov", &self.lyapunov.descent),
            ("lower_bound", &self.lower_bound),
        ];
        if let Some(e) = &self.ergodic {
            checks.push(("ergodic_rate", &e.rate));
            checks.push(("ergodic_gap_sign", &e.nonnegative));
        }
        checks
            .into_iter()
            .filter_map(|(name, r)| r.first_violation.map(|k| (name, k)))
            .min_by_key(|&(_, k)| k)
    }
}

/// Trajectory certifier for one problem, parameter set and update order.
#[derive(Debug, Clone)]
pub struct Certifier {
    problem: SeparableProblem,
    variant: Variant,
    special_case: SpecialCase,
    pub params: StepsizeParams,
    pub matrices: AnalysisMatrices,
    pub xi: XiConstants,
    pub xi1: Xi1Estimate,
}

fn form(m: &DMatrix<f64>, d: &DVector<f64>) -> (f64, f64) {
    let md = m * d;
    let abs = m.abs() * d.abs();
    (d.dot(&md), d.abs().dot(&abs))
}

impl Certifier {
    /// Requires the oriented `(τ, s)` to lie in `K` (`K₁` for case (a)) and
    /// the proximal weights of the chosen case.
    pub fn new(problem: &SeparableProblem, params: &StepsizeParams, variant: Variant, special_case: SpecialCase) -> Result<Self> {
        let oriented = orient_problem(problem, variant);
        let params = match variant {
            Variant::XFirst => *params,
            Variant::YFirst => params.swapped(),
        };
        let (tau, s) = (params.tau, params.s);
        let in_domain = match special_case {
            SpecialCase::A => crate::stepsize::in_region_k1(tau, s),
            _ => crate::stepsize::in_region_k(tau, s),
        };
        if !in_domain {
            return Err(Error::Config(format!(
                "certificates need the oriented stepsizes (tau, s) = ({tau}, {s}) in the proven region"
            )));
        }
        let oriented_case = match (variant, special_case) {
            (Variant::XFirst, c) => c,
            (Variant::YFirst, SpecialCase::A) => SpecialCase::B,
            (Variant::YFirst, SpecialCase::B) => SpecialCase::A,
            (Variant::YFirst, SpecialCase::None) => SpecialCase::None,
        };
        let matrices = build_analysis(&oriented, &params, oriented_case)?;
        let xi = xi_constants(tau, s, params.beta)?;
        let xi1 = estimate_xi1(&oriented, &params, oriented_case)?;
        Ok(Self { problem: oriented, variant, special_case: oriented_case, params, matrices, xi, xi1 })
    }

    /// Deliberately perturbs `M`; used as a negative control.
    pub fn corrupt_m(&mut self) {
        let last = self.matrices.m.nrows() - 1;
        self.matrices.m[(last, last)] += 1.0;
    }

    fn oriented(&self, w: &GroupedPoint) -> GroupedPoint {
        orient_point(w, self.variant)
    }

    /// Coordinates the matrices act on.
    pub fn coords(&self, w: &GroupedPoint) -> DVector<f64> {
        let full = self.oriented(w).flatten();
        match self.matrices.coordinates {
            Coordinates::Full => full,
            Coordinates::YLambda => {
                let skip = self.problem.x_dim();
                full.rows(skip, full.len() - skip).into_owned()
            }
        }
    }

    fn second_group(&self, w: &GroupedPoint) -> DVector<f64> {
        let o = self.oriented(w);
        let mut v = Vec::new();
        for b in &o.y {
            v.extend(b.iter());
        }
        DVector::from_vec(v)
    }

    fn res_sq(&self, w: &GroupedPoint) -> Result<f64> {
        Ok(residual(&self.problem, &self.oriented(w))?.norm_squared())
    }

    /// `‖y^k − y^{k−1}‖²_{H_y}` with its absolute scale.
    fn hy_term(&self, cur: &GroupedPoint, prev: &GroupedPoint) -> (f64, f64) {
        let d = self.second_group(cur) - self.second_group(prev);
        form(&self.matrices.hy, &d)
    }

    /// `V_k` and its absolute scale.
    fn lyapunov(&self, traj: &Trajectory, k: usize, w_star: &DVector<f64>) -> Result<(f64, f64)> {
        let (hv, hs) = form(&self.matrices.h, &(self.coords(&traj.points[k]) - w_star));
        let r = self.xi.xi3 * self.res_sq(&traj.points[k])?;
        let (yv, ys) = self.hy_term(&traj.points[k], &traj.points[k - 1]);
        Ok((hv + r + self.xi.xi4 * yv, hs + r + self.xi.xi4 * ys))
    }

    pub fn correction(&self, traj: &Trajectory) -> Result<StepReport> {
        let mut rep = StepReport::new(0);
        for k in 0..traj.predicted.len() {
            let wk = self.coords(&traj.points[k]);
            let wt = self.coords(&traj.predicted[k]);
            let wn = self.coords(&traj.points[k + 1]);
            let d = &wk - &wt;
            let corr = &self.matrices.m * &d;
            let defect = (&wn - (&wk - &corr)).amax();
            let scale = (self.matrices.m.abs() * d.abs()).amax().max(wk.amax()).max(wn.amax()).max(1.0);
            rep.push(-defect, CORRECTION_TOL * scale);
        }
        Ok(rep)
    }

    /// `‖w^{k+1} − w*‖²_H ≤ ‖w^k − w*‖²_H − ‖w^k − w̃^k‖²_G` for every step.
    pub fn contraction(&self, traj: &Trajectory, w_star: &GroupedPoint) -> Result<StepReport> {
        let ws = self.coords(w_star);
        let mut rep = StepReport::new(0);
        let Some(first) = traj.points.first() else { return Ok(rep) };
        let d0 = form(&self.matrices.h, &(self.coords(first) - &ws)).0;
        for k in 0..traj.predicted.len() {
            let (next, s1) = form(&self.matrices.h, &(self.coords(&traj.points[k + 1]) - &ws));
            let (cur, s2) = form(&self.matrices.h, &(self.coords(&traj.points[k]) - &ws));
            let (gap, s3) = form(&self.matrices.g, &(self.coords(&traj.points[k]) - self.coords(&traj.predicted[k])));
            let tol = CERT_SLACK * d0 + FORM_ROUNDOFF * (s1 + s2 + s3);
            rep.push(cur - gap - next, tol);
        }
        Ok(rep)
    }

    /// `V_{k+1} ≤ V_k` for `k ≥ 1`.
    pub fn lyapunov_descent(&self, traj: &Trajectory, w_star: &GroupedPoint) -> Result<LyapunovReport> {
        let ws = self.coords(w_star);
        let mut descent = StepReport::new(1);
        let mut values = Vec::new();
        let last = traj.points.len().saturating_sub(1);
        let mut scales = Vec::new();
        for k in 1..=last {
            let (v, sc) = self.lyapunov(traj, k, &ws)?;
            values.push(v);
            scales.push(sc);
        }
        let v_ref = values.first().copied().unwrap_or(0.0);
        for i in 1..values.len() {
            let tol = CERT_SLACK * v_ref + FORM_ROUNDOFF * (scales[i] + scales[i - 1]);
            descent.push(values[i - 1] - values[i], tol);
        }
        Ok(LyapunovReport { values, descent })
    }

    /// The lower bound on `‖w^k − w̃^k‖²_G` for `k ≥ 1`. The relative slack
    /// refers to the larger of this step's and the first step's magnitudes.
    pub fn lower_bound(&self, traj: &Trajectory) -> Result<StepReport> {
        let mut rep = StepReport::new(1);
        let mut reference = 0.0f64;
        let xi = &self.xi;
        for k in 1..traj.predicted.len() {
            let (wkm, wk, wn) = (&traj.points[k - 1], &traj.points[k], &traj.points[k + 1]);
            let (lhs, ls) = form(&self.matrices.g, &(self.coords(wk) - self.coords(&traj.predicted[k])));
            let (ok, on) = (self.oriented(wk), self.oriented(wn));
            let mut blocks = 0.0;
            if self.xi1.from_x.is_some() {
                for (b, (a, c)) in self.problem.x_blocks.iter().zip(ok.x.iter().zip(&on.x)) {
                    blocks += b.map.apply(&(a - c)).norm_squared();
                }
            }
            if self.xi1.from_y.is_some() {
                for (b, (a, c)) in self.problem.y_blocks.iter().zip(ok.y.iter().zip(&on.y)) {
                    blocks += b.map.apply(&(a - c)).norm_squared();
                }
            }
            let (r_next, r_cur) = (self.res_sq(wn)?, self.res_sq(wk)?);
            let (hy_next, s1) = self.hy_term(wn, wk);
            let (hy_cur, s2) = self.hy_term(wk, wkm);
            let terms = [
                self.xi1.value * blocks,
                xi.xi2 * r_next,
                xi.xi3 * (r_next - r_cur),
                xi.xi4 * (hy_next - hy_cur),
            ];
            let rhs: f64 = terms.iter().sum();
            let magnitude = lhs.abs()
                + self.xi1.value * blocks
                + (xi.xi2 + 2.0 * xi.xi3) * (r_next + r_cur)
                + xi.xi4 * (hy_next.abs() + hy_cur.abs());
            if k == 1 {
                reference = magnitude;
            }
            let tol = CERT_SLACK * magnitude.max(reference) + FORM_ROUNDOFF * (ls + xi.xi4 * (s1 + s2));
            rep.push(lhs - rhs, tol);
        }
        Ok(rep)
    }

    /// `t · vi_gap(w_t, w*) ≤ η/2` for `t = 1 … T`, with `w_t` the mean of
    /// `w̃^1 … w̃^t` and `η` taken at the first iterate.
    pub fn ergodic(&self, traj: &Trajectory, w_star: &GroupedPoint) -> Result<Option<ErgodicReport>> {
        if traj.points.len() < 2 || traj.predicted.len() < 2 {
            return Ok(None);
        }
        let ws = self.coords(w_star);
        let (h1, hs) = form(&self.matrices.h, &(ws - self.coords(&traj.points[1])));
        let (y1, ys) = self.hy_term(&traj.points[1], &traj.points[0]);
        let eta = h1 + self.xi.xi3 * self.res_sq(&traj.points[1])? + self.xi.xi4 * y1;
        let eta_scale = hs + self.xi.xi4 * ys;
        let star = self.oriented(w_star);
        let h_star = objective_value(&self.problem, &star)?;
        let j_star = vi_operator(&self.problem, &star)?;
        let flat_star = star.flatten();
        let mut sum = traj.predicted[1].zeros_like();
        let mut gap = Vec::new();
        let mut rate = StepReport::new(1);
        let mut nonnegative = StepReport::new(1);
        for (t, pred) in traj.predicted.iter().enumerate().skip(1) {
            sum.add_scaled(1.0, pred);
            let w_t = self.oriented(&sum.scaled(1.0 / t as f64));
            let h_t = objective_value(&self.problem, &w_t)?;
            let g = h_t - h_star + (w_t.flatten() - &flat_star).dot(&j_star);
            let round = FORM_ROUNDOFF * (h_t.abs() + h_star.abs());
            gap.push(g);
            rate.push(0.5 * eta - t as f64 * g, CERT_SLACK * eta + FORM_ROUNDOFF * eta_scale + t as f64 * round);
            nonnegative.push(g, 1e-10);
        }
        Ok(Some(ErgodicReport { eta, gap, rate, nonnegative }))
    }

    pub fn certify(&self, traj: &Trajectory, w_star: &GroupedPoint) -> Result<CertificateReport> {
        let h_min = min_eig(&self.matrices.h)?;
        let correction = self.correction(traj)?;
        let contraction = self.contraction(traj, w_star)?;
        let lyapunov = self.lyapunov_descent(traj, w_star)?;
        let lower_bound = self.lower_bound(traj)?;
        let ergodic = self.ergodic(traj, w_star)?;
        let ok = h_min > 0.0
            && self.xi1.is_valid()
            && correction.ok()
            && contraction.ok()
            && lyapunov.descent.ok()
            && lower_bound.ok()
            && ergodic.as_ref().is_none_or(|e| e.rate.ok() && e.nonnegative.ok());
        Ok(CertificateReport {
            coordinates: self.matrices.coordinates,
            h_min_eigenvalue: h_min,
            h_positive_definite: h_min > 0.0,
            xi1: self.xi1,
            xi: self.xi,
            correction,
            contraction,
            lyapunov,
            lower_bound,
            ergodic,
            ok,
        })
    }

    pub fn special_case(&self) -> SpecialCase {
        self.special_case
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockspace::{make_identity_quadratic_problem, make_quadratic_test_problem};
    use crate::engine::{correction_identity_check, solve, step, IterationState, SolverConfig};

    fn params(tau: f64, s: f64, sigma1: f64, sigma2: f64, beta: f64) -> StepsizeParams {
        StepsizeParams { tau, s, sigma1, sigma2, beta }
    }

    #[test]
    fn scalar_m_lower_block() {
        let fx = make_identity_quadratic_problem(DVector::zeros(1)).unwrap();
        let mats = build_analysis(&fx.problem, &params(0.0, 1.0, 0.0, 0.0, 1.0), SpecialCase::None).unwrap();
        let expect = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, -1.0, 1.0]);
        assert_eq!(mats.m, expect);
    }

    #[test]
    fn singular_m_rejected() {
        let fx = make_identity_quadratic_problem(DVector::zeros(1)).unwrap();
        let r = build_analysis(&fx.problem, &params(0.5, -0.5, 1.0, 1.0, 1.0), SpecialCase::None);
        assert!(matches!(r, Err(Error::SingularM(_))));
    }

    #[test]
    fn definitional_identities_hold() {
        for seed in 0..6 {
            let fx = make_quadratic_test_problem(2, 2, 6, seed).unwrap();
            let mats = build_analysis(&fx.problem, &params(0.8, 1.17, 2.0, 3.0, 0.7), SpecialCase::None).unwrap();
            let (h, g) = identity_defects(&mats).unwrap();
            assert!(h <= 1e-12 && g <= 1e-12, "seed {seed}: {h:e} {g:e}");
            assert!((&mats.h - mats.h.transpose()).norm() <= 1e-10 * mats.h.norm());
        }
    }

    #[test]
    fn reduced_case_b_identities_hold() {
        let fx = make_quadratic_test_problem(1, 3, 7, 3).unwrap();
        let mats = build_analysis(&fx.problem, &params(0.9, 1.09, 0.0, 3.0, 1.3), SpecialCase::B).unwrap();
        assert_eq!(mats.coordinates, Coordinates::YLambda);
        assert_eq!(mats.h.nrows(), fx.problem.y_dim() + 7);
        let (h, g) = identity_defects(&mats).unwrap();
        assert!(h <= 1e-12 && g <= 1e-12);
    }

    #[test]
    fn reduced_forms_match_general_for_two_blocks() {
        let fx = make_quadratic_test_problem(1, 1, 4, 9).unwrap();
        let p = params(0.6, 0.9, 0.0, 0.0, 0.8);
        let general = build_analysis(&fx.problem, &p, SpecialCase::None).unwrap();
        let a = build_analysis(&fx.problem, &p, SpecialCase::A).unwrap();
        let b = build_analysis(&fx.problem, &p, SpecialCase::B).unwrap();
        assert_eq!(general.h, a.h);
        assert_eq!(general.g, a.g);
        let mx = fx.problem.x_dim();
        let k = general.h.nrows() - mx;
        assert_eq!(general.h.view((mx, mx), (k, k)).into_owned(), b.h);
        assert_eq!(general.g.view((mx, mx), (k, k)).into_owned(), b.g);
        assert_eq!(general.m.view((mx, mx), (k, k)).into_owned(), b.m);
        assert_eq!(general.q.view((mx, mx), (k, k)).into_owned(), b.q);
    }

    #[test]
    fn pattern_eigenvalues() {
        let e = sym_eig(&pattern_matrix(2, 2.0)).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14 && (e.values[1] - 3.0).abs() < 1e-14);
        // σ = p − 1: all-ones vector is in the null space
        let lo = min_eig(&pattern_matrix(4, 3.0)).unwrap();
        assert!(lo.abs() <= 1e-12);
    }

    #[test]
    fn xi1_examples() {
        let fx = make_quadratic_test_problem(2, 1, 6, 0).unwrap();
        let e = estimate_xi1(&fx.problem, &params(0.8, 1.17, 2.0, 3.0, 1.0), SpecialCase::None).unwrap();
        assert!((e.from_x.unwrap() - 1.0).abs() < 1e-14);
        assert!((e.from_y.unwrap() - 3.0).abs() < 1e-14);
        assert!((e.value - 1.0).abs() < 1e-14);
        let e = estimate_xi1(&fx.problem, &params(0.8, 1.17, 2.0, 0.0, 0.5), SpecialCase::A).unwrap();
        assert_eq!(e.from_y, None);
        assert!((e.value - 0.5).abs() < 1e-14);
    }

    #[test]
    fn h_pd_on_boundary_stepsize() {
        for seed in 0..5 {
            let fx = make_quadratic_test_problem(2, 2, 5, seed).unwrap();
            let (pd, lo) = check_h_pd(&fx.problem, &params(1.0, 0.3, 1.5, 1.5, 0.9), SpecialCase::None).unwrap();
            assert!(pd, "seed {seed}: {lo}");
        }
    }

    #[test]
    fn vi_operator_is_skew() {
        let fx = make_quadratic_test_problem(2, 1, 5, 1).unwrap();
        let mut rng = crate::rng::Stream::new(5);
        let total = fx.problem.total_dim();
        for _ in 0..10 {
            let a = GroupedPoint::from_flat(&fx.problem, &DVector::from_fn(total, |_, _| rng.normal())).unwrap();
            let b = GroupedPoint::from_flat(&fx.problem, &DVector::from_fn(total, |_, _| rng.normal())).unwrap();
            let d = a.flatten() - b.flatten();
            let jd = vi_operator(&fx.problem, &a).unwrap() - vi_operator(&fx.problem, &b).unwrap();
            assert!(d.dot(&jd).abs() <= 1e-12 * (1.0 + d.norm() * jd.norm()));
        }
        assert_eq!(vi_gap(&fx.problem, &fx.w_star, &fx.w_star).unwrap(), 0.0);
    }

    #[test]
    fn correction_identity_on_scalar_walkthrough() {
        let fx = make_identity_quadratic_problem(DVector::zeros(1)).unwrap();
        let p = params(0.0, 1.0, 0.0, 0.0, 1.0);
        let cfg = SolverConfig::new(p);
        let mats = build_analysis(&fx.problem, &p, SpecialCase::None).unwrap();
        let start = GroupedPoint {
            x: vec![DVector::zeros(1)],
            y: vec![DVector::zeros(1)],
            lambda: DVector::from_element(1, 1.0),
        };
        let s0 = IterationState::new(&fx.problem, start).unwrap();
        let s1 = step(&fx.problem, &s0, &cfg).unwrap();
        let d = correction_identity_check(&s0, &s1, &mats.m, Variant::XFirst).unwrap();
        assert!(d <= 1e-15);
    }

    #[allow(clippy::too_many_arguments)]
    fn run(fx_p: usize, fx_q: usize, n: usize, seed: u64, p: StepsizeParams, variant: Variant, case: SpecialCase, iters: usize) -> (CertificateReport, crate::blockspace::QuadraticFixture) {
        let fx = make_quadratic_test_problem(fx_p, fx_q, n, seed).unwrap();
        let mut cfg = SolverConfig::new(p);
        cfg.variant = variant;
        cfg.special_case = case;
        cfg.max_iter = iters;
        cfg.tol_ier = 1e-300;
        cfg.record_certificates = true;
        let out = solve(&fx.problem, GroupedPoint::zeros(&fx.problem), &cfg).unwrap();
        let cert = Certifier::new(&fx.problem, &p, variant, case).unwrap();
        let rep = cert.certify(out.trajectory.as_ref().unwrap(), &fx.w_star).unwrap();
        (rep, fx)
    }

    #[test]
    fn fixture_trajectory_certifies() {
        let (rep, _) = run(2, 2, 8, 1, params(0.9, 1.09, 2.0, 2.0, 1.0), Variant::XFirst, SpecialCase::None, 200);
        assert!(rep.ok, "{:?}", rep.first_violation());
        assert_eq!(rep.contraction.margin.len(), 200);
    }

    #[test]
    fn y_first_trajectory_certifies() {
        let (rep, _) = run(2, 3, 9, 2, params(1.17, 0.8, 2.0, 3.0, 0.5), Variant::YFirst, SpecialCase::None, 150);
        assert!(rep.ok, "{:?}", rep.first_violation());
    }

    #[test]
    fn special_cases_certify() {
        let (rep, _) = run(3, 1, 9, 4, params(0.8, 1.17, 2.5, 0.0, 1.0), Variant::XFirst, SpecialCase::A, 150);
        assert!(rep.ok, "{:?}", rep.first_violation());
        assert_eq!(rep.xi1.from_y, None);
        let (rep, _) = run(1, 3, 9, 5, params(0.8, 1.17, 0.0, 2.5, 1.0), Variant::XFirst, SpecialCase::B, 150);
        assert!(rep.ok, "{:?}", rep.first_violation());
        assert_eq!(rep.coordinates, Coordinates::YLambda);
    }

    #[test]
    fn corrupted_m_is_caught() {
        let fx = make_quadratic_test_problem(1, 1, 4, 0).unwrap();
        let p = params(0.9, 1.09, 1.0, 1.0, 1.0);
        let mut cfg = SolverConfig::new(p);
        cfg.max_iter = 20;
        cfg.record_certificates = true;
        let out = solve(&fx.problem, GroupedPoint::zeros(&fx.problem), &cfg).unwrap();
        let mut cert = Certifier::new(&fx.problem, &p, Variant::XFirst, SpecialCase::None).unwrap();
        cert.corrupt_m();
        let rep = cert.certify(out.trajectory.as_ref().unwrap(), &fx.w_star).unwrap();
        assert!(!rep.ok);
        assert_eq!(rep.first_violation(), Some(("correction", 0)));
    }

    #[test]
    fn stationary_trajectory_is_all_zero() {
        let fx = make_identity_quadratic_problem(DVector::zeros(2)).unwrap();
        let p = params(0.5, 0.5, 1.0, 1.0, 1.0);
        let traj = Trajectory {
            points: vec![fx.w_star.clone(); 4],
            predicted: vec![fx.w_star.clone(); 3],
        };
        let cert = Certifier::new(&fx.problem, &p, Variant::XFirst, SpecialCase::None).unwrap();
        let rep = cert.certify(&traj, &fx.w_star).unwrap();
        assert!(rep.ok);
        assert!(rep.lyapunov.values.iter().all(|v| *v == 0.0));
        assert!(rep.lower_bound.margin.iter().all(|v| *v == 0.0));
    }
}
