//! Latent-variable Gaussian graphical model selection:
//!
//! ```text
//! minimize ⟨X, C⟩ − log det X + ν‖S‖₁ + μ tr(L)   s.t.  X − S + L = 0,  L ⪰ 0
//! ```
//!
//! Matrices are vectorized column-major. Grouping I treats `(X, S)` as the
//! first group and `L` as the second; grouping II treats `X` as the first and
//! `(S, L)` as the second.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::blockspace::{mat_of, vec_of, BlockSpec, GroupedPoint, LinearMap, Objective, SeparableProblem};
use crate::engine::{solve_with, step, IterationState, SolveOutput, SolverConfig};
use crate::error::{Error, Result};
use crate::io::{read_matrix, write_matrix};
use crate::proxlib::sym_eig;
use crate::rng::Stream;
use crate::stepsize::{SpecialCase, StepsizeParams};

/// Iteration count of the reference run that defines `F*`.
pub const REFERENCE_ITERATIONS: usize = 1000;
/// Eigenvalue slack for the PSD checks on `C` and `L`.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Grouping {
    #[serde(rename = "I")]
    VariantI,
    #[serde(rename = "II")]
    VariantII,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorOptions {
    pub density: f64,
    pub sample_factor: usize,
    pub nu: f64,
    pub mu: f64,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        Self { density: 0.001, sample_factor: 10, nu: 0.005, mu: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LvggmsInstance {
    pub c: DMatrix<f64>,
    pub nu: f64,
    pub mu: f64,
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LvggmsState {
    pub x: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub lambda: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub ier: f64,
    pub cer: f64,
    pub oer: Option<f64>,
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Sample covariance of a random sparse-precision Gaussian.
///
/// Starts from the identity precision, sets `⌈density·n²⌉` uniformly drawn
/// (with replacement) linear positions to one, adds the transpose, shifts by
/// `1.1|λ_min|` if indefinite, inverts, and draws `sample_factor·n` samples via
/// the Cholesky factor of the covariance. `C` uses the `1/(N − 1)` normalization
/// around the sample mean.
pub fn generate_instance(n: usize, seed: u64, opts: &GeneratorOptions) -> Result<LvggmsInstance> {
    if n < 2 {
        return Err(Error::Argument(format!("instance size must be at least 2, got {n}")));
    }
    if !(opts.density >= 0.0 && opts.density <= 1.0) {
        return Err(Error::Argument(format!("density must lie in [0, 1], got {}", opts.density)));
    }
    if opts.sample_factor == 0 || opts.sample_factor * n < 2 {
        return Err(Error::Argument("need at least two samples".into()));
    }
    if !(opts.nu > 0.0 && opts.mu > 0.0) {
        return Err(Error::Argument(format!("nu and mu must be positive, got {} and {}", opts.nu, opts.mu)));
    }
    let mut positions = Stream::substream(seed, 0);
    let mut normals = Stream::substream(seed, 1);

    let mut precision = DMatrix::<f64>::identity(n, n);
    let draws = (opts.density * (n * n) as f64).ceil() as usize;
    for _ in 0..draws {
        let idx = positions.below((n * n) as u64) as usize;
        precision[(idx % n, idx / n)] = 1.0;
    }
    precision = &precision + precision.transpose();
    let lo = sym_eig(&precision)?.values.min();
    if lo < 0.0 {
        precision += DMatrix::identity(n, n) * (1.1 * lo.abs());
    }
    let mut sigma = precision
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numeric("precision matrix is not positive definite".into()))?
        .inverse();
    symmetrize(&mut sigma);
    let factor = sigma
        .cholesky()
        .ok_or_else(|| Error::Numeric("covariance matrix is not positive definite".into()))?
        .l();

    let samples = opts.sample_factor * n;
    let z = DMatrix::from_fn(n, samples, |_, _| normals.normal());
    let data = factor * z;
    let mean = data.column_mean();
    let centered = DMatrix::from_fn(n, samples, |i, k| data[(i, k)] - mean[i]);
    let mut c = &centered * centered.transpose() / (samples - 1) as f64;
    symmetrize(&mut c);
    Ok(LvggmsInstance { c, nu: opts.nu, mu: opts.mu, n, seed })
}

/// `C` symmetric to `1e-12` and PSD within `1e-10·‖C‖`.
pub fn check_instance(instance: &LvggmsInstance) -> Result<()> {
    let c = &instance.c;
    let asym = (c - c.transpose()).amax();
    if asym > 1e-12 * c.amax().max(1.0) {
        return Err(Error::Domain(format!("C is not symmetric (max asymmetry {asym:e})")));
    }
    let lo = sym_eig(c)?.values.min();
    if lo < -PSD_TOL * c.norm().max(1.0) {
        return Err(Error::Domain(format!("C is not positive semidefinite (λ_min = {lo:e})")));
    }
    Ok(())
}

/// `F(X, S, L) = ⟨X, C⟩ − log det X + ν‖S‖₁ + μ tr(L)`
pub fn objective(instance: &LvggmsInstance, state: &LvggmsState) -> Result<f64> {
    let chol = state
        .x
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Domain("X is not symmetric positive definite".into()))?;
    let logdet: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Ok(state.x.dot(&instance.c) - logdet + instance.nu * state.s.abs().sum() + instance.mu * state.l.trace())
}

/// `(I, 2I, I, 0)`
pub fn start_state(n: usize) -> LvggmsState {
    let eye = DMatrix::identity(n, n);
    LvggmsState { x: eye.clone(), s: &eye * 2.0, l: eye, lambda: DMatrix::zeros(n, n) }
}

/// The separable problem for `grouping` and the start point `(I, 2I, I, 0)`.
pub fn make_problem(instance: &LvggmsInstance, grouping: Grouping) -> Result<(SeparableProblem, GroupedPoint)> {
    let dim = instance.n * instance.n;
    let x = BlockSpec::new(LinearMap::identity(dim), Objective::LogDetTrace { cost: instance.c.clone() })?;
    let s = BlockSpec::new(LinearMap::scaled(dim, -1.0), Objective::L1 { weight: instance.nu })?;
    let l = BlockSpec::new(LinearMap::identity(dim), Objective::TracePsd { weight: instance.mu })?;
    let (first, second) = match grouping {
        Grouping::VariantI => (vec![x, s], vec![l]),
        Grouping::VariantII => (vec![x], vec![s, l]),
    };
    let problem = SeparableProblem::new(first, second, DVector::zeros(dim))?;
    let start = point_of(&start_state(instance.n), grouping);
    Ok((problem, start))
}

pub fn point_of(state: &LvggmsState, grouping: Grouping) -> GroupedPoint {
    let (x, s, l) = (vec_of(&state.x), vec_of(&state.s), vec_of(&state.l));
    let (first, second) = match grouping {
        Grouping::VariantI => (vec![x, s], vec![l]),
        Grouping::VariantII => (vec![x], vec![s, l]),
    };
    GroupedPoint { x: first, y: second, lambda: vec_of(&state.lambda) }
}

pub fn state_of(point: &GroupedPoint, grouping: Grouping, n: usize) -> Result<LvggmsState> {
    let blocks: Vec<&DVector<f64>> = point.x.iter().chain(point.y.iter()).collect();
    let expected = match grouping {
        Grouping::VariantI => (2, 1),
        Grouping::VariantII => (1, 2),
    };
    if (point.x.len(), point.y.len()) != expected || blocks.iter().any(|b| b.len() != n * n) || point.lambda.len() != n * n {
        return Err(Error::Dimension(format!("point does not match grouping {grouping:?} with n = {n}")));
    }
    Ok(LvggmsState {
        x: mat_of(blocks[0], n),
        s: mat_of(blocks[1], n),
        l: mat_of(blocks[2], n),
        lambda: mat_of(&point.lambda, n),
    })
}

/// `X` positive definite and `L` positive semidefinite within [`PSD_TOL`].
pub fn check_state(state: &LvggmsState) -> Result<()> {
    if state.x.clone().cholesky().is_none() {
        return Err(Error::Domain("X iterate is not positive definite".into()));
    }
    let lo = sym_eig(&state.l)?.values.min();
    if lo < -PSD_TOL * state.l.amax().max(1.0) {
        return Err(Error::Domain(format!("L iterate is not positive semidefinite (λ_min = {lo:e})")));
    }
    Ok(())
}

/// IER: largest entrywise change of `(X, S, L)`; CER: `‖X − S + L‖_F`;
/// OER: `|F − F*| / |F*|` when `F*` is given.
pub fn error_metrics(prev: &LvggmsState, cur: &LvggmsState, instance: &LvggmsInstance, f_star: Option<f64>) -> Result<Metrics> {
    let ier = [(&prev.x, &cur.x), (&prev.s, &cur.s), (&prev.l, &cur.l)]
        .iter()
        .map(|(a, b)| (*a - *b).amax())
        .fold(0.0, f64::max);
    let cer = (&cur.x - &cur.s + &cur.l).norm();
    let oer = match f_star {
        Some(f) => Some((objective(instance, cur)? - f).abs() / f.abs()),
        None => None,
    };
    Ok(Metrics { ier, cer, oer })
}

/// Special case implied by a zero proximal weight: (a) for grouping I with
/// `σ₂ = 0`, (b) for grouping II with `σ₁ = 0`.
pub fn implied_special_case(grouping: Grouping, params: &StepsizeParams) -> SpecialCase {
    match grouping {
        Grouping::VariantI if params.sigma2 == 0.0 => SpecialCase::A,
        Grouping::VariantII if params.sigma1 == 0.0 => SpecialCase::B,
        _ => SpecialCase::None,
    }
}

/// Proximal weights used when none are given: `(2, 3)` for the general
/// schemes, `(2, 0)` for case (a) and `(0, 3)` for case (b).
pub fn default_sigmas(special_case: SpecialCase) -> (f64, f64) {
    match special_case {
        SpecialCase::None => (2.0, 3.0),
        SpecialCase::A => (2.0, 0.0),
        SpecialCase::B => (0.0, 3.0),
    }
}

/// Runs the solver, checking `X ≻ 0` and `L ⪰ 0` after every step.
pub fn solve(instance: &LvggmsInstance, grouping: Grouping, config: &SolverConfig) -> Result<SolveOutput> {
    let (problem, start) = make_problem(instance, grouping)?;
    let n = instance.n;
    solve_with(&problem, start, config, |st: &IterationState| check_state(&state_of(&st.current, grouping, n)?))
}

/// Objective after exactly [`REFERENCE_ITERATIONS`] steps from the start point.
pub fn reference_objective(instance: &LvggmsInstance, grouping: Grouping, params: &StepsizeParams) -> Result<f64> {
    let (problem, start) = make_problem(instance, grouping)?;
    let mut config = SolverConfig::new(*params);
    config.special_case = implied_special_case(grouping, params);
    let report = crate::stepsize::validate_params(problem.p(), problem.q(), params, config.variant, config.special_case);
    if !report.ok {
        return Err(Error::Config(report.failures.join("; ")));
    }
    let mut state = IterationState::new(&problem, start)?;
    for _ in 0..REFERENCE_ITERATIONS {
        state = step(&problem, &state, &config)?;
    }
    objective(instance, &state_of(&state.current, grouping, instance.n)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct InstanceManifest {
    n: usize,
    nu: f64,
    mu: f64,
    seed: u64,
    #[serde(rename = "C_file")]
    c_file: String,
}

/// Writes `instance.json` and `C.csv` into `dir`; returns the manifest path.
pub fn save_instance(instance: &LvggmsInstance, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.display().to_string(), source })?;
    write_matrix(&dir.join("C.csv"), &instance.c)?;
    let manifest = InstanceManifest { n: instance.n, nu: instance.nu, mu: instance.mu, seed: instance.seed, c_file: "C.csv".into() };
    let path = dir.join("instance.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Parse { path: path.display().to_string(), msg: e.to_string() })?;
    std::fs::write(&path, text + "\n").map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    Ok(path)
}

pub fn load_instance(path: &Path) -> Result<LvggmsInstance> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    let m: InstanceManifest = serde_json::from_str(&text).map_err(|e| Error::Parse { path: path.display().to_string(), msg: e.to_string() })?;
    let c = read_matrix(&path.parent().unwrap_or(Path::new(".")).join(&m.c_file))?;
    if c.nrows() != m.n || c.ncols() != m.n {
        return Err(Error::Dimension(format!("C is {}x{}, manifest says n = {}", c.nrows(), c.ncols(), m.n)));
    }
    let instance = LvggmsInstance { c, nu: m.nu, mu: m.mu, n: m.n, seed: m.seed };
    check_instance(&instance)?;
    Ok(instance)
}
