//! The grouped iteration: Jacobi block solves inside a group, Gauss-Seidel
//! between the groups, and two dual updates per sweep.
//!
//! Every block subproblem is handed to its oracle in the normalized form
//! `argmin f(x) + (w/2)‖A x − v‖²` with `w = β(1+σ)` and
//! `v = A x^k + (λ/β − r)/(1+σ)`, where `r` is the residual at the point the
//! group reads from and `λ` the multiplier it sees.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::blockspace::{
    group_image, objective_value, penalty_terms, BlockSpec, GroupedPoint, SeparableProblem,
};
use crate::error::{Error, Group, Result};
use crate::exec::Execution;
use crate::stepsize::{validate_params, SpecialCase, StepsizeParams, Variant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub params: StepsizeParams,
    pub variant: Variant,
    pub special_case: SpecialCase,
    pub max_iter: usize,
    pub tol_ier: f64,
    pub tol_oer: Option<f64>,
    pub tol_cer: f64,
    pub reference_objective: Option<f64>,
    pub record_certificates: bool,
    pub execution: Execution,
}

impl SolverConfig {
    /// x-first order, no special case, 1000 iterations, `TOL = 1e-7`,
    /// CER threshold `1e-4`, no objective reference.
    pub fn new(params: StepsizeParams) -> Self {
        Self {
            params,
            variant: Variant::XFirst,
            special_case: SpecialCase::None,
            max_iter: 1000,
            tol_ier: 1e-7,
            tol_oer: None,
            tol_cer: 1e-4,
            reference_objective: None,
            record_certificates: false,
            execution: Execution::default(),
        }
    }

    fn check(&self, problem: &SeparableProblem) -> Result<()> {
        self.params.check_well_formed()?;
        for (name, v) in [("tol_ier", Some(self.tol_ier)), ("tol_cer", Some(self.tol_cer)), ("tol_oer", self.tol_oer)] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(Error::Config(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if let Some(f) = self.reference_objective {
            if !f.is_finite() || f == 0.0 {
                return Err(Error::Config(format!("reference objective must be finite and nonzero, got {f}")));
            }
        }
        let report = validate_params(problem.p(), problem.q(), &self.params, self.variant, self.special_case);
        if !report.ok {
            return Err(Error::Config(report.failures.join("; ")));
        }
        Ok(())
    }
}

/// The update order resolved into first/second group roles.
struct Orientation<'a> {
    first: Group,
    first_blocks: &'a [BlockSpec],
    second_blocks: &'a [BlockSpec],
    step1: f64,
    step2: f64,
    sigma_first: f64,
    sigma_second: f64,
}

impl<'a> Orientation<'a> {
    fn new(problem: &'a SeparableProblem, params: &StepsizeParams, variant: Variant) -> Self {
        match variant {
            Variant::XFirst => Self {
                first: Group::X,
                first_blocks: &problem.x_blocks,
                second_blocks: &problem.y_blocks,
                step1: params.tau,
                step2: params.s,
                sigma_first: params.sigma1,
                sigma_second: params.sigma2,
            },
            Variant::YFirst => Self {
                first: Group::Y,
                first_blocks: &problem.y_blocks,
                second_blocks: &problem.x_blocks,
                step1: params.s,
                step2: params.tau,
                sigma_first: params.sigma2,
                sigma_second: params.sigma1,
            },
        }
    }

    fn second(&self) -> Group {
        match self.first {
            Group::X => Group::Y,
            Group::Y => Group::X,
        }
    }
}

fn assemble(first: Group, first_vals: Vec<DVector<f64>>, second_vals: Vec<DVector<f64>>, lambda: DVector<f64>) -> GroupedPoint {
    match first {
        Group::X => GroupedPoint { x: first_vals, y: second_vals, lambda },
        Group::Y => GroupedPoint { x: second_vals, y: first_vals, lambda },
    }
}

/// `(img_first + img_second) − c`; the same expression is used for every
/// residual so x-first and y-first runs round identically.
fn combine_residual(img_first: &DVector<f64>, img_second: &DVector<f64>, c: &DVector<f64>) -> DVector<f64> {
    (img_first + img_second) - c
}

#[derive(Debug, Clone)]
pub struct IterationState {
    pub k: usize,
    /// `w^k`
    pub current: GroupedPoint,
    /// `w^{k−1}`; `None` before the first step.
    pub previous: Option<GroupedPoint>,
    /// `λ^{k−1/2}` of the step that produced `current`.
    pub half_dual: Option<DVector<f64>>,
    /// `w̃^{k−1}` of the step that produced `current`.
    pub predicted: Option<GroupedPoint>,
    /// Constraint residual at `current`.
    pub residual: DVector<f64>,
    /// Sum of `w̃^1 … w̃^{k−1}`.
    pub ergodic_sum: GroupedPoint,
    pub ergodic_count: usize,
}

impl IterationState {
    pub fn new(problem: &SeparableProblem, start: GroupedPoint) -> Result<Self> {
        start.check_dims(problem)?;
        let n = problem.n();
        let r = combine_residual(
            &group_image(&problem.x_blocks, &start.x, n),
            &group_image(&problem.y_blocks, &start.y, n),
            &problem.c,
        );
        Ok(Self {
            k: 0,
            ergodic_sum: start.zeros_like(),
            current: start,
            previous: None,
            half_dual: None,
            predicted: None,
            residual: r,
            ergodic_count: 0,
        })
    }

    /// `w_t`: mean of the predicted points `w̃^1 … w̃^t`.
    pub fn ergodic_average(&self) -> Option<GroupedPoint> {
        (self.ergodic_count > 0).then(|| self.ergodic_sum.scaled(1.0 / self.ergodic_count as f64))
    }
}

#[allow(clippy::too_many_arguments)]
fn solve_group(
    blocks: &[BlockSpec],
    group: Group,
    values: &[DVector<f64>],
    residual: &DVector<f64>,
    lambda: &DVector<f64>,
    beta: f64,
    sigma: f64,
    execution: Execution,
) -> Result<Vec<DVector<f64>>> {
    let shift = (lambda / beta - residual) / (1.0 + sigma);
    let weight = beta * (1.0 + sigma);
    let pairs: Vec<(&BlockSpec, &DVector<f64>)> = blocks.iter().zip(values).collect();
    execution
        .map(&pairs, |index, (block, xk)| {
            let mut anchor = shift.clone();
            block.map.apply_add(xk, &mut anchor);
            block.objective.prox_solve(&block.map, &anchor, weight).map_err(|e| Error::Oracle {
                group,
                index,
                source: Box::new(e),
            })
        })
        .into_iter()
        .collect()
}

/// One sweep from `state.current = w^k` to `w^{k+1}`.
///
/// Only well-formedness of the parameters is enforced here; region and
/// proximal-weight rules are checked by [`solve`].
pub fn step(problem: &SeparableProblem, state: &IterationState, config: &SolverConfig) -> Result<IterationState> {
    config.params.check_well_formed()?;
    state.current.check_dims(problem)?;
    let beta = config.params.beta;
    let o = Orientation::new(problem, &config.params, config.variant);
    let n = problem.n();
    let w = &state.current;
    let lambda = &w.lambda;

    let first_new = solve_group(
        o.first_blocks,
        o.first,
        w.group(o.first),
        &state.residual,
        lambda,
        beta,
        o.sigma_first,
        config.execution,
    )?;
    let img_first = group_image(o.first_blocks, &first_new, n);
    let img_second_old = group_image(o.second_blocks, w.group(o.second()), n);
    let r_mid = combine_residual(&img_first, &img_second_old, &problem.c);
    let half = lambda - &r_mid * (o.step1 * beta);
    let lambda_tilde = lambda - &r_mid * beta;

    let second_new = solve_group(
        o.second_blocks,
        o.second(),
        w.group(o.second()),
        &r_mid,
        &half,
        beta,
        o.sigma_second,
        config.execution,
    )?;
    let img_second = group_image(o.second_blocks, &second_new, n);
    let r_new = combine_residual(&img_first, &img_second, &problem.c);
    let lambda_new = &half - &r_new * (o.step2 * beta);

    let predicted = assemble(o.first, first_new.clone(), second_new.clone(), lambda_tilde);
    let next = assemble(o.first, first_new, second_new, lambda_new);

    let mut ergodic_sum = state.ergodic_sum.clone();
    let mut ergodic_count = state.ergodic_count;
    if state.k >= 1 {
        ergodic_sum.add_scaled(1.0, &predicted);
        ergodic_count += 1;
    }
    Ok(IterationState {
        k: state.k + 1,
        current: next,
        previous: Some(state.current.clone()),
        half_dual: Some(half),
        predicted: Some(predicted),
        residual: r_new,
        ergodic_sum,
        ergodic_count,
    })
}

/// `w̃^k = (x^{k+1}, y^{k+1}, λ̃^k)` recorded by the step that produced
/// `state`.
pub fn predicted_point(state: &IterationState) -> Result<GroupedPoint> {
    state
        .predicted
        .clone()
        .ok_or_else(|| Error::Argument("no step has been taken yet".into()))
}

/// `‖w^{k+1} − [w^k − M(w^k − w̃^k)]‖_∞` in the coordinates `M` was built
/// for (the group-swapped problem for y-first runs).
pub fn correction_identity_check(
    before: &IterationState,
    after: &IterationState,
    m: &DMatrix<f64>,
    variant: Variant,
) -> Result<f64> {
    let predicted = predicted_point(after)?;
    let wk = orient_point(&before.current, variant).flatten();
    let wt = orient_point(&predicted, variant).flatten();
    let wn = orient_point(&after.current, variant).flatten();
    if m.nrows() != wk.len() || m.ncols() != wk.len() {
        return Err(Error::Dimension(format!(
            "M is {}x{}, iterate has length {}",
            m.nrows(),
            m.ncols(),
            wk.len()
        )));
    }
    let corrected = &wk - m * (&wk - &wt);
    Ok((wn - corrected).amax())
}

/// The point in first-group/second-group order: unchanged for x-first,
/// groups exchanged for y-first.
pub fn orient_point(w: &GroupedPoint, variant: Variant) -> GroupedPoint {
    match variant {
        Variant::XFirst => w.clone(),
        Variant::YFirst => GroupedPoint { x: w.y.clone(), y: w.x.clone(), lambda: w.lambda.clone() },
    }
}

/// The problem with groups exchanged for y-first runs.
pub fn orient_problem(problem: &SeparableProblem, variant: Variant) -> SeparableProblem {
    match variant {
        Variant::XFirst => problem.clone(),
        Variant::YFirst => SeparableProblem {
            x_blocks: problem.y_blocks.clone(),
            y_blocks: problem.x_blocks.clone(),
            c: problem.c.clone(),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    #[serde(rename = "IER_OER_CER_met")]
    Converged,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistoryRow {
    pub k: usize,
    pub cer: f64,
    pub ier: f64,
    pub oer: Option<f64>,
    pub objective: f64,
    pub lagrangian: f64,
    pub lyapunov: Option<f64>,
    pub ergodic_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceHistory {
    pub rows: Vec<HistoryRow>,
    pub termination: Termination,
}

impl ConvergenceHistory {
    pub fn iterations(&self) -> usize {
        self.rows.last().map_or(0, |r| r.k)
    }

    pub fn last(&self) -> Option<&HistoryRow> {
        self.rows.last()
    }

    pub fn to_csv(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map(|x| format!("{x:e}")).unwrap_or_default()
        }
        let mut out = String::from("k,cer,ier,oer,objective,lagrangian,lyapunov,ergodic_gap\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{},{:e},{:e},{},{}",
                r.k,
                r.cer,
                r.ier,
                opt(r.oer),
                r.objective,
                r.lagrangian,
                opt(r.lyapunov),
                opt(r.ergodic_gap)
            );
        }
        out
    }

    /// Writes `history.csv` and a JSON sidecar with termination and config.
    pub fn write(&self, csv_path: &Path, sidecar_path: &Path, config: &SolverConfig) -> Result<()> {
        let io_err = |path: &Path| {
            let path = path.display().to_string();
            move |source| Error::Io { path, source }
        };
        std::fs::File::create(csv_path)
            .and_then(|mut f| f.write_all(self.to_csv().as_bytes()))
            .map_err(io_err(csv_path))?;
        let sidecar = serde_json::json!({
            "termination": self.termination,
            "iterations": self.iterations(),
            "config": config,
        });
        let text = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Parse {
            path: sidecar_path.display().to_string(),
            msg: e.to_string(),
        })?;
        std::fs::write(sidecar_path, text + "\n").map_err(io_err(sidecar_path))
    }
}

/// Iterates and predicted points of a run, in problem coordinates.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    /// `w^0 … w^K`
    pub points: Vec<GroupedPoint>,
    /// `w̃^0 … w̃^{K−1}`
    pub predicted: Vec<GroupedPoint>,
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub point: GroupedPoint,
    pub history: ConvergenceHistory,
    /// `w_t` over the predicted points `w̃^1 … w̃^t`.
    pub ergodic: Option<GroupedPoint>,
    /// Recorded when `record_certificates` is set.
    pub trajectory: Option<Trajectory>,
}

/// Runs until `IER ≤ TOL`, `CER ≤ tol_cer` and, with a reference objective and
/// `tol_oer`, `OER ≤ Tol`; or until `max_iter` sweeps.
pub fn solve(problem: &SeparableProblem, start: GroupedPoint, config: &SolverConfig) -> Result<SolveOutput> {
    solve_with(problem, start, config, |_| Ok(()))
}

/// [`solve`] with `inspect` called on every new iterate; an error aborts the run.
pub fn solve_with<F>(problem: &SeparableProblem, start: GroupedPoint, config: &SolverConfig, mut inspect: F) -> Result<SolveOutput>
where
    F: FnMut(&IterationState) -> Result<()>,
{
    config.check(problem)?;
    let mut state = IterationState::new(problem, start)?;
    let mut rows = Vec::new();
    let mut trajectory = config.record_certificates.then(|| Trajectory {
        points: vec![state.current.clone()],
        predicted: Vec::new(),
    });
    let mut termination = Termination::MaxIter;
    while state.k < config.max_iter {
        let next = step(problem, &state, config)?;
        inspect(&next)?;
        let ier = next.current.primal_max_abs_diff(&state.current);
        let cer = next.residual.norm();
        let objective = objective_value(problem, &next.current)?;
        let lagrangian = objective + penalty_terms(&next.current.lambda, &next.residual, config.params.beta);
        let oer = config.reference_objective.map(|f| (objective - f).abs() / f.abs());
        rows.push(HistoryRow {
            k: next.k,
            cer,
            ier,
            oer,
            objective,
            lagrangian,
            lyapunov: None,
            ergodic_gap: None,
        });
        if let Some(t) = trajectory.as_mut() {
            t.points.push(next.current.clone());
            t.predicted.push(next.predicted.clone().expect("step records prediction"));
        }
        state = next;
        let oer_ok = match (oer, config.tol_oer) {
            (Some(e), Some(tol)) => e <= tol,
            _ => true,
        };
        if ier <= config.tol_ier && cer <= config.tol_cer && oer_ok {
            termination = Termination::Converged;
            break;
        }
    }
    Ok(SolveOutput {
        ergodic: state.ergodic_average(),
        point: state.current,
        history: ConvergenceHistory { rows, termination },
        trajectory,
    })
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::blockspace::make_quadratic_test_problem;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn serial_and_parallel_agree_bitwise(seed in 0u64..500, p in 1usize..4, q in 1usize..4, beta in 0.1f64..3.0) {
            let fx = make_quadratic_test_problem(p, q, 10, seed).unwrap();
            let mut cfg = SolverConfig::new(StepsizeParams { tau: 0.9, s: 1.09, sigma1: p as f64, sigma2: q as f64, beta });
            cfg.max_iter = 40;
            cfg.execution = Execution::Serial;
            let a = solve(&fx.problem, GroupedPoint::zeros(&fx.problem), &cfg).unwrap();
            cfg.execution = Execution::Parallel;
            let b = solve(&fx.problem, GroupedPoint::zeros(&fx.problem), &cfg).unwrap();
            prop_assert_eq!(a.history.to_csv(), b.history.to_csv());
            prop_assert_eq!(a.point, b.point);
        }

        #[test]
        fn saddle_point_is_fixed(seed in 0u64..500, tau in 0.0f64..1.0, s in 0.1f64..1.0) {
            let fx = make_quadratic_test_problem(2, 1, 6, seed).unwrap();
            let cfg = SolverConfig::new(StepsizeParams { tau, s, sigma1: 1.5, sigma2: 0.5, beta: 1.0 });
            let st = IterationState::new(&fx.problem, fx.w_star.clone()).unwrap();
            let next = step(&fx.problem, &st, &cfg).unwrap();
            let scale = 1.0 + fx.w_star.flatten().amax();
            prop_assert!((next.current.flatten() - fx.w_star.flatten()).amax() <= 1e-11 * scale);
        }
    }
}
