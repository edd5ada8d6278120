//! Turns problem and parameter flags into a solver input.

use std::path::PathBuf;

use serde_json::{json, Value};

use gsadmm::blockspace::{make_quadratic_test_problem, objective_value, QuadraticFixture};
use gsadmm::lvggms::{self, GeneratorOptions, Grouping, LvggmsInstance};
use gsadmm::stepsize::{validate_params, ParamReport};
use gsadmm::{
    solve, Execution, GroupedPoint, SeparableProblem, SolveOutput, SolverConfig, SpecialCase, StepsizeParams, Variant,
};

use crate::args::{FStar, ParamArgs, ProblemArgs, ProblemKind, StopArgs};
use crate::Failure;

pub enum Loaded {
    Lvggms { instance: LvggmsInstance, grouping: Grouping, source: Option<PathBuf> },
    Quad(QuadraticFixture),
    File { problem: SeparableProblem, path: PathBuf },
}

pub struct Setup {
    pub loaded: Loaded,
    pub problem: SeparableProblem,
    pub start: GroupedPoint,
}

pub fn load(args: &ProblemArgs, default_kind: ProblemKind, default_lvggms_n: usize) -> Result<Setup, Failure> {
    let kind = args.problem.unwrap_or(default_kind);
    let loaded = match kind {
        ProblemKind::Lvggms => {
            let grouping = args.variant.into();
            match &args.file {
                Some(path) => Loaded::Lvggms { instance: lvggms::load_instance(path)?, grouping, source: Some(path.clone()) },
                None => {
                    let n = args.n.unwrap_or(default_lvggms_n);
                    if n < 2 {
                        return Err(Failure::usage(format!("--n must be at least 2 for LVGGMS, got {n}")));
                    }
                    let instance = lvggms::generate_instance(n, args.seed, &GeneratorOptions::default())?;
                    Loaded::Lvggms { instance, grouping, source: None }
                }
            }
        }
        ProblemKind::Quad => {
            let n = args.n.unwrap_or(8);
            Loaded::Quad(make_quadratic_test_problem(args.p, args.q, n, args.seed)?)
        }
        ProblemKind::File => {
            let path = args.file.clone().ok_or_else(|| Failure::usage("--problem file needs --file PATH"))?;
            Loaded::File { problem: gsadmm::io::load_problem(&path)?, path }
        }
    };
    let (problem, start) = match &loaded {
        Loaded::Lvggms { instance, grouping, .. } => lvggms::make_problem(instance, *grouping)?,
        Loaded::Quad(fx) => (fx.problem.clone(), GroupedPoint::zeros(&fx.problem)),
        Loaded::File { problem, .. } => (problem.clone(), GroupedPoint::zeros(problem)),
    };
    Ok(Setup { loaded, problem, start })
}

impl Setup {
    pub fn descriptor(&self) -> Value {
        match &self.loaded {
            Loaded::Lvggms { instance, grouping, source } => json!({
                "problem": "lvggms",
                "n": instance.n,
                "seed": instance.seed,
                "nu": instance.nu,
                "mu": instance.mu,
                "grouping": grouping,
                "source": source.as_ref().map(|p| p.display().to_string()),
            }),
            Loaded::Quad(fx) => json!({
                "problem": "quad",
                "p": fx.problem.p(),
                "q": fx.problem.q(),
                "n": fx.problem.n(),
                "seed": fx.seed,
            }),
            Loaded::File { problem, path } => json!({
                "problem": "file",
                "path": path.display().to_string(),
                "p": problem.p(),
                "q": problem.q(),
                "n": problem.n(),
            }),
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match &self.loaded {
            Loaded::Lvggms { instance, .. } => Some(instance.seed),
            Loaded::Quad(fx) => Some(fx.seed),
            Loaded::File { .. } => None,
        }
    }

    fn is_lvggms(&self) -> bool {
        matches!(self.loaded, Loaded::Lvggms { .. })
    }

    /// Flags resolved against problem-dependent defaults.
    pub fn params(&self, args: &ParamArgs) -> StepsizeParams {
        let case: SpecialCase = args.special_case.into();
        let (d1, d2) = if self.is_lvggms() {
            lvggms::default_sigmas(case)
        } else {
            let (p, q) = (self.problem.p() as f64, self.problem.q() as f64);
            match case {
                SpecialCase::None => (p, q),
                SpecialCase::A => (p, 0.0),
                SpecialCase::B => (0.0, q),
            }
        };
        let beta = args.beta.unwrap_or(if self.is_lvggms() { 0.06 } else { 1.0 });
        StepsizeParams { tau: args.tau, s: args.s, sigma1: args.sigma1.unwrap_or(d1), sigma2: args.sigma2.unwrap_or(d2), beta }
    }

    pub fn validate(&self, params: &StepsizeParams, variant: Variant, case: SpecialCase) -> ParamReport {
        validate_params(self.problem.p(), self.problem.q(), params, variant, case)
    }

    /// Reference objective for OER, computed once per instance.
    pub fn reference(&self, mode: FStar, params: &StepsizeParams) -> Result<Option<f64>, Failure> {
        match (mode, &self.loaded) {
            (FStar::None, _) => Ok(None),
            (FStar::Value(v), _) => {
                if !v.is_finite() || v == 0.0 {
                    return Err(Failure::usage(format!("--fstar must be finite and nonzero, got {v}")));
                }
                Ok(Some(v))
            }
            (FStar::Auto, Loaded::Lvggms { instance, grouping, .. }) => {
                Ok(Some(lvggms::reference_objective(instance, *grouping, params)?))
            }
            (FStar::Auto, Loaded::Quad(fx)) => Ok(Some(objective_value(&fx.problem, &fx.w_star)?)),
            (FStar::Auto, Loaded::File { .. }) => {
                Err(Failure::usage("--fstar auto is not available for file problems; pass a value"))
            }
        }
    }

    pub fn run(&self, config: &SolverConfig) -> gsadmm::Result<SolveOutput> {
        match &self.loaded {
            Loaded::Lvggms { instance, grouping, .. } => lvggms::solve(instance, *grouping, config),
            _ => solve(&self.problem, self.start.clone(), config),
        }
    }
}

pub fn config(
    params: StepsizeParams,
    problem: &ProblemArgs,
    case: SpecialCase,
    stop: &StopArgs,
    reference: Option<f64>,
    execution: Execution,
) -> SolverConfig {
    let mut cfg = SolverConfig::new(params);
    cfg.variant = problem.order.into();
    cfg.special_case = case;
    cfg.max_iter = stop.max_iter;
    cfg.tol_ier = stop.tol;
    cfg.tol_cer = stop.tol_cer;
    cfg.reference_objective = reference;
    cfg.tol_oer = reference.map(|_| stop.tol_oer);
    cfg.execution = execution;
    cfg
}
