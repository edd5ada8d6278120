//! `certify`: record a trajectory and check it against the certificates.

use serde_json::json;

use gsadmm::certify::Certifier;
use gsadmm::engine::{step, IterationState};
use gsadmm::{solve, Execution, GroupedPoint, SolverConfig, SpecialCase, Variant};

use crate::args::{CertifyArgs, ProblemKind};
use crate::manifest::{RunManifest, Status};
use crate::setup::{self, Loaded};
use crate::{CmdResult, Failure};

pub fn cmd_certify(args: &CertifyArgs, execution: Execution, manifest: &mut RunManifest) -> CmdResult {
    let setup = setup::load(&args.problem, ProblemKind::Quad, 10)?;
    manifest.instance = setup.descriptor();
    manifest.seed = setup.seed();
    let params = setup.params(&args.params);
    let case: SpecialCase = args.params.special_case.into();
    let variant: Variant = args.problem.order.into();
    if args.steps == 0 {
        return Err(Failure::usage("--steps must be positive"));
    }

    let mut cfg = SolverConfig::new(params);
    cfg.variant = variant;
    cfg.special_case = case;
    cfg.max_iter = args.steps;
    cfg.tol_ier = f64::MIN_POSITIVE;
    cfg.tol_cer = f64::MIN_POSITIVE;
    cfg.record_certificates = true;
    cfg.execution = execution;
    manifest.config = json!({ "solver": cfg, "wstar_iters": args.wstar_iters, "corrupt_m": args.corrupt_m });

    let mut certifier = Certifier::new(&setup.problem, &params, variant, case)?;
    if args.corrupt_m {
        certifier.corrupt_m();
    }
    let w_star = match &setup.loaded {
        Loaded::Quad(fx) => fx.w_star.clone(),
        Loaded::Lvggms { .. } => long_run(&setup.problem, setup.start.clone(), &cfg, args.wstar_iters)?,
        Loaded::File { .. } => {
            return Err(Failure::usage("certify needs a known solution; use --problem quad or lvggms"));
        }
    };

    let t0 = std::time::Instant::now();
    let out = solve(&setup.problem, setup.start.clone(), &cfg)?;
    manifest.solve_seconds = Some(t0.elapsed().as_secs_f64());
    manifest.iterations = Some(out.history.iterations());
    let traj = out.trajectory.expect("trajectory recorded");
    let report = certifier.certify(&traj, &w_star)?;

    let path = manifest.output("certificate.json");
    let text = serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?;
    std::fs::write(&path, text + "\n")?;
    let first = report.first_violation();
    manifest.final_metrics = json!({
        "ok": report.ok,
        "steps": traj.predicted.len(),
        "h_min_eigenvalue": report.h_min_eigenvalue,
        "first_violation": first.map(|(check, k)| json!({ "check": check, "step": k })),
    });
    match first {
        None if report.ok => {
            println!("certificates hold on {} steps", traj.predicted.len());
            Ok(Status::Ok)
        }
        None => {
            eprintln!("certificate check failed before any step (H not positive definite or xi invalid)");
            Ok(Status::CertificateViolation)
        }
        Some((check, k)) => {
            eprintln!("certificate violation: {check} at step {k}; see {}", path.display());
            Ok(Status::CertificateViolation)
        }
    }
}

/// Approximate solution from a fixed number of steps.
fn long_run(problem: &gsadmm::SeparableProblem, start: GroupedPoint, cfg: &SolverConfig, steps: usize) -> Result<GroupedPoint, Failure> {
    let mut state = IterationState::new(problem, start)?;
    for _ in 0..steps {
        state = step(problem, &state, cfg)?;
    }
    Ok(state.current)
}
