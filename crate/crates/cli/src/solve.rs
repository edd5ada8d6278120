//! `solve` and `sweep`.

use std::fmt::Write as _;
use std::time::Instant;

use anyhow::Context;
use serde_json::{json, Value};

use gsadmm::{Execution, SolveOutput, SpecialCase, StepsizeParams, Termination};

use crate::args::{Axis, ProblemKind, SolveArgs, SweepArgs};
use crate::manifest::{RunManifest, Status};
use crate::setup::{self, Setup};
use crate::{CmdResult, Failure};

pub const BETA_GRID: [f64; 11] = [0.5, 0.2, 0.1, 0.08, 0.07, 0.06, 0.05, 0.03, 0.01, 0.006, 0.004];

pub const STEPSIZE_PAIRS: [(f64, f64); 36] = [
    (1.0, -0.8), (1.0, -0.6), (1.0, -0.4), (1.0, -0.2), (1.0, 0.0), (1.0, 0.2), (1.0, 0.4), (1.0, 0.6), (1.0, 0.8),
    (-0.8, 1.0), (-0.6, 1.0), (-0.4, 1.0), (-0.2, 1.0), (0.0, 1.0), (0.2, 1.0), (0.4, 1.0), (0.6, 1.0), (0.8, 1.0),
    (1.6, -0.3), (1.6, -0.6), (1.5, -0.8), (1.3, 0.3), (0.2, 0.5), (0.4, 0.9), (0.8, 1.17), (0.0, 1.618), (0.9, 1.09),
    (0.1, 0.1), (0.2, 0.2), (0.3, 0.3), (0.4, 0.4), (0.5, 0.5), (0.6, 0.6), (0.7, 0.7), (0.8, 0.8), (0.9, 0.9),
];

fn metrics_json(out: &SolveOutput) -> Value {
    match out.history.last() {
        Some(r) => json!({
            "ier": r.ier,
            "cer": r.cer,
            "oer": r.oer,
            "objective": r.objective,
            "termination": out.history.termination,
        }),
        None => json!({ "termination": out.history.termination }),
    }
}

pub fn cmd_solve(args: &SolveArgs, execution: Execution, manifest: &mut RunManifest) -> CmdResult {
    let setup = setup::load(&args.problem, ProblemKind::Lvggms, 100)?;
    manifest.instance = setup.descriptor();
    manifest.seed = setup.seed();
    let params = setup.params(&args.params);
    let case: SpecialCase = args.params.special_case.into();
    let variant = args.problem.order.into();
    let report = setup.validate(&params, variant, case);
    manifest.extra.insert("parameter_check".into(), serde_json::to_value(&report).map_err(anyhow::Error::from)?);
    manifest.config = json!({ "params": params, "variant": variant, "special_case": case });
    if !report.ok {
        return Err(Failure::usage(format!("parameters rejected: {}", report.failures.join("; "))));
    }
    let reference = setup.reference(args.stop.fstar, &params)?;
    let cfg = setup::config(params, &args.problem, case, &args.stop, reference, execution);
    manifest.config = serde_json::to_value(&cfg).map_err(anyhow::Error::from)?;

    let t0 = Instant::now();
    let out = setup.run(&cfg)?;
    manifest.solve_seconds = Some(t0.elapsed().as_secs_f64());
    manifest.iterations = Some(out.history.iterations());
    manifest.final_metrics = metrics_json(&out);

    let csv = manifest.output("history.csv");
    let sidecar = manifest.output("history.json");
    out.history.write(&csv, &sidecar, &cfg)?;
    let converged = out.history.termination == Termination::Converged;
    println!(
        "{} after {} iterations (solve {:.3}s)",
        if converged { "converged" } else { "reached max-iter" },
        out.history.iterations(),
        manifest.solve_seconds.unwrap_or_default()
    );
    Ok(if converged { Status::Converged } else { Status::MaxIter })
}

fn parse_list(text: &str, flag: &str) -> Result<Vec<f64>, Failure> {
    let items: Vec<&str> = text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(Failure::usage(format!("{flag} is empty")));
    }
    items
        .iter()
        .map(|s| s.parse::<f64>().map_err(|_| Failure::usage(format!("{flag}: {s:?} is not a number"))))
        .collect()
}

fn parse_pairs(text: &str) -> Result<Vec<(f64, f64)>, Failure> {
    let items: Vec<&str> = text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(Failure::usage("--pairs is empty"));
    }
    items
        .iter()
        .map(|item| {
            let (t, s) = item
                .split_once(':')
                .ok_or_else(|| Failure::usage(format!("--pairs: {item:?} is not tau:s")))?;
            let parse = |v: &str| v.trim().parse::<f64>().map_err(|_| Failure::usage(format!("--pairs: {item:?} is not tau:s")));
            Ok((parse(t)?, parse(s)?))
        })
        .collect()
}

fn settings(args: &SweepArgs, base: &StepsizeParams) -> Result<Vec<StepsizeParams>, Failure> {
    Ok(match args.axis {
        Axis::Beta => {
            if args.pairs.is_some() {
                return Err(Failure::usage("--pairs belongs to --axis steps"));
            }
            let betas = match &args.values {
                Some(v) => parse_list(v, "--values")?,
                None => BETA_GRID.to_vec(),
            };
            betas.into_iter().map(|beta| StepsizeParams { beta, ..*base }).collect()
        }
        Axis::Steps => {
            if args.values.is_some() {
                return Err(Failure::usage("--values belongs to --axis beta"));
            }
            let pairs = match &args.pairs {
                Some(p) => parse_pairs(p)?,
                None => STEPSIZE_PAIRS.to_vec(),
            };
            pairs.into_iter().map(|(tau, s)| StepsizeParams { tau, s, ..*base }).collect()
        }
    })
}

fn csv_field(text: &str) -> String {
    text.replace([',', '\n'], ";")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

pub fn cmd_sweep(args: &SweepArgs, execution: Execution, manifest: &mut RunManifest) -> CmdResult {
    let setup: Setup = setup::load(&args.problem, ProblemKind::Lvggms, 100)?;
    manifest.instance = setup.descriptor();
    manifest.seed = setup.seed();
    let base = setup.params(&args.params);
    let rows = settings(args, &base)?;
    let case: SpecialCase = args.params.special_case.into();
    let variant = args.problem.order.into();
    let reference = setup.reference(args.stop.fstar, &base)?;
    let template = setup::config(base, &args.problem, case, &args.stop, reference, execution);
    manifest.config = json!({ "axis": format!("{:?}", args.axis).to_lowercase(), "settings": rows.len(), "template": template });

    let mut table = String::from("index,beta,tau,s,valid,termination,iter,cer,ier,oer,note\n");
    let mut timing = String::from("index,cpu_seconds\n");
    let mut times = Vec::new();
    let mut total_solve = 0.0;
    for (i, params) in rows.iter().enumerate() {
        let prefix = format!("{i},{},{},{}", params.beta, params.tau, params.s);
        let report = setup.validate(params, variant, case);
        if !report.ok {
            let _ = writeln!(table, "{prefix},0,invalid,,,,,{}", csv_field(&report.failures.join("; ")));
            eprintln!("[{i}] invalid: {}", report.failures.join("; "));
            continue;
        }
        let cfg = gsadmm::SolverConfig { params: *params, ..template.clone() };
        let t0 = Instant::now();
        let result = setup.run(&cfg);
        let secs = t0.elapsed().as_secs_f64();
        total_solve += secs;
        let _ = writeln!(timing, "{i},{secs:.6}");
        times.push(secs);
        match result {
            Ok(out) => {
                let last = out.history.last();
                let term = match out.history.termination {
                    Termination::Converged => "converged",
                    Termination::MaxIter => "max_iter",
                };
                let _ = writeln!(
                    table,
                    "{prefix},1,{term},{},{},{},{},",
                    out.history.iterations(),
                    opt(last.map(|r| r.cer)),
                    opt(last.map(|r| r.ier)),
                    opt(last.and_then(|r| r.oer)),
                );
                eprintln!("[{i}] beta={} tau={} s={}: {term} in {} iterations", params.beta, params.tau, params.s, out.history.iterations());
            }
            Err(e) => {
                let _ = writeln!(table, "{prefix},1,error,,,,,{}", csv_field(&e.to_string()));
                eprintln!("[{i}] error: {e}");
            }
        }
    }
    let table_path = manifest.output("sweep.csv");
    std::fs::write(&table_path, &table).with_context(|| format!("writing {}", table_path.display()))?;
    let timing_path = manifest.output("sweep_timing.csv");
    std::fs::write(&timing_path, &timing).with_context(|| format!("writing {}", timing_path.display()))?;
    manifest.solve_seconds = Some(total_solve);
    manifest.extra.insert("cpu_seconds".into(), json!(times));
    manifest.extra.insert("reference_objective".into(), json!(reference));
    print!("{table}");
    Ok(Status::Ok)
}
