//! `region` and `generate`.

use serde_json::json;

use gsadmm::blockspace::make_quadratic_test_problem;
use gsadmm::lvggms::{self, GeneratorOptions};
use gsadmm::stepsize::{region_grid, write_region_csv};

use crate::args::{GenerateArgs, ProblemKind, RegionArgs};
use crate::manifest::{RunManifest, Status};
use crate::{CmdResult, Failure};

pub fn cmd_region(args: &RegionArgs, manifest: &mut RunManifest) -> CmdResult {
    manifest.config = json!({
        "tau_range": [args.tau_min, args.tau_max],
        "s_range": [args.s_min, args.s_max],
        "resolution": args.resolution,
    });
    let grid = region_grid((args.tau_min, args.tau_max), (args.s_min, args.s_max), args.resolution)?;
    let path = manifest.output("region.csv");
    let file = std::fs::File::create(&path)?;
    write_region_csv(&grid, std::io::BufWriter::new(file))?;
    let count = |f: fn(&gsadmm::stepsize::RegionSample) -> bool| grid.iter().filter(|r| f(r)).count();
    manifest.final_metrics = json!({
        "rows": grid.len(),
        "in_K": count(|r| r.in_k),
        "in_Kbar": count(|r| r.in_kbar),
        "in_G": count(|r| r.in_g),
    });
    println!("{} samples written to {}", grid.len(), path.display());
    Ok(Status::Ok)
}

pub fn cmd_generate(args: &GenerateArgs, manifest: &mut RunManifest) -> CmdResult {
    manifest.seed = Some(args.seed);
    match args.problem {
        ProblemKind::Lvggms => {
            let n = args.n.unwrap_or(100);
            if n < 2 {
                return Err(Failure::usage(format!("--n must be at least 2, got {n}")));
            }
            let opts = GeneratorOptions { density: args.density, sample_factor: args.sample_factor, nu: args.nu, mu: args.mu };
            manifest.config = json!({
                "problem": "lvggms",
                "n": n,
                "density": opts.density,
                "sample_factor": opts.sample_factor,
                "nu": opts.nu,
                "mu": opts.mu,
            });
            let instance = lvggms::generate_instance(n, args.seed, &opts)?;
            lvggms::check_instance(&instance)?;
            let path = lvggms::save_instance(&instance, manifest.dir())?;
            manifest.outputs.push(path.clone());
            manifest.outputs.push(manifest.dir().join("C.csv"));
            manifest.instance = json!({ "problem": "lvggms", "n": n, "seed": args.seed, "nu": opts.nu, "mu": opts.mu });
            println!("instance written to {}", path.display());
        }
        ProblemKind::Quad => {
            let n = args.n.unwrap_or(8);
            manifest.config = json!({ "problem": "quad", "p": args.p, "q": args.q, "n": n });
            let fx = make_quadratic_test_problem(args.p, args.q, n, args.seed)?;
            let path = gsadmm::io::save_problem(&fx.problem, manifest.dir())?;
            let solution = manifest.output("solution.csv");
            gsadmm::io::write_vector(&solution, &fx.w_star.flatten())?;
            manifest.outputs.push(path.clone());
            manifest.instance = json!({ "problem": "quad", "p": args.p, "q": args.q, "n": n, "seed": args.seed });
            println!("problem written to {}", path.display());
        }
        ProblemKind::File => return Err(Failure::usage("generate supports --problem lvggms or quad")),
    }
    Ok(Status::Ok)
}
