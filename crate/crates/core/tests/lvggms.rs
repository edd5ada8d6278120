use gsadmm::engine::{step, IterationState};
use gsadmm::lvggms::{self, GeneratorOptions, Grouping};
use gsadmm::{SolverConfig, StepsizeParams};

fn desk_params() -> StepsizeParams {
    StepsizeParams { tau: 0.8, s: 1.17, sigma1: 2.0, sigma2: 3.0, beta: 0.06 }
}

#[test]
fn reference_objective_matches_long_run() {
    let inst = lvggms::generate_instance(10, 3, &GeneratorOptions::default()).unwrap();
    let f_star = lvggms::reference_objective(&inst, Grouping::VariantI, &desk_params()).unwrap();
    let (problem, start) = lvggms::make_problem(&inst, Grouping::VariantI).unwrap();
    let cfg = SolverConfig::new(desk_params());
    let mut st = IterationState::new(&problem, start).unwrap();
    for _ in 0..5000 {
        st = step(&problem, &st, &cfg).unwrap();
    }
    let long = lvggms::objective(&inst, &lvggms::state_of(&st.current, Grouping::VariantI, 10).unwrap()).unwrap();
    assert!((f_star - long).abs() / f_star.abs() <= 1e-6, "{f_star} vs {long}");
}

#[test]
fn reference_objective_below_start_on_fixed_seeds() {
    for seed in 0..3 {
        let inst = lvggms::generate_instance(15, seed, &GeneratorOptions::default()).unwrap();
        let f_star = lvggms::reference_objective(&inst, Grouping::VariantI, &desk_params()).unwrap();
        let f0 = lvggms::objective(&inst, &lvggms::start_state(15)).unwrap();
        assert!(f_star <= f0, "seed {seed}: {f_star} > {f0}");
    }
}

#[test]
fn groupings_reach_same_objective() {
    let inst = lvggms::generate_instance(8, 1, &GeneratorOptions::default()).unwrap();
    let mut values = Vec::new();
    for grouping in [Grouping::VariantI, Grouping::VariantII] {
        let mut cfg = SolverConfig::new(desk_params());
        cfg.max_iter = 5000;
        cfg.tol_ier = 1e-10;
        cfg.tol_cer = 1e-9;
        let out = lvggms::solve(&inst, grouping, &cfg).unwrap();
        let st = lvggms::state_of(&out.point, grouping, 8).unwrap();
        values.push(lvggms::objective(&inst, &st).unwrap());
    }
    assert!((values[0] - values[1]).abs() <= 1e-7 * values[0].abs(), "{values:?}");
}

#[test]
fn large_instance_is_valid() {
    let inst = lvggms::generate_instance(100, 0, &GeneratorOptions::default()).unwrap();
    lvggms::check_instance(&inst).unwrap();
}
