use gsadmm::blockspace::{make_quadratic_test_problem, residual};
use gsadmm::io::{load_problem, save_problem};
use gsadmm::{solve, GroupedPoint, SolverConfig, SpecialCase, StepsizeParams, Termination, Variant};

fn params(tau: f64, s: f64, sigma1: f64, sigma2: f64) -> StepsizeParams {
    StepsizeParams { tau, s, sigma1, sigma2, beta: 1.0 }
}

#[test]
fn converges_to_kkt_point_in_every_order() {
    for (variant, tau, s) in [(Variant::XFirst, 0.8, 1.17), (Variant::YFirst, 1.17, 0.8)] {
        let fx = make_quadratic_test_problem(3, 2, 14, 21).unwrap();
        let mut cfg = SolverConfig::new(params(tau, s, 2.5, 1.5));
        cfg.variant = variant;
        cfg.max_iter = 3000;
        cfg.tol_ier = 1e-11;
        cfg.tol_cer = 1e-10;
        let out = solve(&fx.problem, GroupedPoint::zeros(&fx.problem), &cfg).unwrap();
        assert_eq!(out.history.termination, Termination::Converged, "{variant:?}");
        let err = (out.point.flatten() - fx.w_star.flatten()).amax();
        assert!(err < 1e-8, "{variant:?}: {err:e}");
    }
}

#[test]
fn special_cases_converge() {
    let fx = make_quadratic_test_problem(3, 1, 10, 2).unwrap();
    let mut cfg = SolverConfig::new(params(0.9, 1.09, 2.2, 0.0));
    cfg.special_case = SpecialCase::A;
    cfg.max_iter = 3000;
    cfg.tol_ier = 1e-10;
    let out = solve(&fx.problem, GroupedPoint::zeros(&fx.problem), &cfg).unwrap();
    assert_eq!(out.history.termination, Termination::Converged);

    let fx = make_quadratic_test_problem(1, 3, 10, 2).unwrap();
    let mut cfg = SolverConfig::new(params(0.9, 1.09, 0.0, 2.2));
    cfg.special_case = SpecialCase::B;
    cfg.max_iter = 3000;
    cfg.tol_ier = 1e-10;
    let out = solve(&fx.problem, GroupedPoint::zeros(&fx.problem), &cfg).unwrap();
    assert_eq!(out.history.termination, Termination::Converged);
}

#[test]
fn ergodic_average_approaches_solution() {
    let fx = make_quadratic_test_problem(2, 2, 8, 4).unwrap();
    let mut cfg = SolverConfig::new(params(0.5, 0.5, 1.5, 1.5));
    cfg.max_iter = 2000;
    cfg.tol_ier = 1e-12;
    cfg.tol_cer = 1e-12;
    let out = solve(&fx.problem, GroupedPoint::zeros(&fx.problem), &cfg).unwrap();
    let avg = out.ergodic.unwrap();
    let r = residual(&fx.problem, &avg).unwrap();
    assert!(r.norm() < 1e-2);
}

#[test]
fn history_files_written() {
    let dir = tempfile::tempdir().unwrap();
    let fx = make_quadratic_test_problem(1, 1, 3, 0).unwrap();
    let mut cfg = SolverConfig::new(params(0.9, 1.09, 0.5, 0.5));
    cfg.max_iter = 5;
    let out = solve(&fx.problem, GroupedPoint::zeros(&fx.problem), &cfg).unwrap();
    let (csv, side) = (dir.path().join("h.csv"), dir.path().join("h.json"));
    out.history.write(&csv, &side, &cfg).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 6);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&side).unwrap()).unwrap();
    assert_eq!(meta["termination"], "MaxIter");
    assert_eq!(meta["iterations"], 5);
}

#[test]
fn saved_problem_reproduces_history() {
    let dir = tempfile::tempdir().unwrap();
    let fx = make_quadratic_test_problem(2, 1, 6, 9).unwrap();
    let path = save_problem(&fx.problem, dir.path()).unwrap();
    let loaded = load_problem(&path).unwrap();
    let mut cfg = SolverConfig::new(params(0.8, 1.17, 1.5, 0.5));
    cfg.max_iter = 50;
    let a = solve(&fx.problem, GroupedPoint::zeros(&fx.problem), &cfg).unwrap();
    let b = solve(&loaded, GroupedPoint::zeros(&loaded), &cfg).unwrap();
    assert_eq!(a.history.to_csv(), b.history.to_csv());
}
