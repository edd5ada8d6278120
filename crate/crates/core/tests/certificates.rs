use gsadmm::blockspace::make_quadratic_test_problem;
use gsadmm::certify::{build_analysis, Certifier};
use gsadmm::engine::{step, IterationState, Trajectory};
use gsadmm::{Error, GroupedPoint, SolverConfig, SpecialCase, StepsizeParams, Variant};

fn trajectory(problem: &gsadmm::SeparableProblem, params: StepsizeParams, variant: Variant, steps: usize) -> Trajectory {
    let mut cfg = SolverConfig::new(params);
    cfg.variant = variant;
    let mut st = IterationState::new(problem, GroupedPoint::zeros(problem)).unwrap();
    let mut traj = Trajectory { points: vec![st.current.clone()], predicted: vec![] };
    for _ in 0..steps {
        st = step(problem, &st, &cfg).unwrap();
        traj.points.push(st.current.clone());
        traj.predicted.push(st.predicted.clone().unwrap());
    }
    traj
}

#[test]
fn wrong_reference_point_breaks_contraction() {
    let fx = make_quadratic_test_problem(2, 2, 8, 3).unwrap();
    let params = StepsizeParams { tau: 0.9, s: 1.09, sigma1: 2.0, sigma2: 2.0, beta: 1.0 };
    let traj = trajectory(&fx.problem, params, Variant::XFirst, 100);
    let cert = Certifier::new(&fx.problem, &params, Variant::XFirst, SpecialCase::None).unwrap();
    assert!(cert.certify(&traj, &fx.w_star).unwrap().ok);
    let mut wrong = fx.w_star.clone();
    wrong.lambda[0] += 0.5;
    let report = cert.certify(&traj, &wrong).unwrap();
    assert!(!report.contraction.ok());
}

#[test]
fn divergent_stepsizes_fail_the_lyapunov_check() {
    // (1.5, 1.5) lies outside G; the proven matrices are built for an
    // in-region pair and then applied to the divergent trajectory.
    let fx = make_quadratic_test_problem(1, 1, 4, 8).unwrap();
    let bad = StepsizeParams { tau: 1.5, s: 1.5, sigma1: 0.5, sigma2: 0.5, beta: 1.0 };
    let traj = trajectory(&fx.problem, bad, Variant::XFirst, 60);
    let good = StepsizeParams { tau: 0.9, s: 1.09, ..bad };
    let cert = Certifier::new(&fx.problem, &good, Variant::XFirst, SpecialCase::None).unwrap();
    let report = cert.certify(&traj, &fx.w_star).unwrap();
    assert!(!report.ok);
    assert!(!report.correction.ok());
}

#[test]
fn certifier_requires_proven_region() {
    let fx = make_quadratic_test_problem(1, 1, 3, 0).unwrap();
    let kbar_only = StepsizeParams { tau: 1.17, s: 0.8, sigma1: 0.5, sigma2: 0.5, beta: 1.0 };
    let e = Certifier::new(&fx.problem, &kbar_only, Variant::XFirst, SpecialCase::None).unwrap_err();
    assert!(matches!(e, Error::Config(_)));
    // the same pair is proven for the y-first order
    assert!(Certifier::new(&fx.problem, &kbar_only, Variant::YFirst, SpecialCase::None).is_ok());
    let boundary = StepsizeParams { tau: 1.0, s: 0.5, sigma1: 0.0, sigma2: 0.0, beta: 1.0 };
    assert!(Certifier::new(&fx.problem, &boundary, Variant::XFirst, SpecialCase::A).is_err());
}

#[test]
fn y_first_certificates_hold() {
    let fx = make_quadratic_test_problem(3, 2, 12, 5).unwrap();
    let params = StepsizeParams { tau: 1.09, s: 0.9, sigma1: 2.5, sigma2: 1.5, beta: 0.7 };
    let traj = trajectory(&fx.problem, params, Variant::YFirst, 250);
    let cert = Certifier::new(&fx.problem, &params, Variant::YFirst, SpecialCase::None).unwrap();
    let report = cert.certify(&traj, &fx.w_star).unwrap();
    assert!(report.ok, "{:?}", report.first_violation());
    let json = serde_json::to_value(&report).unwrap();
    assert_eq!(json["contraction"]["violations"], 0);
}

#[test]
fn singular_correction_matrix() {
    let fx = make_quadratic_test_problem(1, 1, 3, 0).unwrap();
    let p = StepsizeParams { tau: 0.3, s: -0.3, sigma1: 1.0, sigma2: 1.0, beta: 1.0 };
    assert!(matches!(build_analysis(&fx.problem, &p, SpecialCase::None), Err(Error::SingularM(_))));
}
