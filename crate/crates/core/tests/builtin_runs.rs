use newton_anderson::{make_bratu_1d, make_chandrasekhar, solve, NonlinearProblem, SolverConfig};

#[test]
fn chandrasekhar_half_newton_is_quadratic() {
    let p = make_chandrasekhar(0.5, 100).unwrap();
    let rep = solve(&p, &p.default_initial(), &SolverConfig::newton()).unwrap();
    assert!(rep.converged());
    assert!(rep.q_term.unwrap() >= 1.8, "{:?}", rep.q_term);
}

#[test]
fn chandrasekhar_critical_newton_halves() {
    let p = make_chandrasekhar(1.0, 100).unwrap();
    let rep = solve(&p, &p.default_initial(), &SolverConfig::newton()).unwrap();
    assert!(rep.converged());
    let s = rep.step_norms();
    let ratio = s[s.len() - 1] / s[s.len() - 2];
    assert!((ratio - 0.5).abs() < 0.05, "ratio {ratio}");
    assert!(rep.q_term.unwrap() < 1.3);
}

#[test]
fn bratu_far_from_fold_newton_is_quadratic() {
    let p = make_bratu_1d(1.0, 100).unwrap();
    let rep = solve(&p, &p.default_initial(), &SolverConfig::newton()).unwrap();
    assert!(rep.converged());
    assert!(rep.q_term.unwrap() >= 1.8, "{:?}", rep.q_term);
}

#[test]
fn adaptive_r_vanishes_on_nonsingular_problem() {
    let p = make_chandrasekhar(0.5, 100).unwrap();
    let rep = solve(&p, &p.default_initial(), &SolverConfig::agna(0.5)).unwrap();
    assert!(rep.converged());
    let h = &rep.r_history;
    assert!(h.len() >= 3);
    assert!(h[h.len() - 3..].windows(2).all(|w| w[1] < w[0]), "{h:?}");
    assert!(rep.q_term.unwrap() >= 1.7);
}

#[test]
fn terminal_step_is_not_applied() {
    let p = make_bratu_1d(1.0, 50).unwrap();
    let rep = solve(&p, &p.default_initial(), &SolverConfig::agna(0.5)).unwrap();
    let t = rep.terminal.expect("converged run has a terminal step");
    assert_eq!(t.k, rep.iterations);
    assert_eq!(rep.step_norms().len(), rep.iterations + 1);
    assert_eq!(rep.iterates().len(), rep.iterations + 1);
    // final_x is the last applied iterate, whose residual met the tolerance
    let r = newton_anderson::linalg::norm2(&p.residual(&rep.final_x));
    assert!(r <= 1e-10);
}
