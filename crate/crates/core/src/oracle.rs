//! Brute-force reference computations used to check the solver's fast
//! paths. Nothing here calls into the safeguard or mixing code it checks.

pub use crate::problem::check_jacobian;

use crate::problem::{make_bratu_1d, NonlinearProblem};
use crate::solver::{solve, SolverConfig};

/// Grid minimizer of `‖w_next − γ (w_next − w_prev)‖` over
/// `γ ∈ {lo, lo + step, …} ∩ [lo, hi]`.
///
/// Ties go to the grid point of smallest `|γ|`.
pub fn gamma_grid_oracle(w_next: &[f64], w_prev: &[f64], lo: f64, hi: f64, step: f64) -> f64 {
    assert!(lo < hi && step > 0.0, "invalid grid");
    // ‖a − γd‖² = ‖a‖² − 2γ a·d + γ² ‖d‖²
    let (mut aa, mut ad, mut dd) = (0.0, 0.0, 0.0);
    for (a, b) in w_next.iter().zip(w_prev) {
        let d = a - b;
        aa += a * a;
        ad += a * d;
        dd += d * d;
    }
    let points = ((hi - lo) / step).floor() as usize;
    let mut best_g = lo;
    let mut best_v = f64::INFINITY;
    for i in 0..=points {
        let g = lo + i as f64 * step;
        let v = aa - 2.0 * g * ad + g * g * dd;
        if v < best_v || (v == best_v && g.abs() < best_g.abs()) {
            best_v = v;
            best_g = g;
        }
    }
    best_g
}

/// `λ` from a literal walk through the three safeguard cases for a given
/// `γ` and gate `β > 0`.
pub fn safeguard_case_oracle(gamma: f64, beta: f64) -> f64 {
    assert!(beta > 0.0, "beta must be positive");
    let first_case = gamma == 0.0 || gamma >= 1.0;
    if first_case {
        return 0.0;
    }
    let ratio = gamma.abs() / (1.0 - gamma).abs();
    let second_case = ratio > beta;
    if !second_case {
        return 1.0;
    }
    let sign_gamma = if gamma < 0.0 { -1.0 } else { 1.0 };
    beta / (gamma * (beta + sign_gamma))
}

/// Natural-parameter continuation in `λ` for the Bratu problem on `n`
/// interior points.
///
/// Starting from the zero vector at `lambda_start`, each solve is
/// warm-started from the previous solution. Returns the last `λ` at which
/// Newton converged within 50 iterations, or `None` if the first solve
/// already failed.
pub fn fold_sweep(n: usize, lambda_start: f64, lambda_end: f64, lambda_step: f64) -> Option<f64> {
    assert!(lambda_step > 0.0, "step must be positive");
    let cfg = SolverConfig::newton().with_max_iter(50);
    let mut warm = vec![0.0; n];
    let mut last = None;
    let count = ((lambda_end - lambda_start) / lambda_step + 1e-9).floor() as usize;
    for i in 0..=count {
        let lambda = lambda_start + i as f64 * lambda_step;
        let p = make_bratu_1d(lambda, n).ok()?;
        let rep = solve(&p, &warm, &cfg).ok()?;
        if !rep.converged() {
            break;
        }
        warm = rep.final_x;
        last = Some(lambda);
    }
    last
}

/// Max `‖f(x)‖` over the supplied points, e.g. to validate stored roots.
pub fn max_residual<P: NonlinearProblem + ?Sized>(p: &P, points: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .map(|x| crate::linalg::norm2(&p.residual(x)))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_known_minimizer() {
        let g = gamma_grid_oracle(&[1.0, 0.0], &[0.0, 1.0], -2.0, 2.0, 1e-4);
        assert!((g - 0.5).abs() <= 1e-4);
    }

    #[test]
    fn grid_tie_prefers_zero() {
        let g = gamma_grid_oracle(&[0.4, 0.1], &[0.4, 0.1], -2.0, 2.0, 1e-4);
        assert!(g.abs() < 1e-12);
    }

    #[test]
    fn case_oracle_examples() {
        assert_eq!(safeguard_case_oracle(0.0, 0.3), 0.0);
        assert_eq!(safeguard_case_oracle(1.0, 0.3), 0.0);
        assert_eq!(safeguard_case_oracle(2.0, 0.3), 0.0);
        let l = safeguard_case_oracle(-0.5, 0.25);
        assert!((l - 2.0 / 3.0).abs() < 1e-15);
        assert!(((l * -0.5).abs() - 0.25 / 0.75).abs() < 1e-15);
        assert!((safeguard_case_oracle(0.5, 0.25) - 0.4).abs() < 1e-15);
        assert_eq!(safeguard_case_oracle(0.1, 0.5), 1.0);
    }

    #[test]
    fn sweep_without_failure_returns_end() {
        assert_eq!(fold_sweep(20, 0.5, 1.0, 0.25), Some(1.0));
    }

    #[test]
    fn sweep_starting_past_fold_is_none() {
        assert_eq!(fold_sweep(50, 3.7, 3.8, 0.05), None);
    }
}
