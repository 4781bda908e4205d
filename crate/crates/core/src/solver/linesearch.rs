use crate::error::SolverError;
use crate::linalg::norm2;
use crate::problem::NonlinearProblem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmijoOutcome {
    /// Accepted step length, or the last trial when nothing was accepted.
    pub t: f64,
    pub accepted: bool,
    pub trials: usize,
}

/// Backtracks over `t ∈ {1, shrink, shrink², …}` until
/// `½‖f(x + t d)‖² ≤ ½‖f(x)‖² − c1 t ‖f(x)‖²`.
///
/// At most `max_backtracks` shrinks are tried after the full step. If none
/// is accepted the last trial `t` is returned with `accepted = false`.
pub fn armijo_backtrack<P: NonlinearProblem + ?Sized>(
    p: &P,
    x: &[f64],
    direction: &[f64],
    c1: f64,
    shrink: f64,
    max_backtracks: usize,
) -> Result<ArmijoOutcome, SolverError> {
    let fx = norm2(&p.residual(x));
    armijo_with_residual(p, x, fx, direction, c1, shrink, max_backtracks)
}

pub(crate) fn armijo_with_residual<P: NonlinearProblem + ?Sized>(
    p: &P,
    x: &[f64],
    residual_norm: f64,
    direction: &[f64],
    c1: f64,
    shrink: f64,
    max_backtracks: usize,
) -> Result<ArmijoOutcome, SolverError> {
    if direction.iter().any(|v| !v.is_finite()) || direction.iter().all(|v| *v == 0.0) {
        return Err(SolverError::InvalidDirection);
    }
    let merit0 = 0.5 * residual_norm * residual_norm;
    let slope = residual_norm * residual_norm;
    let mut t = 1.0;
    let mut trial = x.to_vec();
    for attempt in 0..=max_backtracks {
        for ((ti, xi), di) in trial.iter_mut().zip(x).zip(direction) {
            *ti = xi + t * di;
        }
        let fn_t = norm2(&p.residual(&trial));
        if 0.5 * fn_t * fn_t <= merit0 - c1 * t * slope {
            return Ok(ArmijoOutcome {
                t,
                accepted: true,
                trials: attempt + 1,
            });
        }
        if attempt < max_backtracks {
            t *= shrink;
        }
    }
    Ok(ArmijoOutcome {
        t,
        accepted: false,
        trials: max_backtracks + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{solve_linear, DenseMatrix};
    use crate::problem::FnProblem;

    #[test]
    fn linear_problem_accepts_newton_step() {
        let a = DenseMatrix::from_rows(&[vec![3.0, 1.0], vec![1.0, 2.0]]);
        let b = vec![1.0, -1.0];
        let (a2, b2) = (a.clone(), b.clone());
        let p = FnProblem::new(2, move |x: &[f64]| {
            a2.mul_vec(x).iter().zip(&b2).map(|(u, v)| u - v).collect()
        })
        .with_jacobian(move |_: &[f64]| a.clone());
        let x = vec![4.0, -2.0];
        let f: Vec<f64> = p.residual(&x).iter().map(|v| -v).collect();
        let d = solve_linear(&p.jacobian(&x), &f).unwrap();
        let out = armijo_backtrack(&p, &x, &d, 1e-4, 0.5, 10).unwrap();
        assert_eq!(out.t, 1.0);
        assert!(out.accepted);
    }

    #[test]
    fn zero_direction_rejected() {
        let p = FnProblem::new(1, |x: &[f64]| vec![x[0] * x[0]]);
        assert_eq!(
            armijo_backtrack(&p, &[1.0], &[0.0], 1e-4, 0.5, 10),
            Err(SolverError::InvalidDirection)
        );
    }

    #[test]
    fn scalar_square_full_step() {
        let p = FnProblem::new(1, |x: &[f64]| vec![x[0] * x[0]]);
        let out = armijo_backtrack(&p, &[1.0], &[-0.5], 1e-4, 0.5, 10).unwrap();
        assert_eq!(out.t, 1.0);
        assert!(out.accepted);
    }

    #[test]
    fn ascent_direction_exhausts_backtracks() {
        let p = FnProblem::new(1, |x: &[f64]| vec![x[0]]);
        let out = armijo_backtrack(&p, &[1.0], &[1.0], 1e-4, 0.5, 3).unwrap();
        assert!(!out.accepted);
        assert_eq!(out.trials, 4);
        assert_eq!(out.t, 0.125);
    }

    #[test]
    fn overshoot_is_shortened() {
        // f(x) = atan(x): full Newton steps from x = 2 overshoot
        let p = FnProblem::new(1, |x: &[f64]| vec![x[0].atan()]);
        let x = 2.0_f64;
        let d = -x.atan() * (1.0 + x * x);
        let out = armijo_backtrack(&p, &[x], &[d], 1e-4, 0.5, 20).unwrap();
        assert!(out.accepted);
        assert!(out.t < 1.0);
    }
}
