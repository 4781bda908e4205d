//! Post-hoc analysis of solver histories: convergence-order estimates,
//! null/range error splits against a known root, optimization gains and
//! quasi-restart counts.

use serde::{Deserialize, Serialize};

use crate::error::DiagnosticsError;
use crate::linalg::{dot, norm2};
use crate::problem::GroundTruth;
use crate::solver::ConvergenceReport;

/// Denominator below which `σ_k` is reported as infinite.
pub const SIGMA_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderEstimate {
    /// `q[i] = log‖w_i‖ / log‖w_{i−1}‖` where both norms lie in (0, 1);
    /// `None` elsewhere (always `None` for `i = 0`).
    pub q: Vec<Option<f64>>,
    /// Median of the last three defined `q` values.
    pub q_term: f64,
}

/// Per-step order estimates `q_{k+1} = log‖w_{k+1}‖ / log‖w_k‖` and the
/// terminal order.
///
/// Needs at least three step norms in (0, 1) and one consecutive pair of
/// them.
pub fn estimate_order(step_norms: &[f64]) -> Result<OrderEstimate, DiagnosticsError> {
    let eligible = |v: f64| v > 0.0 && v < 1.0;
    let found = step_norms.iter().filter(|v| eligible(**v)).count();
    let mut q = vec![None; step_norms.len()];
    for i in 1..step_norms.len() {
        let (a, b) = (step_norms[i - 1], step_norms[i]);
        if eligible(a) && eligible(b) {
            q[i] = Some(b.ln() / a.ln());
        }
    }
    let defined: Vec<f64> = q.iter().flatten().copied().collect();
    if found < 3 || defined.is_empty() {
        return Err(DiagnosticsError::OrderUndefined { found });
    }
    let mut tail: Vec<f64> = defined[defined.len().saturating_sub(3)..].to_vec();
    tail.sort_by(f64::total_cmp);
    let q_term = if tail.len() % 2 == 1 {
        tail[tail.len() / 2]
    } else {
        0.5 * (tail[tail.len() / 2 - 1] + tail[tail.len() / 2])
    };
    Ok(OrderEstimate { q, q_term })
}

/// `(‖P_N e‖, ‖P_R e‖, σ)` for one error vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorComponents {
    pub null: f64,
    pub range: f64,
    /// `‖P_R e‖ / ‖P_N e‖`, infinite when `‖P_N e‖ < SIGMA_FLOOR`.
    pub sigma: f64,
}

/// Splits `e` along the unit null vector `φ`: `P_N = φφᵀ`, `P_R = I − φφᵀ`.
pub fn split_error(e: &[f64], phi: &[f64]) -> ErrorComponents {
    let c = dot(phi, e);
    let range: Vec<f64> = e.iter().zip(phi).map(|(ei, pi)| ei - c * pi).collect();
    let null = c.abs();
    let range = norm2(&range);
    let sigma = if null < SIGMA_FLOOR { f64::INFINITY } else { range / null };
    ErrorComponents { null, range, sigma }
}

/// Error split for every iterate `x_0, …, x_final` of a report.
pub fn decompose_errors(
    report: &ConvergenceReport,
    truth: &GroundTruth,
) -> Result<Vec<ErrorComponents>, DiagnosticsError> {
    let root = truth
        .root
        .as_ref()
        .ok_or(DiagnosticsError::MissingGroundTruth("root"))?;
    let phi = truth
        .null_vector
        .as_ref()
        .ok_or(DiagnosticsError::MissingGroundTruth("null vector"))?;
    Ok(report
        .iterates()
        .into_iter()
        .map(|x| {
            let e: Vec<f64> = x.iter().zip(root).map(|(a, b)| a - b).collect();
            split_error(&e, phi)
        })
        .collect())
}

/// Null-space projection of the depth-one coefficient,
/// `γ̂ = (P_N w_{k+1})ᵀ (P_N w_{k+1} − P_N w_k) / ‖P_N w_{k+1} − P_N w_k‖²`,
/// for each step after the first. `None` where the projected steps agree.
pub fn projected_gamma(
    report: &ConvergenceReport,
    truth: &GroundTruth,
) -> Result<Vec<Option<f64>>, DiagnosticsError> {
    let phi = truth
        .null_vector
        .as_ref()
        .ok_or(DiagnosticsError::MissingGroundTruth("null vector"))?;
    Ok(report
        .records
        .windows(2)
        .map(|pair| {
            let a = dot(phi, &pair[1].w);
            let b = dot(phi, &pair[0].w);
            let d = a - b;
            (d != 0.0).then(|| a * d / (d * d))
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainEntry {
    pub k: usize,
    /// Gain of the unconstrained coefficient.
    pub theta: f64,
    /// Gain of the applied coefficient `λγ`.
    pub theta_lambda: f64,
}

/// Optimization gains of every mixing step in a report.
pub fn gain_history(report: &ConvergenceReport) -> Vec<GainEntry> {
    report
        .records
        .iter()
        .filter_map(|r| {
            Some(GainEntry {
                k: r.k,
                theta: r.theta?,
                theta_lambda: r.theta_lambda?,
            })
        })
        .collect()
}

/// Counts iterations with `r_{k+1} < r̂` that happen before the terminal
/// decay phase.
///
/// The terminal phase is the longest suffix of `r_history` whose entries
/// are all below `r̂` and strictly decreasing.
pub fn quasi_restart_count(r_history: &[f64], r_hat: f64) -> usize {
    let mut start = r_history.len();
    while start > 0 {
        let cand = r_history[start - 1];
        let fits = cand < r_hat && (start == r_history.len() || cand > r_history[start]);
        if !fits {
            break;
        }
        start -= 1;
    }
    r_history[..start].iter().filter(|r| **r < r_hat).count()
}

/// True when the last `n` entries strictly decrease.
pub fn eventually_decreasing(values: &[f64], n: usize) -> bool {
    values.len() >= n && values[values.len() - n..].windows(2).all(|w| w[1] < w[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_quadratic_sequence() {
        let norms = [0.5, 0.25, 0.0625, 0.00390625];
        let est = estimate_order(&norms).unwrap();
        assert_eq!(est.q[0], None);
        for q in est.q.iter().skip(1) {
            assert!((q.unwrap() - 2.0).abs() < 1e-15);
        }
        assert!((est.q_term - 2.0).abs() < 1e-15);
    }

    #[test]
    fn geometric_sequence_is_nearly_linear() {
        let norms: Vec<f64> = (1..=6).map(|k| 0.5f64.powi(k)).collect();
        let est = estimate_order(&norms).unwrap();
        for (k, q) in est.q.iter().enumerate().skip(1) {
            let k1 = k as f64 + 1.0;
            assert!((q.unwrap() - k1 / (k1 - 1.0)).abs() < 1e-14);
        }
        assert!(est.q_term < 1.3);
    }

    #[test]
    fn constant_norms_order_one() {
        let est = estimate_order(&[0.5, 0.5, 0.5]).unwrap();
        assert_eq!(est.q, vec![None, Some(1.0), Some(1.0)]);
        assert_eq!(est.q_term, 1.0);
    }

    #[test]
    fn too_few_eligible() {
        assert_eq!(
            estimate_order(&[2.0, 0.5, 0.1]),
            Err(DiagnosticsError::OrderUndefined { found: 2 })
        );
        assert!(estimate_order(&[]).is_err());
    }

    #[test]
    fn norms_above_one_are_skipped() {
        let est = estimate_order(&[3.0, 0.5, 0.25, 0.0625]).unwrap();
        assert_eq!(est.q[1], None);
        assert!((est.q_term - 2.0).abs() < 1e-15);
    }

    #[test]
    fn split_examples() {
        let phi = [0.6, 0.8];
        let c = split_error(&phi, &phi);
        assert!((c.null - 1.0).abs() < 1e-15);
        assert!(c.range < 1e-15);
        let c = split_error(&[-0.8, 0.6], &phi);
        assert!(c.null < 1e-15);
        assert!((c.range - 1.0).abs() < 1e-15);
        assert_eq!(c.sigma, f64::INFINITY);
    }

    #[test]
    fn restart_counts() {
        assert_eq!(quasi_restart_count(&[0.9, 0.9, 0.9, 0.5, 0.1, 0.01], 0.9), 0);
        assert_eq!(quasi_restart_count(&[0.9, 0.3, 0.9, 0.2, 0.05, 0.01], 0.9), 1);
        assert_eq!(
            quasi_restart_count(&[0.6, 0.2, 0.6, 0.6, 0.4, 0.6, 0.3, 0.01, 1e-5], 0.6),
            2
        );
        assert_eq!(quasi_restart_count(&[], 0.5), 0);
    }

    #[test]
    fn decreasing_suffix() {
        assert!(eventually_decreasing(&[0.5, 0.9, 0.3, 0.1, 0.01], 3));
        assert!(!eventually_decreasing(&[0.3, 0.1, 0.2], 3));
        assert!(!eventually_decreasing(&[0.1], 3));
    }
}
