//! γ-safeguarding: scales the Anderson correction by `λ ∈ [0, 1]` so the
//! mixed step stays close to the Newton step.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::linalg::norm2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafeguardCase {
    /// No safeguard evaluated (Newton step or unsafeguarded mixing).
    NotApplied,
    /// `γ = 0` or `γ ≥ 1`, so `λ = 0`.
    GammaZeroOrGeOne,
    /// `|γ|/|1 − γ| > β`, so `λ = β / (γ (β + sign γ))`.
    RatioExceeded,
    /// `λ = 1`.
    PassThrough,
}

impl SafeguardCase {
    pub fn as_str(self) -> &'static str {
        match self {
            SafeguardCase::NotApplied => "not_applied",
            SafeguardCase::GammaZeroOrGeOne => "gamma_zero_or_ge_one",
            SafeguardCase::RatioExceeded => "ratio_exceeded",
            SafeguardCase::PassThrough => "pass_through",
        }
    }

    pub fn is_safeguarded(self) -> bool {
        self != SafeguardCase::NotApplied
    }
}

impl fmt::Display for SafeguardCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which branch fired, the resulting `λ`, and the quantities that fed it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafeguardDecision {
    pub case: SafeguardCase,
    pub lambda: f64,
    /// `η = ‖w_{k+1}‖/‖w_k‖`.
    pub eta: Option<f64>,
    /// `r` (fixed) or `r_{k+1} = min{η, r̂}` (adaptive).
    pub r_used: Option<f64>,
    pub beta: Option<f64>,
}

impl SafeguardDecision {
    /// Decision for steps where no safeguard runs.
    pub fn not_applied(lambda: f64) -> Self {
        Self {
            case: SafeguardCase::NotApplied,
            lambda,
            eta: None,
            r_used: None,
            beta: None,
        }
    }
}

/// Branch logic shared by the fixed and adaptive safeguards.
pub fn safeguard_lambda(gamma: f64, beta: f64) -> (SafeguardCase, f64) {
    if gamma == 0.0 || gamma >= 1.0 {
        (SafeguardCase::GammaZeroOrGeOne, 0.0)
    } else if gamma.abs() / (1.0 - gamma).abs() > beta {
        let sign = if gamma > 0.0 { 1.0 } else { -1.0 };
        (SafeguardCase::RatioExceeded, beta / (gamma * (beta + sign)))
    } else {
        (SafeguardCase::PassThrough, 1.0)
    }
}

fn decide(gamma: f64, eta: f64, r_used: f64, beta: f64) -> SafeguardDecision {
    let (case, lambda) = safeguard_lambda(gamma, beta);
    SafeguardDecision {
        case,
        lambda,
        eta: Some(eta),
        r_used: Some(r_used),
        beta: Some(beta),
    }
}

/// Fixed γ-safeguarding with `β = r ‖w_next‖/‖w_prev‖`.
pub fn gamma_safeguard(w_next: &[f64], w_prev: &[f64], gamma: f64, r: f64) -> SafeguardDecision {
    let eta = norm2(w_next) / norm2(w_prev);
    decide(gamma, eta, r, r * eta)
}

/// Adaptive γ-safeguarding: `r_{k+1} = min{η, r̂}`, `β = r_{k+1} η`.
pub fn adaptive_gamma_safeguard(
    w_next: &[f64],
    w_prev: &[f64],
    gamma: f64,
    r_hat: f64,
) -> SafeguardDecision {
    let eta = norm2(w_next) / norm2(w_prev);
    adaptive_from_eta(gamma, eta, r_hat)
}

pub(crate) fn fixed_from_eta(gamma: f64, eta: f64, r: f64) -> SafeguardDecision {
    decide(gamma, eta, r, r * eta)
}

pub(crate) fn adaptive_from_eta(gamma: f64, eta: f64, r_hat: f64) -> SafeguardDecision {
    let r_used = eta.min(r_hat);
    decide(gamma, eta, r_used, r_used * eta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_with_eta(eta: f64) -> (Vec<f64>, Vec<f64>) {
        (vec![eta, 0.0], vec![0.0, 1.0])
    }

    #[test]
    fn gamma_at_least_one_zeroes_lambda() {
        let (a, b) = pair_with_eta(0.5);
        let d = gamma_safeguard(&a, &b, 1.5, 0.5);
        assert_eq!(d.case, SafeguardCase::GammaZeroOrGeOne);
        assert_eq!(d.lambda, 0.0);
        let d = gamma_safeguard(&a, &b, 0.0, 0.5);
        assert_eq!(d.case, SafeguardCase::GammaZeroOrGeOne);
    }

    #[test]
    fn ratio_branch_example() {
        // r = 0.5, η = 0.5 → β = 0.25
        let (a, b) = pair_with_eta(0.5);
        let d = gamma_safeguard(&a, &b, 0.5, 0.5);
        assert_eq!(d.beta, Some(0.25));
        assert_eq!(d.case, SafeguardCase::RatioExceeded);
        assert!((d.lambda - 0.4).abs() < 1e-15);
        assert!((d.lambda * 0.5 - 0.25 / 1.25).abs() < 1e-15);
    }

    #[test]
    fn pass_through_example() {
        // β = 0.5 via r = 0.5, η = 1
        let (a, b) = pair_with_eta(1.0);
        let d = gamma_safeguard(&a, &b, 0.1, 0.5);
        assert_eq!(d.beta, Some(0.5));
        assert_eq!(d.case, SafeguardCase::PassThrough);
        assert_eq!(d.lambda, 1.0);
    }

    #[test]
    fn adaptive_takes_min() {
        let (a, b) = pair_with_eta(0.2);
        let d = adaptive_gamma_safeguard(&a, &b, 0.05, 0.9);
        assert!((d.r_used.unwrap() - 0.2).abs() < 1e-15);
        assert!((d.beta.unwrap() - 0.04).abs() < 1e-15);

        let (a, b) = pair_with_eta(2.0);
        let d = adaptive_gamma_safeguard(&a, &b, 0.05, 0.5);
        assert_eq!(d.r_used, Some(0.5));
        assert_eq!(d.beta, Some(1.0));
    }

    #[test]
    fn adaptive_gamma_ge_one() {
        for eta in [0.1, 0.9, 3.0] {
            let (a, b) = pair_with_eta(eta);
            assert_eq!(adaptive_gamma_safeguard(&a, &b, 1.0, 0.5).lambda, 0.0);
            assert_eq!(adaptive_gamma_safeguard(&a, &b, 7.0, 0.5).lambda, 0.0);
        }
    }

    #[test]
    fn negative_gamma_ratio_branch() {
        let (case, lambda) = safeguard_lambda(-0.5, 0.25);
        assert_eq!(case, SafeguardCase::RatioExceeded);
        assert!((lambda - 2.0 / 3.0).abs() < 1e-15);
        assert!(((lambda * -0.5).abs() - 1.0 / 3.0).abs() < 1e-15);
    }
}
