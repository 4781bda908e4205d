//! The stepping engine: Newton, Newton-Anderson of depth `m`, and fixed or
//! adaptive γ-safeguarded Newton-Anderson.
//!
//! Every method takes a pure Newton step first. From the second step on,
//! depth-one methods mix the two latest Newton steps with coefficient `γ`,
//! scaled by `λ` when safeguarding is active:
//!
//! ```text
//! x_{k+1} = x_k + w_{k+1} − λ γ (x_k − x_{k−1} + w_{k+1} − w_k)
//! ```

mod config;
mod linesearch;
mod safeguard;
mod step;

pub use config::{
    Activation, Linesearch, Method, SolverConfig, DEFAULT_ACTIVATION_THRESHOLD,
    DEFAULT_DIVERGENCE_CAP, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
pub use linesearch::{armijo_backtrack, ArmijoOutcome};
pub use safeguard::{
    adaptive_gamma_safeguard, gamma_safeguard, safeguard_lambda, SafeguardCase, SafeguardDecision,
};
pub use step::{
    anderson_gamma_1, na_m_update, na_update, newton_step, optimization_gain, DepthUpdate,
    HistoryEntry,
};

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{decompose_errors, estimate_order, ErrorComponents};
use crate::error::{LinalgError, ProblemError, SolverError};
use crate::linalg::norm2;
use crate::problem::NonlinearProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    Diverged,
    SingularJacobian,
    MaxIter,
}

impl Status {
    pub const ALL: [Status; 4] = [
        Status::Converged,
        Status::Diverged,
        Status::SingularJacobian,
        Status::MaxIter,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::Diverged => "diverged",
            Status::SingularJacobian => "singular_jacobian",
            Status::MaxIter => "max_iter",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One solver step taken from iterate `x_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub x: Vec<f64>,
    /// Newton step `w_{k+1}` computed at `x_k`.
    pub w: Vec<f64>,
    /// Mixing coefficients; one entry for depth one.
    pub gamma: Option<Vec<f64>>,
    pub lambda: Option<f64>,
    pub eta: Option<f64>,
    pub r_used: Option<f64>,
    pub beta: Option<f64>,
    /// Optimization gain of the unconstrained coefficient(s).
    pub theta: Option<f64>,
    /// Gain of the coefficient actually applied, `λγ`.
    pub theta_lambda: Option<f64>,
    pub step_norm: f64,
    pub residual_norm: f64,
    pub decision: SafeguardCase,
    /// Least-squares columns used (`min{k, m}`); 0 for a Newton step.
    pub columns: usize,
    /// Linesearch step length; 1 without a linesearch.
    pub step_length: f64,
    /// Set when the linesearch ran out of backtracks.
    pub linesearch_failed: bool,
}

impl IterationRecord {
    /// `λγ` for depth-one mixing steps.
    pub fn scaled_gamma(&self) -> Option<f64> {
        match (&self.gamma, self.lambda) {
            (Some(g), Some(l)) if g.len() == 1 => Some(l * g[0]),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub label: String,
    pub records: Vec<IterationRecord>,
    pub status: Status,
    pub iterations: usize,
    pub q_term: Option<f64>,
    /// `r_{k+1}` for every safeguarded step in order, ending with the
    /// terminal step's value when there is one.
    pub r_history: Vec<f64>,
    /// Per-iterate error split, for problems with a known root and null vector.
    pub error_decomposition: Option<Vec<ErrorComponents>>,
    pub final_x: Vec<f64>,
    pub final_residual_norm: f64,
    /// Newton step at the converged iterate; computed but never applied.
    pub terminal: Option<TerminalStep>,
}

/// The Newton step `w` at the final iterate of a converged run, with the
/// `η` and `r` it would have produced. It completes the step-norm and
/// `r_{k+1}` sequences used by the order estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminalStep {
    pub k: usize,
    pub step_norm: f64,
    pub eta: Option<f64>,
    pub r_used: Option<f64>,
}

impl ConvergenceReport {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    /// Step norms of every record, followed by the terminal step if any.
    pub fn step_norms(&self) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| r.step_norm)
            .chain(self.terminal.map(|t| t.step_norm))
            .collect()
    }

    pub fn residual_norms(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.residual_norm).collect()
    }

    /// All iterates `x_0, …, x_final`.
    pub fn iterates(&self) -> Vec<&[f64]> {
        self.records
            .iter()
            .map(|r| r.x.as_slice())
            .chain(std::iter::once(self.final_x.as_slice()))
            .collect()
    }
}

/// What a safeguard override sees at a depth-one mixing step.
#[derive(Debug, Clone, Copy)]
pub struct MixingContext<'a> {
    pub k: usize,
    pub gamma: f64,
    pub eta: f64,
    pub w_next: &'a [f64],
    pub w_prev: &'a [f64],
}

/// Runs the configured method from `x0`.
///
/// Solver outcomes are reported through [`Status`]; an error is returned
/// only for a malformed configuration or a starting point of the wrong
/// length.
pub fn solve<P: NonlinearProblem + ?Sized>(
    p: &P,
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<ConvergenceReport, SolverError> {
    solve_with_override(p, x0, cfg, |_| None)
}

/// Like [`solve`], but `policy` may replace the safeguard decision at any
/// depth-one mixing step by returning `Some`.
pub fn solve_with_override<P, F>(
    p: &P,
    x0: &[f64],
    cfg: &SolverConfig,
    mut policy: F,
) -> Result<ConvergenceReport, SolverError>
where
    P: NonlinearProblem + ?Sized,
    F: FnMut(&MixingContext<'_>) -> Option<SafeguardDecision>,
{
    cfg.validate()?;
    let n = p.dimension();
    if x0.len() != n {
        return Err(ProblemError::DimensionMismatch {
            expected: n,
            found: x0.len(),
        }
        .into());
    }
    if let Some(w) = &cfg.norm_weights {
        if w.len() != n {
            return Err(ProblemError::DimensionMismatch {
                expected: n,
                found: w.len(),
            }
            .into());
        }
    }
    let sqrt_weights: Option<Vec<f64>> =
        cfg.norm_weights.as_ref().map(|w| w.iter().map(|v| v.sqrt()).collect());
    let weigh = |v: &[f64]| -> Vec<f64> {
        match &sqrt_weights {
            Some(s) => v.iter().zip(s).map(|(a, b)| a * b).collect(),
            None => v.to_vec(),
        }
    };

    let mut records: Vec<IterationRecord> = Vec::new();
    // (x_j, w_{j+1}) pairs, newest last, at most depth + 1 kept.
    let mut history: VecDeque<HistoryEntry> = VecDeque::new();
    let mut safeguard_on = matches!(cfg.activation, Activation::Always | Activation::Preasymptotic);
    let mut switched = false;
    let mut x = x0.to_vec();
    let mut final_residual: f64;

    let status = 'outer: {
        for k in 0..=cfg.max_iter {
            let fx = p.residual(&x);
            let rn = norm2(&fx);
            final_residual = rn;
            if !rn.is_finite() || x.iter().any(|v| !v.is_finite()) {
                break 'outer Status::Diverged;
            }
            if rn <= cfg.tol {
                break 'outer Status::Converged;
            }
            if rn >= cfg.divergence_cap {
                break 'outer Status::Diverged;
            }
            if k == cfg.max_iter {
                break 'outer Status::MaxIter;
            }

            let w = match step::newton_step_from_residual(p, &x, &fx) {
                Ok(w) => w,
                Err(SolverError::Linalg(LinalgError::SingularMatrix { .. })) => {
                    break 'outer Status::SingularJacobian
                }
                Err(e) => return Err(e),
            };
            if w.iter().any(|v| !v.is_finite()) {
                break 'outer Status::Diverged;
            }
            let ws = weigh(&w);
            let step_norm = norm2(&ws);
            if step_norm == 0.0 {
                break 'outer Status::Converged;
            }

            let mut rec = IterationRecord {
                k,
                x: x.clone(),
                w: w.clone(),
                gamma: None,
                lambda: None,
                eta: None,
                r_used: None,
                beta: None,
                theta: None,
                theta_lambda: None,
                step_norm,
                residual_norm: rn,
                decision: SafeguardCase::NotApplied,
                columns: 0,
                step_length: 1.0,
                linesearch_failed: false,
            };

            let mut x_next;
            if k == 0 || cfg.method == Method::Newton {
                x_next = x.iter().zip(&w).map(|(a, b)| a + b).collect::<Vec<_>>();
            } else {
                let prev = history.back().expect("history holds the previous step");
                let wps = weigh(&prev.w);
                let eta = step_norm / norm2(&wps);
                rec.eta = Some(eta);

                if let Activation::Asymptotic(t) = cfg.activation {
                    if step_norm < t {
                        safeguard_on = true;
                    }
                }
                if cfg.method == Method::Na && cfg.depth > 1 && !switched {
                    if let Some(t) = cfg.switch_to_m1_at {
                        if step_norm < t {
                            switched = true;
                        }
                    }
                }

                let depth_mixing = cfg.method == Method::Na && cfg.depth > 1 && !switched;
                if depth_mixing {
                    history.push_back(HistoryEntry {
                        x: x.clone(),
                        w: w.clone(),
                    });
                    let window: Vec<HistoryEntry> = history.iter().cloned().collect();
                    history.pop_back();
                    let upd = step::na_m_update_weighted(&window, cfg.depth, cfg.norm_weights.as_deref())?;
                    rec.columns = upd.columns;
                    rec.theta = Some(upd.theta);
                    rec.theta_lambda = Some(upd.theta);
                    rec.lambda = Some(1.0);
                    rec.gamma = Some(upd.gamma);
                    x_next = upd.x_next;
                } else {
                    let gamma = anderson_gamma_1(&ws, &wps);
                    let builtin = match (cfg.method, switched) {
                        (Method::Na, true) => Some(safeguard::adaptive_from_eta(gamma, eta, cfg.r_hat)),
                        (Method::Gna, _) if safeguard_on => {
                            Some(safeguard::fixed_from_eta(gamma, eta, cfg.r))
                        }
                        (Method::Agna, _) if safeguard_on => {
                            Some(safeguard::adaptive_from_eta(gamma, eta, cfg.r_hat))
                        }
                        _ => None,
                    };
                    let ctx = MixingContext {
                        k,
                        gamma,
                        eta,
                        w_next: &ws,
                        w_prev: &wps,
                    };
                    let decision = policy(&ctx)
                        .or(builtin)
                        .unwrap_or_else(|| SafeguardDecision::not_applied(1.0));
                    let lambda = decision.lambda;
                    rec.columns = 1;
                    rec.gamma = Some(vec![gamma]);
                    rec.lambda = Some(lambda);
                    rec.decision = decision.case;
                    rec.r_used = decision.r_used;
                    rec.beta = decision.beta;
                    rec.theta = Some(optimization_gain(&ws, &wps, gamma));
                    rec.theta_lambda = Some(optimization_gain(&ws, &wps, lambda * gamma));
                    x_next = na_update(&x, &prev.x, &w, &prev.w, gamma, lambda);
                }
            }

            if let Linesearch::Armijo {
                c1,
                shrink,
                max_backtracks,
            } = cfg.linesearch
            {
                let d: Vec<f64> = x_next.iter().zip(&x).map(|(a, b)| a - b).collect();
                match linesearch::armijo_with_residual(p, &x, rn, &d, c1, shrink, max_backtracks) {
                    Ok(out) => {
                        rec.step_length = out.t;
                        rec.linesearch_failed = !out.accepted;
                        if out.t != 1.0 {
                            x_next = x.iter().zip(&d).map(|(a, b)| a + out.t * b).collect();
                        }
                    }
                    Err(SolverError::InvalidDirection) => {}
                    Err(e) => return Err(e),
                }
            }

            history.push_back(HistoryEntry { x, w });
            while history.len() > cfg.depth.max(1) {
                history.pop_front();
            }
            records.push(rec);
            x = x_next;
        }
        unreachable!("loop exits through a status on k == max_iter")
    };

    let terminal = match (status, records.last()) {
        (Status::Converged, Some(last)) => match newton_step(p, &x) {
            Ok((w, _)) if w.iter().all(|v| v.is_finite()) => {
                let step_norm = norm2(&weigh(&w));
                let eta = (cfg.method != Method::Newton).then(|| step_norm / last.step_norm);
                let r_used = eta.and_then(|eta| match cfg.method {
                    Method::Agna if safeguard_on => Some(eta.min(cfg.r_hat)),
                    Method::Na if switched => Some(eta.min(cfg.r_hat)),
                    Method::Gna if safeguard_on => Some(cfg.r),
                    _ => None,
                });
                Some(TerminalStep {
                    k: records.len(),
                    step_norm,
                    eta,
                    r_used,
                })
            }
            _ => None,
        },
        _ => None,
    };
    let step_norms: Vec<f64> = records
        .iter()
        .map(|r| r.step_norm)
        .chain(terminal.map(|t| t.step_norm))
        .collect();
    let q_term = estimate_order(&step_norms).ok().map(|o| o.q_term);
    let r_history = records
        .iter()
        .filter_map(|r| r.r_used)
        .chain(terminal.and_then(|t| t.r_used))
        .collect();
    let mut report = ConvergenceReport {
        label: cfg.label(),
        iterations: records.len(),
        records,
        status,
        q_term,
        r_history,
        error_decomposition: None,
        final_x: x,
        final_residual_norm: final_residual,
        terminal,
    };
    if let Some(truth) = p.ground_truth() {
        if truth.root.is_some() && truth.null_vector.is_some() {
            report.error_decomposition = decompose_errors(&report, truth).ok();
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{make_bratu_1d, make_chandrasekhar, make_singular_quadratic};

    #[test]
    fn newton_halves_null_component() {
        let p = make_singular_quadratic();
        let rep = solve(&p, &[1.0, 1.0], &SolverConfig::newton()).unwrap();
        assert_eq!(rep.status, Status::Converged);
        for (k, rec) in rep.records.iter().enumerate().skip(1) {
            assert_eq!(rec.x[0], 0.5f64.powi(k as i32));
            assert_eq!(rec.x[1], 0.0);
        }
        let s = rep.step_norms();
        for pair in s.windows(2).rev().take(5) {
            assert!((pair[1] / pair[0] - 0.5).abs() < 0.02);
        }
        // records carry no mixing data for Newton
        assert!(rep.records.iter().all(|r| r.gamma.is_none() && r.lambda.is_none()));
    }

    #[test]
    fn first_step_is_newton_for_every_method() {
        let p = make_singular_quadratic();
        for cfg in [
            SolverConfig::na(1),
            SolverConfig::na(3),
            SolverConfig::gna(0.5),
            SolverConfig::agna(0.5),
        ] {
            let rep = solve(&p, &[1.0, 1.0], &cfg).unwrap();
            assert_eq!(rep.records[1].x, vec![0.5, 0.0], "{}", cfg.label());
            assert_eq!(rep.records[0].decision, SafeguardCase::NotApplied);
        }
    }

    #[test]
    fn na_beats_newton_on_singular_quadratic() {
        let p = make_singular_quadratic();
        let newton = solve(&p, &[1.0, 1.0], &SolverConfig::newton()).unwrap();
        let na = solve(&p, &[1.0, 1.0], &SolverConfig::na(1)).unwrap();
        assert!(na.converged());
        assert!(na.iterations < newton.iterations);
    }

    #[test]
    fn asymptotic_activation_waits_for_threshold() {
        let p = make_chandrasekhar(0.9, 40).unwrap();
        let cfg = SolverConfig::agna(0.5).with_activation(Activation::Asymptotic(0.1));
        let rep = solve(&p, &p.default_initial(), &cfg).unwrap();
        assert!(rep.converged());
        let mut seen_on = false;
        for rec in rep.records.iter().skip(1) {
            if rec.decision.is_safeguarded() {
                seen_on = true;
            } else {
                assert!(!seen_on, "activation is sticky");
            }
            if !seen_on {
                assert!(rec.step_norm >= 0.1);
            }
        }
    }

    #[test]
    fn depth_switch_moves_to_adaptive_m1() {
        let p = make_chandrasekhar(1.0, 50).unwrap();
        let cfg = SolverConfig::na(3).with_switch_to_m1_at(1e-2, 0.9);
        let rep = solve(&p, &p.default_initial(), &cfg).unwrap();
        assert!(rep.converged());
        let first_switched = rep
            .records
            .iter()
            .position(|r| r.decision.is_safeguarded())
            .expect("switch happened");
        assert!(rep.records[first_switched].step_norm < 1e-2);
        for r in &rep.records[first_switched..] {
            assert_eq!(r.columns, 1);
        }
        assert!(rep.records[..first_switched].iter().any(|r| r.columns > 1));
    }

    #[test]
    fn malformed_config_is_an_error() {
        let p = make_singular_quadratic();
        assert!(solve(&p, &[1.0, 1.0], &SolverConfig::agna(1.0)).is_err());
        assert!(solve(&p, &[1.0], &SolverConfig::newton()).is_err());
    }

    #[test]
    fn singular_jacobian_status() {
        let p = make_singular_quadratic();
        let rep = solve(&p, &[0.0, 1.0], &SolverConfig::newton()).unwrap();
        assert_eq!(rep.status, Status::SingularJacobian);
        assert!(rep.records.is_empty());
    }

    #[test]
    fn max_iter_status() {
        let p = make_singular_quadratic();
        let rep = solve(&p, &[1.0, 1.0], &SolverConfig::newton().with_max_iter(3)).unwrap();
        assert_eq!(rep.status, Status::MaxIter);
        assert_eq!(rep.iterations, 3);
    }

    #[test]
    fn divergence_is_classified() {
        // Newton on the cube root doubles |x| every step
        let p = crate::problem::FnProblem::new(1, |x: &[f64]| vec![x[0].cbrt()]).with_jacobian(
            |x: &[f64]| crate::linalg::DenseMatrix::from_rows(&[vec![x[0].abs().powf(-2.0 / 3.0) / 3.0]]),
        );
        let rep = solve(&p, &[1.0], &SolverConfig::newton()).unwrap();
        assert_eq!(rep.status, Status::Diverged);
    }

    #[test]
    fn armijo_linesearch_runs() {
        let p = make_bratu_1d(1.0, 30).unwrap();
        let cfg = SolverConfig::agna(0.5).with_linesearch(Linesearch::armijo());
        let rep = solve(&p, &p.default_initial(), &cfg).unwrap();
        assert!(rep.converged());
        assert!(rep.records.iter().all(|r| r.step_length > 0.0 && r.step_length <= 1.0));
    }

    #[test]
    fn norm_weights_scale_step_norms() {
        let p = make_singular_quadratic();
        let mut cfg = SolverConfig::newton();
        cfg.norm_weights = Some(vec![4.0, 4.0]);
        let weighted = solve(&p, &[1.0, 1.0], &cfg).unwrap();
        let plain = solve(&p, &[1.0, 1.0], &SolverConfig::newton()).unwrap();
        for (a, b) in weighted.records.iter().zip(&plain.records) {
            assert!((a.step_norm - 2.0 * b.step_norm).abs() < 1e-15);
        }
    }

    #[test]
    fn error_decomposition_attached_with_ground_truth() {
        let p = make_singular_quadratic();
        let rep = solve(&p, &[1.0, 1.0], &SolverConfig::newton()).unwrap();
        let dec = rep.error_decomposition.as_ref().unwrap();
        assert_eq!(dec.len(), rep.iterations + 1);
    }
}
