//! Single-step kernels shared by all methods.

use crate::error::SolverError;
use crate::linalg::{dot, least_squares, norm2, solve_linear, DenseMatrix};
use crate::problem::NonlinearProblem;

/// Newton step `w` solving `f'(x) w = −f(x)`, together with `‖f(x)‖₂`.
pub fn newton_step<P: NonlinearProblem + ?Sized>(
    p: &P,
    x: &[f64],
) -> Result<(Vec<f64>, f64), SolverError> {
    let fx = p.residual(x);
    let rn = norm2(&fx);
    let w = newton_step_from_residual(p, x, &fx)?;
    Ok((w, rn))
}

pub(crate) fn newton_step_from_residual<P: NonlinearProblem + ?Sized>(
    p: &P,
    x: &[f64],
    fx: &[f64],
) -> Result<Vec<f64>, SolverError> {
    let neg: Vec<f64> = fx.iter().map(|v| -v).collect();
    Ok(solve_linear(&p.jacobian(x), &neg)?)
}

/// Closed-form depth-one mixing coefficient
/// `γ = (w_next − w_prev)ᵀ w_next / ‖w_next − w_prev‖²`.
///
/// Returns 0 when `‖w_next − w_prev‖ ≤ ε (‖w_next‖ + ‖w_prev‖)`.
pub fn anderson_gamma_1(w_next: &[f64], w_prev: &[f64]) -> f64 {
    let diff: Vec<f64> = w_next.iter().zip(w_prev).map(|(a, b)| a - b).collect();
    let dn = norm2(&diff);
    if dn <= f64::EPSILON * (norm2(w_next) + norm2(w_prev)) {
        return 0.0;
    }
    // divide before squaring so tiny differences do not underflow
    let unit: Vec<f64> = diff.iter().map(|d| d / dn).collect();
    dot(&unit, w_next) / dn
}

/// Optimization gain `‖w_next − γ (w_next − w_prev)‖ / ‖w_next‖`.
pub fn optimization_gain(w_next: &[f64], w_prev: &[f64], gamma: f64) -> f64 {
    let mixed: Vec<f64> = w_next
        .iter()
        .zip(w_prev)
        .map(|(a, b)| a - gamma * (a - b))
        .collect();
    norm2(&mixed) / norm2(w_next)
}

/// Safeguarded depth-one update
/// `x_k + w_next − λγ ((x_k + w_next) − (x_{k−1} + w_prev))`.
///
/// When `λγ = 0` this returns exactly `x_k + w_next`.
pub fn na_update(
    x_k: &[f64],
    x_km1: &[f64],
    w_next: &[f64],
    w_prev: &[f64],
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    let scale = lambda * gamma;
    if scale == 0.0 {
        return x_k.iter().zip(w_next).map(|(x, w)| x + w).collect();
    }
    (0..x_k.len())
        .map(|i| {
            let newton_k = x_k[i] + w_next[i];
            let newton_km1 = x_km1[i] + w_prev[i];
            newton_k - scale * (newton_k - newton_km1)
        })
        .collect()
}

/// An iterate `x_j` and the Newton step `w_{j+1}` computed there.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthUpdate {
    pub x_next: Vec<f64>,
    /// Coefficients, most recent difference first.
    pub gamma: Vec<f64>,
    /// `‖w_{k+1} − F_k γ‖ / ‖w_{k+1}‖`.
    pub theta: f64,
    /// Number of least-squares columns, `min{k, m}`.
    pub columns: usize,
}

/// Depth-`m` Newton-Anderson update.
///
/// `history` holds `(x_j, w_{j+1})` for `j = 0..=k` (older entries may be
/// trimmed); the last entry is the current iterate. With `m_k = min{k, m}`
/// the step differences `F_k` and iterate differences `E_k` each have `m_k`
/// columns, most recent first, and the update is
/// `x_k + w_{k+1} − (E_k + F_k) γ`.
pub fn na_m_update(history: &[HistoryEntry], m: usize) -> Result<DepthUpdate, SolverError> {
    na_m_update_weighted(history, m, None)
}

pub(crate) fn na_m_update_weighted(
    history: &[HistoryEntry],
    m: usize,
    weights: Option<&[f64]>,
) -> Result<DepthUpdate, SolverError> {
    assert!(m >= 1, "depth must be at least 1");
    assert!(history.len() >= 2, "depth update needs a previous step");
    let k = history.len() - 1;
    let mk = k.min(m);
    let current = &history[k];
    let scale = |v: Vec<f64>| -> Vec<f64> {
        match weights {
            Some(d) => v.iter().zip(d).map(|(a, s)| a * s.sqrt()).collect(),
            None => v,
        }
    };

    let mut f_cols = Vec::with_capacity(mk);
    let mut e_cols = Vec::with_capacity(mk);
    for j in 0..mk {
        let newer = &history[k - j];
        let older = &history[k - j - 1];
        f_cols.push(newer.w.iter().zip(&older.w).map(|(a, b)| a - b).collect::<Vec<_>>());
        e_cols.push(newer.x.iter().zip(&older.x).map(|(a, b)| a - b).collect::<Vec<_>>());
    }

    let f_scaled: Vec<Vec<f64>> = f_cols.iter().cloned().map(scale).collect();
    let w_scaled = scale(current.w.clone());
    let gamma = least_squares(&DenseMatrix::from_columns(&f_scaled), &w_scaled)?;

    let n = current.x.len();
    let mut x_next: Vec<f64> = current.x.iter().zip(&current.w).map(|(x, w)| x + w).collect();
    let mut resid = w_scaled.clone();
    for j in 0..mk {
        let g = gamma[j];
        if g == 0.0 {
            continue;
        }
        for i in 0..n {
            x_next[i] -= g * (e_cols[j][i] + f_cols[j][i]);
            resid[i] -= g * f_scaled[j][i];
        }
    }
    let theta = norm2(&resid) / norm2(&w_scaled);
    Ok(DepthUpdate {
        x_next,
        gamma,
        theta,
        columns: mk,
    })
}
