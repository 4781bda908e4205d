//! Nonlinear problems `f(x) = 0` and the built-in benchmark set.
//!
//! The built-ins cover three regimes: an exactly singular root with a
//! one-dimensional null space ([`SingularQuadratic`]), an integral equation
//! that is nonsingular for `c < 1` and singular at `c = 1`
//! ([`Chandrasekhar`]), and a boundary-value problem with a fold in its
//! parameter ([`Bratu1d`]).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ProblemError;
use crate::linalg::{norm2, DenseMatrix};

/// A square nonlinear system with a Jacobian.
///
/// Implementations must be re-entrant: the solvers call `residual` and
/// `jacobian` from shared references and sweeps share one problem across
/// threads.
pub trait NonlinearProblem: Send + Sync {
    fn dimension(&self) -> usize;

    fn residual(&self, x: &[f64]) -> Vec<f64>;

    fn jacobian(&self, x: &[f64]) -> DenseMatrix;

    fn ground_truth(&self) -> Option<&GroundTruth> {
        None
    }

    /// Initial iterate used when the caller does not pick one.
    fn default_initial(&self) -> Vec<f64> {
        vec![0.0; self.dimension()]
    }

    fn name(&self) -> &str {
        "user"
    }
}

impl<P: NonlinearProblem + ?Sized> NonlinearProblem for Box<P> {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn residual(&self, x: &[f64]) -> Vec<f64> {
        (**self).residual(x)
    }
    fn jacobian(&self, x: &[f64]) -> DenseMatrix {
        (**self).jacobian(x)
    }
    fn ground_truth(&self) -> Option<&GroundTruth> {
        (**self).ground_truth()
    }
    fn default_initial(&self) -> Vec<f64> {
        (**self).default_initial()
    }
    fn name(&self) -> &str {
        (**self).name()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedParameter {
    pub name: String,
    pub value: f64,
}

/// Known facts about a problem's solution.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub root: Option<Vec<f64>>,
    /// Unit vector spanning `null(f'(x*))` when that space is one-dimensional.
    pub null_vector: Option<Vec<f64>>,
    pub is_singular: bool,
    pub parameter: Option<NamedParameter>,
}

/// `f(x₁, x₂) = (x₁², x₂)`, root at the origin with `f'(x*) = diag(0, 1)`.
#[derive(Debug, Clone)]
pub struct SingularQuadratic {
    truth: GroundTruth,
}

pub fn make_singular_quadratic() -> SingularQuadratic {
    SingularQuadratic {
        truth: GroundTruth {
            root: Some(vec![0.0, 0.0]),
            null_vector: Some(vec![1.0, 0.0]),
            is_singular: true,
            parameter: None,
        },
    }
}

impl NonlinearProblem for SingularQuadratic {
    fn dimension(&self) -> usize {
        2
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0] * x[0], x[1]]
    }

    fn jacobian(&self, x: &[f64]) -> DenseMatrix {
        DenseMatrix::from_rows(&[vec![2.0 * x[0], 0.0], vec![0.0, 1.0]])
    }

    fn ground_truth(&self) -> Option<&GroundTruth> {
        Some(&self.truth)
    }

    fn default_initial(&self) -> Vec<f64> {
        vec![1.0, 1.0]
    }

    fn name(&self) -> &str {
        "singular_quadratic"
    }
}

/// Midpoint-rule discretization of the Chandrasekhar H-equation,
///
/// `F(H)ᵢ = Hᵢ − (1 − (c/2n) Σⱼ μᵢ Hⱼ / (μᵢ + μⱼ))⁻¹`, `μᵢ = (i − ½)/n`.
///
/// The Jacobian at the solution is singular at `c = 1`.
#[derive(Debug, Clone)]
pub struct Chandrasekhar {
    c: f64,
    nodes: Vec<f64>,
    // kernel[i][j] = (c / 2n) μᵢ / (μᵢ + μⱼ)
    kernel: DenseMatrix,
    truth: GroundTruth,
}

pub fn make_chandrasekhar(c: f64, n: usize) -> Result<Chandrasekhar, ProblemError> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(ProblemError::InvalidParameter {
            name: "c",
            value: c,
            reason: "must lie in (0, 1]",
        });
    }
    if n < 2 {
        return Err(ProblemError::InvalidParameter {
            name: "n",
            value: n as f64,
            reason: "grid needs at least 2 nodes",
        });
    }
    let nodes: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
    let scale = c / (2.0 * n as f64);
    let mut kernel = DenseMatrix::zeros(n, n);
    for (i, mi) in nodes.iter().enumerate() {
        for (j, mj) in nodes.iter().enumerate() {
            kernel[(i, j)] = scale * mi / (mi + mj);
        }
    }
    Ok(Chandrasekhar {
        c,
        nodes,
        kernel,
        truth: GroundTruth {
            root: None,
            null_vector: None,
            is_singular: c == 1.0,
            parameter: Some(NamedParameter {
                name: "c".into(),
                value: c,
            }),
        },
    })
}

impl Chandrasekhar {
    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    fn denominators(&self, h: &[f64]) -> Vec<f64> {
        self.kernel.mul_vec(h).into_iter().map(|s| 1.0 - s).collect()
    }
}

impl NonlinearProblem for Chandrasekhar {
    fn dimension(&self) -> usize {
        self.nodes.len()
    }

    fn residual(&self, h: &[f64]) -> Vec<f64> {
        self.denominators(h)
            .into_iter()
            .zip(h)
            .map(|(d, hi)| hi - 1.0 / d)
            .collect()
    }

    fn jacobian(&self, h: &[f64]) -> DenseMatrix {
        let n = self.dimension();
        let den = self.denominators(h);
        let mut jac = DenseMatrix::zeros(n, n);
        for i in 0..n {
            let inv_sq = 1.0 / (den[i] * den[i]);
            for j in 0..n {
                jac[(i, j)] = -self.kernel[(i, j)] * inv_sq;
            }
            jac[(i, i)] += 1.0;
        }
        jac
    }

    fn ground_truth(&self) -> Option<&GroundTruth> {
        Some(&self.truth)
    }

    fn default_initial(&self) -> Vec<f64> {
        vec![1.0; self.dimension()]
    }

    fn name(&self) -> &str {
        "chandrasekhar"
    }
}

/// One-dimensional Bratu problem `u'' + λ eᵘ = 0`, `u(0) = u(1) = 0`, on `n`
/// interior points of mesh width `h = 1/(n+1)`:
/// `F(u)ᵢ = (uᵢ₋₁ − 2uᵢ + uᵢ₊₁)/h² + λ e^{uᵢ}`.
#[derive(Debug, Clone)]
pub struct Bratu1d {
    lambda: f64,
    n: usize,
    inv_h2: f64,
    truth: GroundTruth,
}

pub fn make_bratu_1d(lambda: f64, n: usize) -> Result<Bratu1d, ProblemError> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(ProblemError::InvalidParameter {
            name: "lambda",
            value: lambda,
            reason: "must be finite and nonnegative",
        });
    }
    if n < 3 {
        return Err(ProblemError::InvalidParameter {
            name: "n",
            value: n as f64,
            reason: "need at least 3 interior points",
        });
    }
    let h = 1.0 / (n as f64 + 1.0);
    Ok(Bratu1d {
        lambda,
        n,
        inv_h2: 1.0 / (h * h),
        truth: GroundTruth {
            root: (lambda == 0.0).then(|| vec![0.0; n]),
            null_vector: None,
            is_singular: false,
            parameter: Some(NamedParameter {
                name: "lambda".into(),
                value: lambda,
            }),
        },
    })
}

impl Bratu1d {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl NonlinearProblem for Bratu1d {
    fn dimension(&self) -> usize {
        self.n
    }

    fn residual(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let left = if i > 0 { u[i - 1] } else { 0.0 };
                let right = if i + 1 < n { u[i + 1] } else { 0.0 };
                (left - 2.0 * u[i] + right) * self.inv_h2 + self.lambda * u[i].exp()
            })
            .collect()
    }

    fn jacobian(&self, u: &[f64]) -> DenseMatrix {
        let n = self.n;
        let mut jac = DenseMatrix::zeros(n, n);
        for i in 0..n {
            jac[(i, i)] = -2.0 * self.inv_h2 + self.lambda * u[i].exp();
            if i > 0 {
                jac[(i, i - 1)] = self.inv_h2;
            }
            if i + 1 < n {
                jac[(i, i + 1)] = self.inv_h2;
            }
        }
        jac
    }

    fn ground_truth(&self) -> Option<&GroundTruth> {
        Some(&self.truth)
    }

    fn name(&self) -> &str {
        "bratu1d"
    }
}

type ResidualFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type JacobianFn = dyn Fn(&[f64]) -> DenseMatrix + Send + Sync;

/// Problem assembled from closures. Without an analytic Jacobian the
/// forward-difference fallback with `h = √ε (1 + ‖x‖)` is used.
pub struct FnProblem {
    dimension: usize,
    residual: Box<ResidualFn>,
    jacobian: Option<Box<JacobianFn>>,
    truth: Option<GroundTruth>,
    initial: Option<Vec<f64>>,
}

impl FnProblem {
    pub fn new<F>(dimension: usize, residual: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            dimension,
            residual: Box::new(residual),
            jacobian: None,
            truth: None,
            initial: None,
        }
    }

    pub fn with_jacobian<J>(mut self, jacobian: J) -> Self
    where
        J: Fn(&[f64]) -> DenseMatrix + Send + Sync + 'static,
    {
        self.jacobian = Some(Box::new(jacobian));
        self
    }

    pub fn with_ground_truth(mut self, truth: GroundTruth) -> Self {
        self.truth = Some(truth);
        self
    }

    pub fn with_initial(mut self, x0: Vec<f64>) -> Self {
        self.initial = Some(x0);
        self
    }
}

impl fmt::Debug for FnProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnProblem")
            .field("dimension", &self.dimension)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl NonlinearProblem for FnProblem {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        (self.residual)(x)
    }

    fn jacobian(&self, x: &[f64]) -> DenseMatrix {
        match &self.jacobian {
            Some(j) => j(x),
            None => finite_difference_jacobian(&*self.residual, x),
        }
    }

    fn ground_truth(&self) -> Option<&GroundTruth> {
        self.truth.as_ref()
    }

    fn default_initial(&self) -> Vec<f64> {
        self.initial.clone().unwrap_or_else(|| vec![0.0; self.dimension])
    }
}

/// Forward-difference Jacobian with step `√ε (1 + ‖x‖)`.
pub fn finite_difference_jacobian<F>(residual: F, x: &[f64]) -> DenseMatrix
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = x.len();
    let h = f64::EPSILON.sqrt() * (1.0 + norm2(x));
    let f0 = residual(x);
    let mut jac = DenseMatrix::zeros(f0.len(), n);
    let mut xp = x.to_vec();
    for j in 0..n {
        xp[j] = x[j] + h;
        let fp = residual(&xp);
        for (i, (a, b)) in fp.iter().zip(&f0).enumerate() {
            jac[(i, j)] = (a - b) / h;
        }
        xp[j] = x[j];
    }
    jac
}

/// Largest central-difference discrepancy over coordinate directions,
/// `max_j ‖(f(x + h eⱼ) − f(x − h eⱼ))/(2h) − f'(x) eⱼ‖∞`.
pub fn check_jacobian<P: NonlinearProblem + ?Sized>(p: &P, x: &[f64], h: f64) -> f64 {
    assert!(h > 0.0, "difference step must be positive");
    let jac = p.jacobian(x);
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    let mut worst = 0.0_f64;
    for j in 0..x.len() {
        xp[j] = x[j] + h;
        xm[j] = x[j] - h;
        let fp = p.residual(&xp);
        let fm = p.residual(&xm);
        for i in 0..fp.len() {
            let fd = (fp[i] - fm[i]) / (2.0 * h);
            worst = worst.max((fd - jac[(i, j)]).abs());
        }
        xp[j] = x[j];
        xm[j] = x[j];
    }
    worst
}

/// A built-in problem addressed by id and a parameter map, e.g.
/// `chandrasekhar` with `{c: 1.0, n: 100}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub id: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

pub const PROBLEM_IDS: [&str; 3] = ["singular_quadratic", "chandrasekhar", "bratu1d"];

impl ProblemSpec {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, name: impl Into<String>, value: f64) -> Self {
        self.params.insert(name.into(), value);
        self
    }

    fn allowed(&self) -> Result<&'static [&'static str], ProblemError> {
        match self.id.as_str() {
            "singular_quadratic" => Ok(&[]),
            "chandrasekhar" => Ok(&["c", "n"]),
            "bratu1d" => Ok(&["lambda", "n"]),
            other => Err(ProblemError::UnknownProblem(other.to_string())),
        }
    }

    /// Checks the id and parameter names without building the problem.
    pub fn validate(&self) -> Result<(), ProblemError> {
        let allowed = self.allowed()?;
        for name in self.params.keys() {
            if !allowed.contains(&name.as_str()) {
                return Err(ProblemError::UnknownParameter {
                    problem: self.id.clone(),
                    name: name.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Box<dyn NonlinearProblem>, ProblemError> {
        self.validate()?;
        let grid = |default: usize| -> Result<usize, ProblemError> {
            match self.params.get("n") {
                None => Ok(default),
                Some(&v) if v >= 0.0 && v.fract() == 0.0 => Ok(v as usize),
                Some(&v) => Err(ProblemError::InvalidParameter {
                    name: "n",
                    value: v,
                    reason: "must be a nonnegative integer",
                }),
            }
        };
        Ok(match self.id.as_str() {
            "singular_quadratic" => Box::new(make_singular_quadratic()),
            "chandrasekhar" => {
                let c = self.params.get("c").copied().unwrap_or(0.5);
                Box::new(make_chandrasekhar(c, grid(100)?)?)
            }
            "bratu1d" => {
                let lambda = self.params.get("lambda").copied().unwrap_or(1.0);
                Box::new(make_bratu_1d(lambda, grid(100)?)?)
            }
            _ => unreachable!("validated above"),
        })
    }
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id)?;
        for (k, v) in &self.params {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}
