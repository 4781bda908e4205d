//! Newton, Newton–Anderson and safeguarded Newton–Anderson solvers for
//! nonlinear systems with singular Jacobians at the root.
//!
//! ```
//! use newton_anderson::{make_chandrasekhar, solve, SolverConfig};
//!
//! let p = make_chandrasekhar(1.0, 50).unwrap();
//! let x0 = vec![1.0; 50];
//! let rep = solve(&p, &x0, &SolverConfig::agna(0.5)).unwrap();
//! assert!(rep.converged());
//! ```

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod oracle;
pub mod problem;
pub mod solver;

pub use diagnostics::{decompose_errors, estimate_order, quasi_restart_count, ErrorComponents, OrderEstimate};
pub use error::{ConfigError, DiagnosticsError, HarnessError, LinalgError, ProblemError, SolverError};
pub use harness::{run_experiment, ExperimentOutcome, ExperimentSpec, InitialIterate, OutputFormat, Sweep};
pub use linalg::DenseMatrix;
pub use problem::{
    make_bratu_1d, make_chandrasekhar, make_singular_quadratic, FnProblem, GroundTruth, NonlinearProblem,
    ProblemSpec,
};
pub use solver::{
    solve, solve_with_override, Activation, ConvergenceReport, IterationRecord, Linesearch, Method,
    SafeguardCase, SafeguardDecision, SolverConfig, Status,
};
