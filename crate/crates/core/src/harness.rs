//! Experiment runner: problem × parameter × solver-config grids, summary
//! tables and plot-ready history files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::problem::{NonlinearProblem, ProblemSpec};
use crate::solver::{solve, ConvergenceReport, SolverConfig, Status};

/// CSV column order of a history block.
pub const HISTORY_COLUMNS: [&str; 12] = [
    "k",
    "residual_norm",
    "step_norm",
    "gamma",
    "lambda",
    "eta",
    "r_used",
    "beta",
    "theta",
    "theta_lambda",
    "decision",
    "q",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(HarnessError::InvalidSpec(format!("unknown format `{other}`"))),
        }
    }
}

/// How the initial iterate is chosen.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitialIterate {
    Zero,
    Ones,
    #[default]
    BuiltinDefault,
    /// Built-in default with one entry overwritten.
    Perturbed { index: usize, value: f64 },
    /// Built-in default plus uniform noise in `[−scale, scale]` drawn from
    /// the experiment seed.
    Random { scale: f64 },
}

impl FromStr for InitialIterate {
    type Err = HarnessError;

    /// Accepts `zero`, `ones`, `default`, `perturbed:<index>:<value>` and
    /// `random:<scale>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || HarnessError::InvalidSpec(format!("cannot parse initial iterate `{s}`"));
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["zero"] => Ok(InitialIterate::Zero),
            ["ones"] => Ok(InitialIterate::Ones),
            ["default"] | ["builtin_default"] => Ok(InitialIterate::BuiltinDefault),
            ["perturbed", i, v] => Ok(InitialIterate::Perturbed {
                index: i.parse().map_err(|_| bad())?,
                value: v.parse().map_err(|_| bad())?,
            }),
            ["random", scale] => Ok(InitialIterate::Random {
                scale: scale.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

impl InitialIterate {
    pub fn build<P: NonlinearProblem + ?Sized>(&self, p: &P, seed: u64) -> Result<Vec<f64>, HarnessError> {
        let n = p.dimension();
        Ok(match self {
            InitialIterate::Zero => vec![0.0; n],
            InitialIterate::Ones => vec![1.0; n],
            InitialIterate::BuiltinDefault => p.default_initial(),
            InitialIterate::Perturbed { index, value } => {
                if *index >= n {
                    return Err(HarnessError::InvalidSpec(format!(
                        "perturbation index {index} out of range for dimension {n}"
                    )));
                }
                let mut x = p.default_initial();
                x[*index] = *value;
                x
            }
            InitialIterate::Random { scale } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                p.default_initial()
                    .into_iter()
                    .map(|v| v + scale * rng.gen_range(-1.0..=1.0))
                    .collect()
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub parameter: String,
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl Sweep {
    /// Grid values `start, start + step, …` up to `end` (inclusive, with a
    /// small slack for rounding).
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.end - self.start) / self.step + 1e-9).floor();
        if !(count >= 0.0) {
            return Vec::new();
        }
        (0..=count as usize)
            .map(|i| self.start + i as f64 * self.step)
            .collect()
    }
}

impl FromStr for Sweep {
    type Err = HarnessError;

    /// Parses `name:start:end:step`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || HarnessError::InvalidSpec(format!("cannot parse sweep `{s}` (name:start:end:step)"));
        let parts: Vec<&str> = s.split(':').collect();
        let [name, a, b, c] = parts.as_slice() else {
            return Err(bad());
        };
        Ok(Sweep {
            parameter: name.to_string(),
            start: a.parse().map_err(|_| bad())?,
            end: b.parse().map_err(|_| bad())?,
            step: c.parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub problem: ProblemSpec,
    pub configs: Vec<SolverConfig>,
    #[serde(default)]
    pub initial: InitialIterate,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    /// Warm-start each sweep value from the previous converged solution of
    /// the same config instead of the initial iterate.
    #[serde(default)]
    pub warm_start: bool,
    pub output: OutputFormat,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn new(problem: ProblemSpec, configs: Vec<SolverConfig>) -> Self {
        Self {
            problem,
            configs,
            initial: InitialIterate::BuiltinDefault,
            sweep: None,
            warm_start: false,
            output: OutputFormat::Csv,
            output_path: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.configs.is_empty() {
            return Err(HarnessError::InvalidSpec("at least one solver config is required".into()));
        }
        for cfg in &self.configs {
            cfg.validate()?;
        }
        // building at the first grid value also range-checks fixed parameters
        let first = match &self.sweep {
            Some(s) => {
                if !(s.step > 0.0) {
                    return Err(HarnessError::InvalidSpec(format!("sweep step must be positive, got {}", s.step)));
                }
                if !(s.end >= s.start) {
                    return Err(HarnessError::InvalidSpec("sweep end precedes start".into()));
                }
                self.problem.clone().with_param(s.parameter.clone(), s.start)
            }
            None => self.problem.clone(),
        };
        first.build()?;
        Ok(())
    }
}

/// One (parameter value × config) solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub index: usize,
    pub parameter: Option<f64>,
    pub config_index: usize,
    pub label: String,
    pub report: Option<ConvergenceReport>,
    /// Why the cell produced no report (e.g. invalid parameter value).
    pub error: Option<String>,
}

impl Cell {
    pub fn status(&self) -> Option<Status> {
        self.report.as_ref().map(|r| r.status)
    }

    pub fn converged(&self) -> bool {
        self.status() == Some(Status::Converged)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Onset {
    pub label: String,
    /// Largest swept value at which the config converged.
    pub largest_converged: Option<f64>,
    /// First swept value (in sweep order) at which it did not.
    pub first_failure: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub problem: String,
    pub sweep_parameter: Option<String>,
    /// Ordered by (parameter value, config index).
    pub cells: Vec<Cell>,
    pub onsets: Vec<Onset>,
}

impl ExperimentOutcome {
    pub fn all_failed(&self) -> bool {
        !self.cells.iter().any(Cell::converged)
    }

    /// Process exit status for the CLI: 0, or 2 when no cell converged.
    pub fn exit_code(&self) -> i32 {
        if self.all_failed() {
            2
        } else {
            0
        }
    }
}

fn run_cell(
    problem: &ProblemSpec,
    parameter: Option<(&str, f64)>,
    cfg: &SolverConfig,
    initial: &InitialIterate,
    seed: u64,
    warm: Option<&[f64]>,
) -> Result<ConvergenceReport, String> {
    let spec = match parameter {
        Some((name, v)) => problem.clone().with_param(name, v),
        None => problem.clone(),
    };
    let p = spec.build().map_err(|e| e.to_string())?;
    let x0 = match warm {
        Some(x) if x.len() == p.dimension() => x.to_vec(),
        _ => initial.build(&*p, seed).map_err(|e| e.to_string())?,
    };
    solve(&*p, &x0, cfg).map_err(|e| e.to_string())
}

fn onsets(spec: &ExperimentSpec, cells: &[Cell]) -> Vec<Onset> {
    spec.configs
        .iter()
        .enumerate()
        .map(|(ci, cfg)| {
            let mine: Vec<&Cell> = cells.iter().filter(|c| c.config_index == ci).collect();
            Onset {
                label: cfg.label(),
                largest_converged: mine
                    .iter()
                    .filter(|c| c.converged())
                    .filter_map(|c| c.parameter)
                    .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v)))),
                first_failure: mine.iter().find(|c| !c.converged()).and_then(|c| c.parameter),
            }
        })
        .collect()
}

/// Runs every (parameter value × config) cell.
///
/// Cells run concurrently; the result order is (parameter value, config
/// index) regardless of completion order. A failing cell is recorded, not
/// fatal.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome, HarnessError> {
    spec.validate()?;
    let values: Vec<Option<f64>> = match &spec.sweep {
        Some(s) => s.values().into_iter().map(Some).collect(),
        None => vec![None],
    };
    let pname = spec.sweep.as_ref().map(|s| s.parameter.as_str());
    let nconf = spec.configs.len();

    let cells: Vec<Cell> = if spec.warm_start && spec.sweep.is_some() {
        // continuation: sequential in the parameter, parallel across configs
        let per_config: Vec<Vec<Cell>> = spec
            .configs
            .par_iter()
            .enumerate()
            .map(|(ci, cfg)| {
                let mut warm: Option<Vec<f64>> = None;
                values
                    .iter()
                    .enumerate()
                    .map(|(vi, v)| {
                        let res = run_cell(
                            &spec.problem,
                            pname.zip(*v),
                            cfg,
                            &spec.initial,
                            spec.seed,
                            warm.as_deref(),
                        );
                        if let Ok(rep) = &res {
                            if rep.converged() {
                                warm = Some(rep.final_x.clone());
                            }
                        }
                        make_cell(vi * nconf + ci, *v, ci, cfg, res)
                    })
                    .collect()
            })
            .collect();
        let mut all: Vec<Cell> = per_config.into_iter().flatten().collect();
        all.sort_by_key(|c| c.index);
        all
    } else {
        (0..values.len() * nconf)
            .into_par_iter()
            .map(|idx| {
                let (vi, ci) = (idx / nconf, idx % nconf);
                let cfg = &spec.configs[ci];
                let res = run_cell(&spec.problem, pname.zip(values[vi]), cfg, &spec.initial, spec.seed, None);
                make_cell(idx, values[vi], ci, cfg, res)
            })
            .collect()
    };

    Ok(ExperimentOutcome {
        problem: spec.problem.to_string(),
        sweep_parameter: pname.map(str::to_string),
        onsets: if spec.sweep.is_some() { onsets(spec, &cells) } else { Vec::new() },
        cells,
    })
}

fn make_cell(
    index: usize,
    parameter: Option<f64>,
    config_index: usize,
    cfg: &SolverConfig,
    res: Result<ConvergenceReport, String>,
) -> Cell {
    let (report, error) = match res {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e)),
    };
    Cell {
        index,
        parameter,
        config_index,
        label: cfg.label(),
        report,
        error,
    }
}

/// Formats a float with 17 significant digits; empty for `None`.
pub fn fmt_float(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.16e}"),
        Some(x) if x.is_nan() => "nan".into(),
        Some(x) if x > 0.0 => "inf".into(),
        Some(_) => "-inf".into(),
        None => String::new(),
    }
}

/// One row of a history block, mirroring the CSV columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub k: usize,
    pub residual_norm: f64,
    pub step_norm: f64,
    pub gamma: Option<Vec<f64>>,
    pub lambda: Option<f64>,
    pub eta: Option<f64>,
    pub r_used: Option<f64>,
    pub beta: Option<f64>,
    pub theta: Option<f64>,
    pub theta_lambda: Option<f64>,
    pub decision: Option<String>,
    pub q: Option<f64>,
}

/// One row per record, plus a final row for the terminal step (only `k`,
/// norms, `eta`, `r_used` and `q` set).
pub fn history_rows(report: &ConvergenceReport) -> Vec<HistoryRow> {
    let norms = report.step_norms();
    let eligible = |v: f64| v > 0.0 && v < 1.0;
    let q: Vec<Option<f64>> = (0..norms.len())
        .map(|i| (i > 0 && eligible(norms[i - 1]) && eligible(norms[i])).then(|| norms[i].ln() / norms[i - 1].ln()))
        .collect();
    let mut rows: Vec<HistoryRow> = report
        .records
        .iter()
        .zip(&q)
        .map(|(r, q)| HistoryRow {
            k: r.k,
            residual_norm: r.residual_norm,
            step_norm: r.step_norm,
            gamma: r.gamma.clone(),
            lambda: r.lambda,
            eta: r.eta,
            r_used: r.r_used,
            beta: r.beta,
            theta: r.theta,
            theta_lambda: r.theta_lambda,
            decision: r.gamma.as_ref().map(|_| r.decision.as_str().to_string()),
            q: *q,
        })
        .collect();
    if let Some(t) = report.terminal {
        rows.push(HistoryRow {
            k: t.k,
            residual_norm: report.final_residual_norm,
            step_norm: t.step_norm,
            gamma: None,
            lambda: None,
            eta: t.eta,
            r_used: t.r_used,
            beta: None,
            theta: None,
            theta_lambda: None,
            decision: None,
            q: q.last().copied().flatten(),
        });
    }
    rows
}

/// Serializes a report's history as CSV (header plus one row per step) or
/// as a JSON array of row objects.
pub fn emit_history(report: &ConvergenceReport, format: OutputFormat) -> Result<String, HarnessError> {
    let rows = history_rows(report);
    match format {
        OutputFormat::Json => Ok(serde_json::to_string_pretty(&rows)? + "\n"),
        OutputFormat::Csv => {
            let mut out = HISTORY_COLUMNS.join(",");
            out.push('\n');
            for r in &rows {
                let gamma = r
                    .gamma
                    .as_ref()
                    .map(|g| g.iter().map(|v| fmt_float(Some(*v))).collect::<Vec<_>>().join(";"))
                    .unwrap_or_default();
                let fields = [
                    r.k.to_string(),
                    fmt_float(Some(r.residual_norm)),
                    fmt_float(Some(r.step_norm)),
                    gamma,
                    fmt_float(r.lambda),
                    fmt_float(r.eta),
                    fmt_float(r.r_used),
                    fmt_float(r.beta),
                    fmt_float(r.theta),
                    fmt_float(r.theta_lambda),
                    r.decision.clone().unwrap_or_default(),
                    fmt_float(r.q),
                ];
                out.push_str(&fields.join(","));
                out.push('\n');
            }
            Ok(out)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub cell: usize,
    pub parameter: Option<f64>,
    pub config: String,
    pub status: String,
    pub iterations: Option<usize>,
    pub q_term: Option<f64>,
    pub final_residual: Option<f64>,
}

pub fn summary_rows(outcome: &ExperimentOutcome) -> Vec<SummaryRow> {
    outcome
        .cells
        .iter()
        .map(|c| SummaryRow {
            cell: c.index,
            parameter: c.parameter,
            config: c.label.clone(),
            status: c
                .status()
                .map(|s| s.as_str().to_string())
                .unwrap_or_else(|| "error".to_string()),
            iterations: c.report.as_ref().map(|r| r.iterations),
            q_term: c.report.as_ref().and_then(|r| r.q_term),
            final_residual: c.report.as_ref().map(|r| r.final_residual_norm),
        })
        .collect()
}

pub fn emit_summary(outcome: &ExperimentOutcome, format: OutputFormat) -> Result<String, HarnessError> {
    let rows = summary_rows(outcome);
    match format {
        OutputFormat::Json => Ok(serde_json::to_string_pretty(&rows)? + "\n"),
        OutputFormat::Csv => {
            let mut out = String::from("cell,parameter,config,status,iterations,q_term,final_residual\n");
            for r in &rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    r.cell,
                    fmt_float(r.parameter),
                    r.config,
                    r.status,
                    r.iterations.map(|v| v.to_string()).unwrap_or_default(),
                    fmt_float(r.q_term),
                    fmt_float(r.final_residual),
                );
            }
            Ok(out)
        }
    }
}

pub fn emit_onsets(outcome: &ExperimentOutcome, format: OutputFormat) -> Result<String, HarnessError> {
    match format {
        OutputFormat::Json => Ok(serde_json::to_string_pretty(&outcome.onsets)? + "\n"),
        OutputFormat::Csv => {
            let mut out = String::from("config,largest_converged,first_failure\n");
            for o in &outcome.onsets {
                let _ = writeln!(
                    out,
                    "{},{},{}",
                    o.label,
                    fmt_float(o.largest_converged),
                    fmt_float(o.first_failure)
                );
            }
            Ok(out)
        }
    }
}

/// Human-readable summary table.
pub fn render_summary(outcome: &ExperimentOutcome) -> String {
    let mut out = String::new();
    let pname = outcome.sweep_parameter.as_deref().unwrap_or("-");
    let _ = writeln!(out, "problem: {}", outcome.problem);
    let _ = writeln!(
        out,
        "{:>5} {:>10} {:<28} {:<18} {:>6} {:>8} {:>12}",
        "cell", pname, "config", "status", "iters", "q_term", "residual"
    );
    for r in summary_rows(outcome) {
        let _ = writeln!(
            out,
            "{:>5} {:>10} {:<28} {:<18} {:>6} {:>8} {:>12}",
            r.cell,
            r.parameter.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into()),
            r.config,
            r.status,
            r.iterations.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
            r.q_term.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into()),
            r.final_residual.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into()),
        );
    }
    if !outcome.onsets.is_empty() {
        let _ = writeln!(out, "\n{:<28} {:>18} {:>14}", "config", "largest_converged", "first_failure");
        for o in &outcome.onsets {
            let _ = writeln!(
                out,
                "{:<28} {:>18} {:>14}",
                o.label,
                o.largest_converged.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into()),
                o.first_failure.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into()),
            );
        }
    }
    out
}

/// Writes `summary.<ext>`, `onsets.<ext>` (sweeps only) and one
/// `history_<cell>.<ext>` per cell with a report into `dir`. Returns the
/// written paths in order.
pub fn write_outputs(
    outcome: &ExperimentOutcome,
    format: OutputFormat,
    dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir)?;
    let ext = format.extension();
    let mut written = Vec::new();
    let summary = dir.join(format!("summary.{ext}"));
    fs::write(&summary, emit_summary(outcome, format)?)?;
    written.push(summary);
    if !outcome.onsets.is_empty() {
        let path = dir.join(format!("onsets.{ext}"));
        fs::write(&path, emit_onsets(outcome, format)?)?;
        written.push(path);
    }
    for cell in &outcome.cells {
        if let Some(rep) = &cell.report {
            let path = dir.join(format!("history_{:04}.{ext}", cell.index));
            fs::write(&path, emit_history(rep, format)?)?;
            written.push(path);
        }
    }
    Ok(written)
}
