//! `nasolve`: run Newton / Newton-Anderson experiments from the command line.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use newton_anderson::harness::{emit_history, render_summary, write_outputs};
use newton_anderson::linalg::norm2;
use newton_anderson::oracle::{check_jacobian, fold_sweep, gamma_grid_oracle, safeguard_case_oracle};
use newton_anderson::solver::{anderson_gamma_1, gamma_safeguard};
use newton_anderson::{
    run_experiment, Activation, ExperimentOutcome, ExperimentSpec, InitialIterate, Linesearch, Method,
    OutputFormat, ProblemSpec, SolverConfig, Sweep,
};

#[derive(Parser, Debug)]
#[command(name = "nasolve", version, about = "Newton and safeguarded Newton-Anderson solver experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve once with a single method and print its iteration history.
    Solve(RunArgs),
    /// Run several methods on the same problem and print a summary table.
    Compare(RunArgs),
    /// Sweep one problem parameter over a grid for every method.
    Sweep(RunArgs),
    /// Run the built-in oracle checks against the solver kernels.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// Built-in problem id (singular_quadratic, chandrasekhar, bratu1d).
    #[arg(long, default_value = "singular_quadratic")]
    problem: String,
    /// Problem parameter as name=value; repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    params: Vec<String>,
    /// newton, na, na(M), gna, gna(R), agna, agna(RHAT); repeatable.
    #[arg(long = "method", value_name = "METHOD")]
    methods: Vec<String>,
    /// Anderson depth for bare `na`.
    #[arg(long)]
    m: Option<usize>,
    /// Adaptive ceiling for bare `agna`.
    #[arg(long)]
    rhat: Option<f64>,
    /// Fixed safeguard parameter for bare `gna`.
    #[arg(long)]
    r: Option<f64>,
    #[arg(long, value_enum)]
    activation: Option<ActivationArg>,
    /// Step-norm threshold for asymptotic activation.
    #[arg(long)]
    threshold: Option<f64>,
    /// For na(M): switch to adaptive m = 1 once the step norm drops below this.
    #[arg(long = "switch-m1-at")]
    switch_m1_at: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    /// Backtrack every step with an Armijo linesearch.
    #[arg(long)]
    armijo: bool,
    /// zero, ones, default, perturbed:INDEX:VALUE or random:SCALE.
    #[arg(long, default_value = "default")]
    x0: String,
    /// name:start:end:step.
    #[arg(long)]
    sweep: Option<String>,
    /// Start each sweep value from the previous converged solution.
    #[arg(long = "warm-start")]
    warm_start: bool,
    /// Directory for summary and history files.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Read the whole experiment from a JSON file; other run flags are ignored.
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Random samples for the coefficient and safeguard checks.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip the (slower) fold continuation check.
    #[arg(long = "skip-fold")]
    skip_fold: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ActivationArg {
    Always,
    Preasymptotic,
    Asymptotic,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

/// Parses `name` or `name(value)`.
fn parse_method(text: &str, args: &RunArgs) -> Result<SolverConfig> {
    let text = text.trim();
    let (name, inner) = match text.split_once('(') {
        Some((n, rest)) => {
            let inner = rest
                .strip_suffix(')')
                .with_context(|| format!("unbalanced parentheses in method `{text}`"))?;
            (n, Some(inner))
        }
        None => (text, None),
    };
    let method: Method = name.parse()?;
    let mut cfg = match method {
        Method::Newton => {
            if inner.is_some() {
                bail!("newton takes no argument");
            }
            SolverConfig::newton()
        }
        Method::Na => {
            let m = match inner {
                Some(v) => v.parse().with_context(|| format!("bad depth in `{text}`"))?,
                None => args.m.unwrap_or(1),
            };
            SolverConfig::na(m)
        }
        Method::Gna => {
            let r = match inner {
                Some(v) => v.parse().with_context(|| format!("bad r in `{text}`"))?,
                None => args.r.unwrap_or(0.5),
            };
            SolverConfig::gna(r)
        }
        Method::Agna => {
            let r_hat = match inner {
                Some(v) => v.parse().with_context(|| format!("bad r_hat in `{text}`"))?,
                None => args.rhat.unwrap_or(0.5),
            };
            SolverConfig::agna(r_hat)
        }
    };
    if let Some(a) = args.activation {
        cfg.activation = match a {
            ActivationArg::Always => Activation::Always,
            ActivationArg::Preasymptotic => Activation::Preasymptotic,
            ActivationArg::Asymptotic => Activation::Asymptotic(
                args.threshold
                    .unwrap_or(newton_anderson::solver::DEFAULT_ACTIVATION_THRESHOLD),
            ),
        };
    } else if args.threshold.is_some() {
        bail!("--threshold needs --activation asymptotic");
    }
    if let Some(t) = args.switch_m1_at {
        if method == Method::Na {
            cfg = cfg.with_switch_to_m1_at(t, args.rhat.unwrap_or(0.5));
        }
    }
    if let Some(t) = args.tol {
        cfg = cfg.with_tol(t);
    }
    if let Some(n) = args.max_iter {
        cfg = cfg.with_max_iter(n);
    }
    if args.armijo {
        cfg = cfg.with_linesearch(Linesearch::armijo());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn build_spec(args: &RunArgs) -> Result<ExperimentSpec> {
    if let Some(path) = &args.spec {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let spec: ExperimentSpec =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        spec.validate()?;
        return Ok(spec);
    }
    let mut problem = ProblemSpec::new(args.problem.clone());
    for p in &args.params {
        let (k, v) = p
            .split_once('=')
            .with_context(|| format!("--param expects name=value, got `{p}`"))?;
        let v: f64 = v.parse().with_context(|| format!("bad value in --param `{p}`"))?;
        problem = problem.with_param(k.trim(), v);
    }
    let methods: Vec<String> = if args.methods.is_empty() {
        vec!["agna".into()]
    } else {
        args.methods.clone()
    };
    let configs = methods
        .iter()
        .map(|m| parse_method(m, args))
        .collect::<Result<Vec<_>>>()?;
    let mut spec = ExperimentSpec::new(problem, configs);
    spec.initial = args.x0.parse::<InitialIterate>()?;
    spec.sweep = args.sweep.as_deref().map(str::parse::<Sweep>).transpose()?;
    spec.warm_start = args.warm_start;
    spec.output = args.format.into();
    spec.output_path = args.output.clone();
    spec.seed = args.seed;
    spec.validate()?;
    Ok(spec)
}

fn finish(outcome: &ExperimentOutcome, spec: &ExperimentSpec) -> Result<u8> {
    if let Some(dir) = &spec.output_path {
        let written = write_outputs(outcome, spec.output, dir)?;
        eprintln!("wrote {} files to {}", written.len(), dir.display());
    }
    for cell in outcome.cells.iter().filter(|c| c.error.is_some()) {
        eprintln!("cell {} ({}): {}", cell.index, cell.label, cell.error.as_deref().unwrap_or(""));
    }
    Ok(outcome.exit_code() as u8)
}

fn run(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Solve(args) => {
            let spec = build_spec(&args)?;
            if spec.configs.len() != 1 || spec.sweep.is_some() {
                bail!("solve runs exactly one method without a sweep; use compare or sweep");
            }
            let outcome = run_experiment(&spec)?;
            let cell = &outcome.cells[0];
            match &cell.report {
                Some(rep) => {
                    print!("{}", emit_history(rep, spec.output)?);
                    eprintln!(
                        "{}: {} after {} iterations, residual {:.3e}, q_term {}",
                        rep.label,
                        rep.status,
                        rep.iterations,
                        rep.final_residual_norm,
                        rep.q_term.map(|q| format!("{q:.3}")).unwrap_or_else(|| "-".into())
                    );
                }
                None => eprintln!("{}: {}", cell.label, cell.error.as_deref().unwrap_or("failed")),
            }
            finish(&outcome, &spec)
        }
        Command::Compare(args) => {
            let spec = build_spec(&args)?;
            let outcome = run_experiment(&spec)?;
            print!("{}", render_summary(&outcome));
            finish(&outcome, &spec)
        }
        Command::Sweep(args) => {
            let spec = build_spec(&args)?;
            if spec.sweep.is_none() {
                bail!("sweep needs --sweep name:start:end:step");
            }
            let outcome = run_experiment(&spec)?;
            print!("{}", render_summary(&outcome));
            finish(&outcome, &spec)
        }
        Command::Verify(args) => verify(&args),
    }
}

fn verify(args: &VerifyArgs) -> Result<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut failures = 0;
    let mut report = |name: &str, ok: bool, detail: String| {
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    let mut worst: f64 = 0.0;
    for _ in 0..args.samples {
        let a = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let b = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let g = anderson_gamma_1(&a, &b);
        let grid = gamma_grid_oracle(&a, &b, (g - 1.0).floor(), (g + 1.0).ceil(), 1e-4);
        worst = worst.max((g - grid).abs());
    }
    report("gamma vs grid", worst <= 0.5e-4 + 1e-9, format!("max gap {worst:.2e}"));

    let mut worst: f64 = 0.0;
    for _ in 0..args.samples {
        let gamma = rng.gen_range(-3.0..3.0);
        let r = rng.gen_range(1e-6..1.0);
        let w_prev = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let w_next = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        if norm2(&w_prev) == 0.0 {
            continue;
        }
        let d = gamma_safeguard(&w_next, &w_prev, gamma, r);
        let beta = d.beta.unwrap_or(f64::NAN);
        worst = worst.max((d.lambda - safeguard_case_oracle(gamma, beta)).abs());
    }
    report("safeguard vs case oracle", worst <= 1e-14, format!("max |Δλ| {worst:.1e}"));

    for id in newton_anderson::problem::PROBLEM_IDS {
        let mut spec = ProblemSpec::new(id);
        if id != "singular_quadratic" {
            spec = spec.with_param("n", 20.0);
        }
        let p = spec.build()?;
        let x: Vec<f64> = p.default_initial().iter().map(|v| v + 0.1 * rng.gen_range(-1.0..1.0)).collect();
        let d = check_jacobian(&*p, &x, 1e-6);
        report(&format!("jacobian {id}"), d <= 1e-4, format!("max discrepancy {d:.2e}"));
    }

    if !args.skip_fold {
        let fold = fold_sweep(200, 3.4, 3.6, 1e-3);
        let ok = fold.is_some_and(|f| (3.51..=3.52).contains(&f));
        report("bratu fold (n=200)", ok, format!("{fold:?}"));
    }
    Ok(if failures == 0 { 0 } else { 2 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
