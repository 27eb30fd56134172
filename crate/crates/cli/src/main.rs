//! `italex`: solve bilevel instances, run benchmark experiments, validate
//! error-bound constants and emit regularization paths.
//!
//! Exit codes: 0 success, 1 validation failure or numerical breakdown,
//! 2 configuration error, 3 solver budget exhausted, 4 unsupported
//! method/geometry pairing. Errors print one line starting with `error:`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use italex_bench::experiment::{run_method, BaselineParams};
use italex_bench::generate::standard_outer_functions;
use italex_bench::path::halving_lambdas;
use italex_bench::{generate, regularization_path, BenchError, ExperimentConfig, GeneratorSpec, MethodKind};
use italex_core::geometry::validate_error_bound;
use italex_core::model::InstanceDescription;
use italex_core::{BilevelInstance, SolverError, StepRule};

#[derive(Parser)]
#[command(name = "italex", version, about = "Level-set expansion solvers for simple bilevel problems")]
struct Cli {
    /// Raise log verbosity (-v info, -vv debug). ITALEX_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    ItalexPg,
    ItalexGcg,
    ItalexSmooth,
    Bigsam,
    Irpg,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Pg,
    Gcg,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance (an instance JSON or a generator spec JSON).
    Solve {
        instance: PathBuf,
        #[arg(long, value_enum, default_value = "italex-pg")]
        method: Method,
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
        #[arg(long, default_value_t = 0.1)]
        eps1: f64,
        /// Step rule of the smooth variant.
        #[arg(long, value_enum, default_value = "pg")]
        rule: Rule,
        /// Overrides the generator seed when the input is a generator spec.
        #[arg(long)]
        seed: Option<u64>,
        /// Step budget (ITALEX) or iteration count (baselines).
        #[arg(long)]
        budget: Option<usize>,
        /// Huber smoothing for baselines on a nonsmooth outer function.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = 50)]
        snapshot_period: usize,
        /// Where to write the report JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment config; writes results.json and metrics.csv.
    Bench {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the error-bound constants of the shipped outer functions.
    Validate {
        /// One of l1, ellipsoid, elastic-net-k1, elastic-net-k2,
        /// strongly-convex, or all.
        #[arg(long, default_value = "all")]
        geometry: String,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 5)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regularization path as CSV (lambda,phi_gap,omega).
    Path {
        instance: PathBuf,
        /// Comma-separated λ values; default λ_max(AᵀA)/2^ℓ, ℓ = 1..depth.
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
        #[arg(long, default_value_t = 25)]
        depth: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Solver(SolverError),
    Validation(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(SolverError::InvalidArgument(_)) => 2,
            CliError::Solver(SolverError::BudgetExhausted { .. }) => 3,
            CliError::Solver(SolverError::UnsupportedConfiguration(_)) => 4,
            CliError::Solver(SolverError::NumericalInconsistency(_)) => 1,
            CliError::Validation(_) => 1,
        }
    }

    fn line(&self) -> String {
        let (kind, msg) = match self {
            CliError::Config(m) => ("config", m.clone()),
            CliError::Solver(e @ SolverError::InvalidArgument(_)) => ("config", e.to_string()),
            CliError::Solver(e @ SolverError::BudgetExhausted { .. }) => ("budget", e.to_string()),
            CliError::Solver(e @ SolverError::UnsupportedConfiguration(_)) => ("unsupported", e.to_string()),
            CliError::Solver(e) => ("numerical", e.to_string()),
            CliError::Validation(m) => ("validation", m.clone()),
        };
        format!("error: {kind}: {}", msg.replace('\n', " "))
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        CliError::Solver(e)
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Solver(s) => CliError::Solver(s),
            other => CliError::Config(other.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Accepts an instance description or a generator spec (instance 0 of the
/// family).
fn load_instance(path: &Path, seed: Option<u64>) -> CliResult<BilevelInstance> {
    let text = read(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if value.get("a").is_some() {
        let desc: InstanceDescription =
            serde_json::from_value(value).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        return Ok(desc.build()?);
    }
    let mut spec: GeneratorSpec =
        serde_json::from_value(value).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    Ok(generate(&spec, 0)?.instance)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.6e}"))
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    instance: &Path,
    method: Method,
    eps: f64,
    eps1: f64,
    rule: Rule,
    seed: Option<u64>,
    budget: Option<usize>,
    delta: Option<f64>,
    snapshot_period: usize,
    out: Option<&Path>,
) -> CliResult<()> {
    if !(eps > 0.0) || !(eps1 > 0.0) {
        return Err(CliError::Config("--eps and --eps1 must be > 0".into()));
    }
    let inst = load_instance(instance, seed)?;
    let baseline = BaselineParams {
        delta,
        ..Default::default()
    };
    let kind = match method {
        Method::ItalexPg => MethodKind::ItalexPg { eps_target: eps, eps1 },
        Method::ItalexGcg => MethodKind::ItalexGcg { eps_target: eps, eps1 },
        Method::ItalexSmooth => MethodKind::ItalexSmooth {
            eps_target: eps,
            eps1,
            rule: match rule {
                Rule::Pg => StepRule::Pg,
                Rule::Gcg => StepRule::Gcg,
            },
        },
        Method::Bigsam => MethodKind::Bigsam(baseline),
        Method::Irpg => MethodKind::Irpg(baseline),
    };
    let iterations = match (&kind, budget) {
        (MethodKind::Bigsam(_) | MethodKind::Irpg(_), None) => Some(10_000),
        (_, b) => b,
    };
    let report = run_method(&inst, &kind, iterations, snapshot_period, None)?;
    if let Some(path) = out {
        write(path, &report.to_json())?;
    }
    let f = &report.final_summary;
    println!(
        "method={} status={:?} phi={:.6e} omega={:.6e} alpha={} oracle_calls={} steps={}",
        report.config.method,
        report.status,
        f.phi,
        f.omega,
        fmt_opt(f.alpha),
        f.oracle_calls,
        f.step_iterations
    );
    Ok(())
}

fn cmd_bench(
    config: &Path,
    seed: Option<u64>,
    budget: Option<usize>,
    instances: Option<usize>,
    jobs: Option<usize>,
    out: Option<PathBuf>,
) -> CliResult<()> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(s) = seed {
        cfg.generator.seed = s;
    }
    if let Some(b) = budget {
        cfg.iterations = b;
    }
    if let Some(i) = instances {
        cfg.instances = i;
    }
    if let Some(j) = jobs {
        cfg.jobs = j;
    }
    if let Some(o) = out {
        cfg.output_dir = o;
    }
    let bundle = italex_bench::run_experiment(&cfg)?;
    for m in &cfg.methods {
        let label = m.label();
        if let Some(r) = bundle.metrics.last(&label) {
            println!("{label}: t={} delta_phi={:e} delta_omega={:e}", r.t, r.delta_phi, r.delta_omega);
        }
    }
    println!("wrote {}", cfg.output_dir.display());
    Ok(())
}

fn cmd_validate(geometry: &str, samples: usize, dim: usize, seed: u64, out: Option<&Path>) -> CliResult<()> {
    let all = standard_outer_functions(dim)?;
    let chosen: Vec<_> = all
        .into_iter()
        .filter(|(name, _)| geometry == "all" || name == geometry)
        .collect();
    if chosen.is_empty() {
        return Err(CliError::Config(format!("unknown geometry {geometry}")));
    }
    let mut reports = Vec::new();
    let mut failed = Vec::new();
    for (name, outer) in &chosen {
        let r = validate_error_bound(outer, dim, samples, seed)?;
        println!(
            "{name}: kappa={} gamma={:.6} samples={} max_violation={:.3e} {}",
            r.kappa,
            r.gamma,
            r.samples,
            r.max_violation,
            if r.passed() { "PASS" } else { "FAIL" }
        );
        if !r.passed() {
            failed.push(name.clone());
        }
        reports.push(serde_json::json!({ "geometry": name, "report": r }));
    }
    if let Some(path) = out {
        write(path, &serde_json::to_string_pretty(&reports).expect("reports serialize"))?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("error bound violated for {}", failed.join(", "))))
    }
}

fn cmd_path(
    instance: &Path,
    lambdas: Option<Vec<f64>>,
    depth: usize,
    tol: f64,
    seed: Option<u64>,
    out: Option<&Path>,
) -> CliResult<()> {
    let inst = load_instance(instance, seed)?;
    let lambdas = lambdas.unwrap_or_else(|| halving_lambdas(&inst, depth));
    let path = regularization_path(&inst, &lambdas, tol)?;
    let mut csv = String::from("lambda,phi_gap,omega\n");
    for p in &path {
        csv.push_str(&format!("{:e},{:e},{:e}\n", p.lambda, p.phi_gap, p.omega));
    }
    match out {
        Some(p) => write(p, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Solve {
            instance,
            method,
            eps,
            eps1,
            rule,
            seed,
            budget,
            delta,
            snapshot_period,
            out,
        } => cmd_solve(
            &instance,
            method,
            eps,
            eps1,
            rule,
            seed,
            budget,
            delta,
            snapshot_period,
            out.as_deref(),
        ),
        Command::Bench {
            config,
            seed,
            budget,
            instances,
            jobs,
            out,
        } => cmd_bench(&config, seed, budget, instances, jobs, out),
        Command::Validate {
            geometry,
            samples,
            dim,
            seed,
            out,
        } => cmd_validate(&geometry, samples, dim, seed, out.as_deref()),
        Command::Path {
            instance,
            lambdas,
            depth,
            tol,
            seed,
            out,
        } => cmd_path(&instance, lambdas, depth, tol, seed, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("bad arguments").trim_start_matches("error: ");
            eprintln!("error: config: {first}");
            return ExitCode::from(2);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ITALEX_LOG", level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.code())
        }
    }
}
