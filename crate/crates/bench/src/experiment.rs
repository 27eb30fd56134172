//! Experiment configs and the runner that turns one into `results.json` and
//! `metrics.csv`.
//!
//! Config schema (JSON):
//!
//! ```json
//! {
//!   "generator": { "n": 50, "m": 25, "k_sparse": 5, "sigma": 0.01, "cond": 10,
//!                  "seed": 7, "inner": {"kind": "none"}, "outer": {"kind": "l1"} },
//!   "instances": 10,
//!   "methods": [
//!     { "method": "italex-pg", "eps_target": 1e-6, "eps1": 0.1 },
//!     { "method": "italex-gcg", "eps_target": 1e-6, "eps1": 0.1 },
//!     { "method": "italex-smooth", "eps_target": 1e-6, "eps1": 0.1, "rule": "pg" },
//!     { "method": "bigsam", "delta": 0.001, "label": "bigsam-1e-3" },
//!     { "method": "irpg" }
//!   ],
//!   "iterations": 2000,
//!   "snapshot_period": 50,
//!   "time_limit_ms": null,
//!   "time_grid": null,
//!   "reference_tol": 1e-10,
//!   "output_dir": "out",
//!   "jobs": 1
//! }
//! ```
//!
//! `iterations` is the shared step budget. Setting `time_limit_ms` switches
//! to wall-clock mode: every method also stops at that limit and metrics are
//! reported on a millisecond grid, so results then depend on the machine.

use std::path::{Path, PathBuf};

use italex_core::baselines::{run_baseline, BaselineConfig, BaselineMethod};
use italex_core::italex::{italex_ct, italex_smooth, SolveOptions, SolveReport};
use italex_core::{BilevelInstance, StepRule};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::generate::{generate, GeneratorSpec};
use crate::metrics::{compute_metrics, LabeledRun, MetricSeries, TimeAxis};
use crate::reference::reference_phi_star;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_coeff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl BaselineParams {
    pub fn config(&self, method: BaselineMethod) -> BaselineConfig {
        let base = match method {
            BaselineMethod::Bigsam => BaselineConfig::bigsam(),
            BaselineMethod::Irpg => BaselineConfig::irpg(),
        };
        BaselineConfig {
            s: self.s,
            t: self.t,
            alpha_coeff: self.alpha_coeff.unwrap_or(base.alpha_coeff),
            lambda0: self.lambda0,
            delta: self.delta,
            ..base
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum MethodKind {
    ItalexPg {
        eps_target: f64,
        eps1: f64,
    },
    ItalexGcg {
        eps_target: f64,
        eps1: f64,
    },
    ItalexSmooth {
        eps_target: f64,
        eps1: f64,
        #[serde(default = "default_rule")]
        rule: StepRule,
    },
    Bigsam(BaselineParams),
    Irpg(BaselineParams),
}

fn default_rule() -> StepRule {
    StepRule::Pg
}

impl MethodKind {
    pub fn name(&self) -> &'static str {
        match self {
            MethodKind::ItalexPg { .. } => "italex-pg",
            MethodKind::ItalexGcg { .. } => "italex-gcg",
            MethodKind::ItalexSmooth { .. } => "italex-smooth",
            MethodKind::Bigsam(_) => "bigsam",
            MethodKind::Irpg(_) => "irpg",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    /// Column label in the outputs; defaults to the method name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(flatten)]
    pub kind: MethodKind,
}

impl MethodSpec {
    pub fn new(kind: MethodKind) -> Self {
        Self { label: None, kind }
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.kind.name().to_string())
    }
}

/// Runs one method on one instance. ITALEX runs stop at convergence or after
/// `iterations` steps; baselines always run exactly `iterations` steps, so
/// they need a budget.
pub fn run_method(
    instance: &BilevelInstance,
    method: &MethodKind,
    iterations: Option<usize>,
    snapshot_period: usize,
    time_limit_ms: Option<f64>,
) -> Result<SolveReport> {
    let italex = |rule, eps_target, eps1, smooth: bool| -> Result<SolveReport> {
        let mut opts = SolveOptions::new(rule, eps_target, eps1);
        opts.iteration_budget = iterations;
        opts.snapshot_period = snapshot_period;
        opts.time_limit_ms = time_limit_ms;
        Ok(if smooth {
            italex_smooth(instance, &opts)?
        } else {
            italex_ct(instance, &opts)?
        })
    };
    match method {
        MethodKind::ItalexPg { eps_target, eps1 } => italex(StepRule::Pg, *eps_target, *eps1, false),
        MethodKind::ItalexGcg { eps_target, eps1 } => italex(StepRule::Gcg, *eps_target, *eps1, false),
        MethodKind::ItalexSmooth { eps_target, eps1, rule } => italex(*rule, *eps_target, *eps1, true),
        MethodKind::Bigsam(p) | MethodKind::Irpg(p) => {
            let kind = if matches!(method, MethodKind::Bigsam(_)) {
                BaselineMethod::Bigsam
            } else {
                BaselineMethod::Irpg
            };
            let mut cfg = p.config(kind);
            cfg.time_limit_ms = time_limit_ms;
            let iterations = iterations.ok_or_else(|| BenchError::invalid("baselines need an iteration budget"))?;
            Ok(run_baseline(instance, &cfg, None, iterations, snapshot_period)?)
        }
    }
}

fn default_period() -> usize {
    50
}

fn default_reference_tol() -> f64 {
    1e-10
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_jobs() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub generator: GeneratorSpec,
    pub instances: usize,
    pub methods: Vec<MethodSpec>,
    /// Step budget shared by every method.
    pub iterations: usize,
    #[serde(default = "default_period")]
    pub snapshot_period: usize,
    #[serde(default)]
    pub time_limit_ms: Option<f64>,
    /// Defaults to every snapshot period up to the budget (or 50 equal steps
    /// of the time limit).
    #[serde(default)]
    pub time_grid: Option<Vec<f64>>,
    #[serde(default = "default_reference_tol")]
    pub reference_tol: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| BenchError::invalid(format!("experiment config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| BenchError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn axis(&self) -> TimeAxis {
        if self.time_limit_ms.is_some() {
            TimeAxis::WallClockMs
        } else {
            TimeAxis::Iterations
        }
    }

    pub fn grid(&self) -> Vec<f64> {
        if let Some(g) = &self.time_grid {
            return g.clone();
        }
        if let Some(limit) = self.time_limit_ms {
            return (0..=50).map(|i| limit * i as f64 / 50.0).collect();
        }
        let period = self.snapshot_period.max(1);
        let mut g: Vec<f64> = (0..=self.iterations).step_by(period).map(|k| k as f64).collect();
        if self.iterations % period != 0 {
            g.push(self.iterations as f64);
        }
        g
    }

    fn check(&self) -> Result<()> {
        if self.instances == 0 {
            return Err(BenchError::invalid("instance count must be positive"));
        }
        if self.methods.is_empty() {
            return Err(BenchError::invalid("method list is empty"));
        }
        if self.jobs == 0 {
            return Err(BenchError::invalid("jobs must be positive"));
        }
        let mut labels: Vec<String> = self.methods.iter().map(MethodSpec::label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(BenchError::invalid("method labels must be unique; set `label`"));
        }
        if let Some(t) = self.time_limit_ms {
            if !(t > 0.0 && t.is_finite()) {
                return Err(BenchError::invalid("time limit must be > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceResult {
    pub index: usize,
    pub phi_star: f64,
    pub runs: Vec<LabeledRun>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultsBundle {
    pub config: ExperimentConfig,
    pub instances: Vec<InstanceResult>,
    pub metrics: MetricSeries,
}

fn run_instance(config: &ExperimentConfig, index: usize) -> Result<InstanceResult> {
    let instance = generate(&config.generator, index as u64)?.instance;
    let phi_star = reference_phi_star(&instance, config.reference_tol)?;
    let runs = config
        .methods
        .iter()
        .map(|m| {
            log::info!("instance {index}: {}", m.label());
            let report = run_method(
                &instance,
                &m.kind,
                Some(config.iterations),
                config.snapshot_period,
                config.time_limit_ms,
            )?;
            Ok(LabeledRun {
                label: m.label(),
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InstanceResult { index, phi_star, runs })
}

/// Generates the instances, runs every method on each (instances in
/// parallel on `jobs` threads) and aggregates the metrics. Writes nothing.
pub fn execute(config: &ExperimentConfig) -> Result<ResultsBundle> {
    config.check()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| BenchError::invalid(format!("thread pool: {e}")))?;
    let instances = pool.install(|| {
        (0..config.instances)
            .into_par_iter()
            .map(|i| run_instance(config, i))
            .collect::<Result<Vec<_>>>()
    })?;
    let runs: Vec<Vec<LabeledRun>> = instances.iter().map(|r| r.runs.clone()).collect();
    let phi_star: Vec<f64> = instances.iter().map(|r| r.phi_star).collect();
    let metrics = compute_metrics(&runs, &phi_star, &config.grid(), config.axis())?;
    Ok(ResultsBundle {
        config: config.clone(),
        instances,
        metrics,
    })
}

/// [`execute`], then writes `results.json` and `metrics.csv` into the
/// configured output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultsBundle> {
    let bundle = execute(config)?;
    write_bundle(&bundle, &config.output_dir)?;
    Ok(bundle)
}

pub fn write_bundle(bundle: &ResultsBundle, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    let results = dir.join("results.json");
    let json = serde_json::to_string_pretty(bundle).map_err(|source| BenchError::Json {
        path: results.clone(),
        source,
    })?;
    std::fs::write(&results, json).map_err(|e| BenchError::io(&results, e))?;
    let csv = dir.join("metrics.csv");
    std::fs::write(&csv, bundle.metrics.to_csv()).map_err(|e| BenchError::io(&csv, e))?;
    Ok(())
}
