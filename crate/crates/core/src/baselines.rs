//! Reference methods: BiG-SAM (sequential averaging of an outer gradient step
//! and an inner prox-gradient step) and IR-PG (prox-gradient on φ + λ_k·ω with
//! λ_k ↓ 0). Both need a smooth outer function; nonsmooth ω is replaced by a
//! Huber smoothing when a smoothing parameter δ is configured.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};
use crate::geometry::OuterGeometry;
use crate::italex::{FinalSummary, ReportConfig, SolveReport, SolveStatus, Snapshot};
use crate::model::BilevelInstance;
use crate::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    Bigsam,
    Irpg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub method: BaselineMethod,
    /// Outer stepsize; defaults to `1/L_ω̃`.
    #[serde(default)]
    pub s: Option<f64>,
    /// Inner stepsize; defaults to `1/L_f`.
    #[serde(default)]
    pub t: Option<f64>,
    /// `α_k = min{1, c/k}`.
    #[serde(default = "default_alpha_coeff")]
    pub alpha_coeff: f64,
    /// `λ_k = λ₀/k`; defaults to `λ₀ = L_f`.
    #[serde(default)]
    pub lambda0: Option<f64>,
    /// Huber smoothing parameter for nonsmooth outer functions.
    #[serde(default)]
    pub delta: Option<f64>,
    /// Stop early after this many wall-clock milliseconds.
    #[serde(default)]
    pub time_limit_ms: Option<f64>,
}

fn default_alpha_coeff() -> f64 {
    2.0
}

impl BaselineConfig {
    pub fn bigsam() -> Self {
        Self {
            method: BaselineMethod::Bigsam,
            s: None,
            t: None,
            alpha_coeff: default_alpha_coeff(),
            lambda0: None,
            delta: None,
            time_limit_ms: None,
        }
    }

    pub fn irpg() -> Self {
        Self {
            method: BaselineMethod::Irpg,
            ..Self::bigsam()
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    pub fn name(&self) -> &'static str {
        match self.method {
            BaselineMethod::Bigsam => "bigsam",
            BaselineMethod::Irpg => "irpg",
        }
    }
}

/// `ω̃ = H_δ + ρ‖·‖²` with the Huber function
/// `H_δ(x) = Σ x²/(2δ) + δ/2` where `|x| ≤ δ`, `|x|` elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HuberSmoothed {
    pub rho: f64,
    pub delta: f64,
}

impl HuberSmoothed {
    pub fn value(&self, x: &Vector) -> f64 {
        let h: f64 = x
            .iter()
            .map(|v| {
                let a = v.abs();
                if a <= self.delta {
                    v * v / (2.0 * self.delta) + 0.5 * self.delta
                } else {
                    a
                }
            })
            .sum();
        h + self.rho * x.norm_squared()
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        x.map(|v| (v / self.delta).clamp(-1.0, 1.0) + 2.0 * self.rho * v)
    }

    pub fn lipschitz(&self) -> f64 {
        1.0 / self.delta + 2.0 * self.rho
    }
}

/// Smoothing of `‖·‖₁ + ρ‖·‖²`.
pub fn huber_smooth_outer(rho: f64, delta: f64) -> Result<HuberSmoothed> {
    if !(delta > 0.0 && delta.is_finite()) || !(rho >= 0.0) {
        return Err(SolverError::invalid("Huber smoothing needs δ > 0 and ρ ≥ 0"));
    }
    Ok(HuberSmoothed { rho, delta })
}

/// Smooth stand-in for ω used by the baselines.
#[derive(Debug, Clone)]
pub enum SmoothOuter<'a> {
    /// ω itself, gradient `σx`.
    Quadratic { sigma: f64 },
    /// `‖x − x₀‖²_Q`, which shares its minimizers over any convex set with
    /// `‖x − x₀‖_Q`.
    SquaredEllipsoid(&'a crate::geometry::Ellipsoid),
    Huber(HuberSmoothed),
}

impl SmoothOuter<'_> {
    pub fn for_instance<'a>(instance: &'a BilevelInstance, delta: Option<f64>) -> Result<SmoothOuter<'a>> {
        match (&instance.outer.geometry, delta) {
            (OuterGeometry::StronglyConvex { sigma, .. }, _) => Ok(SmoothOuter::Quadratic { sigma: *sigma }),
            (OuterGeometry::Ellipsoid(e), _) => Ok(SmoothOuter::SquaredEllipsoid(e)),
            (OuterGeometry::ElasticNet { rho }, Some(d)) => Ok(SmoothOuter::Huber(huber_smooth_outer(*rho, d)?)),
            (OuterGeometry::L1, Some(d)) => Ok(SmoothOuter::Huber(huber_smooth_outer(0.0, d)?)),
            (g, None) => Err(SolverError::unsupported(format!(
                "outer function '{}' is nonsmooth; configure a smoothing delta",
                g.kind()
            ))),
        }
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        match self {
            SmoothOuter::Quadratic { sigma } => x * *sigma,
            SmoothOuter::SquaredEllipsoid(e) => e.squared_gradient(x),
            SmoothOuter::Huber(h) => h.gradient(x),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            SmoothOuter::Quadratic { sigma } => *sigma,
            SmoothOuter::SquaredEllipsoid(e) => 2.0 * e.lambda_max(),
            SmoothOuter::Huber(h) => h.lipschitz(),
        }
    }
}

fn check_k(k: usize) -> Result<f64> {
    if k == 0 {
        return Err(SolverError::invalid("baseline iterations are counted from k = 1"));
    }
    Ok(k as f64)
}

fn inner_step(instance: &BilevelInstance, cfg: &BaselineConfig) -> Result<f64> {
    match cfg.t {
        Some(t) if t > 0.0 => Ok(t),
        Some(t) => Err(SolverError::invalid(format!("inner stepsize must be > 0, got {t}"))),
        None if instance.lipschitz() > 0.0 => Ok(1.0 / instance.lipschitz()),
        None => Err(SolverError::invalid("L_f = 0; set the inner stepsize explicitly")),
    }
}

/// `α_k(x − s∇ω̃(x)) + (1 − α_k)·prox_{t·g}(x − t∇f(x))`.
pub fn bigsam_step(instance: &BilevelInstance, x: &Vector, k: usize, cfg: &BaselineConfig) -> Result<Vector> {
    let outer = SmoothOuter::for_instance(instance, cfg.delta)?;
    bigsam_step_with(instance, &outer, x, k, cfg)
}

fn bigsam_step_with(
    instance: &BilevelInstance,
    outer: &SmoothOuter<'_>,
    x: &Vector,
    k: usize,
    cfg: &BaselineConfig,
) -> Result<Vector> {
    let kf = check_k(k)?;
    let t = inner_step(instance, cfg)?;
    let s = cfg.s.unwrap_or_else(|| 1.0 / outer.lipschitz());
    let a = (cfg.alpha_coeff / kf).min(1.0);
    let outer_step = x - outer.gradient(x) * s;
    if a >= 1.0 {
        return Ok(outer_step);
    }
    let inner = instance.inner.prox(&(x - instance.smooth.gradient(x) * t), t);
    Ok(outer_step * a + inner * (1.0 - a))
}

/// `prox_{t·g}(x − t(∇f(x) + λ_k∇ω̃(x)))` with `t = 1/(L_f + λ_k·L_ω̃)`.
pub fn irpg_step(instance: &BilevelInstance, x: &Vector, k: usize, cfg: &BaselineConfig) -> Result<Vector> {
    let outer = SmoothOuter::for_instance(instance, cfg.delta)?;
    irpg_step_with(instance, &outer, x, k, cfg)
}

fn irpg_step_with(
    instance: &BilevelInstance,
    outer: &SmoothOuter<'_>,
    x: &Vector,
    k: usize,
    cfg: &BaselineConfig,
) -> Result<Vector> {
    let kf = check_k(k)?;
    let lambda = cfg.lambda0.unwrap_or(instance.lipschitz()) / kf;
    let t = match cfg.t {
        Some(t) => t,
        None => {
            let l = instance.lipschitz() + lambda * outer.lipschitz();
            if !(l > 0.0) {
                return Err(SolverError::invalid("stepsize undefined: L_f + λ·L_ω = 0"));
            }
            1.0 / l
        }
    };
    let g = instance.smooth.gradient(x) + outer.gradient(x) * lambda;
    Ok(instance.inner.prox(&(x - g * t), t))
}

/// Runs `iterations` baseline steps from `x0` (default: the point of dom(g)
/// closest to 0), snapshotting every `snapshot_period` iterations.
pub fn run_baseline(
    instance: &BilevelInstance,
    cfg: &BaselineConfig,
    x0: Option<&Vector>,
    iterations: usize,
    snapshot_period: usize,
) -> Result<SolveReport> {
    let outer = SmoothOuter::for_instance(instance, cfg.delta)?;
    let period = snapshot_period.max(1);
    let mut x = match x0 {
        Some(x) if x.len() == instance.dim() => x.clone(),
        Some(_) => return Err(SolverError::invalid("x0 has the wrong dimension")),
        None => instance.inner.prox(&Vector::zeros(instance.dim()), 1.0),
    };
    let start = Instant::now();
    let snap = |x: &Vector, k: usize| Snapshot {
        iteration: k,
        t_ms: start.elapsed().as_secs_f64() * 1e3,
        phi: instance.eval_phi(x),
        omega: instance.eval_omega(x),
        norm_sq: x.norm_squared(),
    };
    let mut snapshots = vec![snap(&x, 0)];
    let mut done = 0;
    for k in 1..=iterations {
        if cfg.time_limit_ms.is_some_and(|t| start.elapsed().as_secs_f64() * 1e3 >= t) {
            break;
        }
        x = match cfg.method {
            BaselineMethod::Bigsam => bigsam_step_with(instance, &outer, &x, k, cfg)?,
            BaselineMethod::Irpg => irpg_step_with(instance, &outer, &x, k, cfg)?,
        };
        done = k;
        if k % period == 0 || k == iterations {
            snapshots.push(snap(&x, k));
        }
    }
    if snapshots.last().is_some_and(|s| s.iteration != done) {
        snapshots.push(snap(&x, done));
    }
    let feas_dist = instance
        .reference
        .as_ref()
        .and_then(|r| r.omega_star)
        .map(|w| instance.level_distance(&x, w));
    let xs: Vec<f64> = x.iter().copied().collect();
    Ok(SolveReport {
        config: ReportConfig {
            method: cfg.name().to_string(),
            eps_target: None,
            eps1: None,
            alpha0: None,
            snapshot_period: period,
            iteration_budget: Some(iterations),
        },
        status: SolveStatus::BudgetReached,
        rounds: Vec::new(),
        alpha_trace: Vec::new(),
        snapshots,
        final_summary: FinalSummary {
            phi: instance.eval_phi(&x),
            omega: instance.eval_omega(&x),
            alpha: None,
            feas_dist,
            oracle_calls: 0,
            step_iterations: done,
        },
        x_final: xs.clone(),
        z_final: xs,
        oracle_log: Vec::new(),
        step_log: Vec::new(),
    })
}
