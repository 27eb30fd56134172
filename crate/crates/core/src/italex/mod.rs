//! The level-set expansion drivers.
//!
//! [`italex_ft`] alternates approximation and expansion oracles at a fixed
//! tolerance. [`italex_ct`] wraps it in rounds with halving tolerances,
//! recomputing the inner estimate φ̄ each round with [`solve_inner`].
//! [`italex_smooth`] is the same loop on the collapsed variable for `g ≡ 0`,
//! whose iterates never exceed the optimal outer value.

mod budget;
mod report;

use std::ops::ControlFlow;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use budget::{check_xi_sequence, iteration_budget, BudgetInputs, IterationBudget};
pub use report::{FinalSummary, ReportConfig, RoundRecord, SolveReport, SolveStatus, Snapshot};

use crate::apg::{fista, ApgOptions, Composite};
use crate::error::{Result, SolverError};
use crate::model::{BilevelInstance, LiftedPoint};
use crate::oracles::{
    approximation_oracle_with, expansion_oracle, expansion_oracle_smooth, OracleConfig, OracleRecord,
    DEFAULT_MAX_STEPS,
};
use crate::steps::{Formulation, StepRecord, StepRule};
use crate::Vector;

/// Knobs of the inner solver that produces φ̄.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerSolverOptions {
    /// Assumed bound on the distance from the start to some inner minimizer.
    pub radius: f64,
    pub max_iters: usize,
}

impl Default for InnerSolverOptions {
    fn default() -> Self {
        Self {
            radius: 10.0,
            max_iters: 1_000_000,
        }
    }
}

/// Result of [`solve_inner_with`].
#[derive(Debug, Clone)]
pub struct InnerSolve {
    pub u: Vector,
    pub phi_bar: f64,
    pub iterations: usize,
}

/// Accelerated proximal gradient on φ from `u0`, aiming at `φ(u) ≤ φ* + eps`.
pub fn solve_inner(instance: &BilevelInstance, u0: &Vector, eps: f64) -> Result<(Vector, f64)> {
    let r = solve_inner_with(instance, u0, eps, &InnerSolverOptions::default())?;
    Ok((r.u, r.phi_bar))
}

/// Runs FISTA for `⌈√(2·L_f·R²/eps)⌉` iterations (the textbook accelerated
/// bound with `‖u0 − x*‖ ≤ R`), stopping early once the prox-gradient
/// inequality `φ(T(y)) − φ* ≤ L‖y − T(y)‖·(‖y − u0‖ + R)` certifies `eps`.
/// Returns the best iterate.
pub fn solve_inner_with(
    instance: &BilevelInstance,
    u0: &Vector,
    eps: f64,
    opts: &InnerSolverOptions,
) -> Result<InnerSolve> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(SolverError::invalid(format!("inner tolerance must be > 0, got {eps}")));
    }
    if u0.len() != instance.dim() {
        return Err(SolverError::invalid("inner start has the wrong dimension"));
    }
    let lf = instance.lipschitz();
    if lf == 0.0 {
        // f is constant; every point of dom(g) is optimal.
        let u = instance.inner.prox(u0, 1.0);
        let phi_bar = instance.eval_phi(&u);
        return Ok(InnerSolve {
            u,
            phi_bar,
            iterations: 0,
        });
    }
    let count = (2.0 * lf * opts.radius * opts.radius / eps).sqrt().ceil();
    let max_iters = if count.is_finite() {
        (count as usize).clamp(1, opts.max_iters)
    } else {
        opts.max_iters
    };
    let smooth = |x: &Vector| instance.smooth.value_and_gradient(x);
    let objective = |x: &Vector| instance.eval_phi(x);
    let prox = |x: &Vector, t: f64| instance.inner.prox(x, t);
    let problem = Composite {
        smooth: &smooth,
        objective: &objective,
        prox: &prox,
        lipschitz: lf,
    };
    let apg = ApgOptions {
        max_iters,
        restart: false,
    };
    let radius = opts.radius;
    let r = fista(&problem, u0, &apg, &mut |s| {
        s.grad_map * ((s.y - u0).norm() + radius) <= eps
    });
    Ok(InnerSolve {
        u: r.x,
        phi_bar: r.value,
        iterations: r.iterations,
    })
}

/// Result of one fixed-tolerance run.
#[derive(Debug, Clone, PartialEq)]
pub struct FtResult {
    pub alpha_final: f64,
    pub x: Vector,
    pub z: Vector,
    pub oracle_calls: usize,
    pub step_iterations: usize,
}

/// Options shared by the changing-tolerance and smooth drivers.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub rule: StepRule,
    pub eps_target: f64,
    pub eps1: f64,
    /// Defaults to ω(0) when 0 ∈ dom(g), else inf ω.
    pub alpha0: Option<f64>,
    /// Defaults to the point of dom(g) closest to 0.
    pub x0: Option<Vector>,
    /// Defaults to the projection of `x0` onto `Lev_ω(α₀)`.
    pub z0: Option<Vector>,
    /// Defaults to `x0`.
    pub u0: Option<Vector>,
    pub snapshot_period: usize,
    /// Step cap per oracle call.
    pub max_steps: usize,
    /// Cap on oracle calls per fixed-tolerance run.
    pub max_oracle_calls: usize,
    /// Stop (with [`SolveStatus::BudgetReached`]) once this many steps ran.
    pub iteration_budget: Option<usize>,
    /// Wall-clock limit in milliseconds; results then depend on the machine.
    pub time_limit_ms: Option<f64>,
    pub inner: InnerSolverOptions,
    /// Keep per-step and per-oracle-call logs in the report.
    pub record: bool,
}

impl SolveOptions {
    pub fn new(rule: StepRule, eps_target: f64, eps1: f64) -> Self {
        Self {
            rule,
            eps_target,
            eps1,
            alpha0: None,
            x0: None,
            z0: None,
            u0: None,
            snapshot_period: 50,
            max_steps: DEFAULT_MAX_STEPS,
            max_oracle_calls: 1_000_000,
            iteration_budget: None,
            time_limit_ms: None,
            inner: InnerSolverOptions::default(),
            record: false,
        }
    }
}

fn method_name(rule: StepRule, formulation: Formulation) -> &'static str {
    match (formulation, rule) {
        (Formulation::Lifted, StepRule::Pg) => "italex-pg",
        (Formulation::Lifted, StepRule::Gcg) => "italex-gcg",
        (Formulation::Collapsed, StepRule::Pg) => "italex-smooth-pg",
        (Formulation::Collapsed, StepRule::Gcg) => "italex-smooth-gcg",
    }
}

/// Mutable state of one solve.
struct Driver<'a> {
    instance: &'a BilevelInstance,
    formulation: Formulation,
    oracle: OracleConfig,
    max_oracle_calls: usize,
    snapshot_period: usize,
    iteration_budget: Option<usize>,
    time_limit_ms: Option<f64>,
    record: bool,
    start: Instant,
    total_steps: usize,
    total_calls: usize,
    halted: bool,
    alpha_trace: Vec<f64>,
    snapshots: Vec<Snapshot>,
    oracle_log: Vec<OracleRecord>,
    step_log: Vec<StepRecord>,
}

impl<'a> Driver<'a> {
    fn new(instance: &'a BilevelInstance, formulation: Formulation, opts: &SolveOptions) -> Self {
        Self {
            instance,
            formulation,
            oracle: OracleConfig {
                rule: opts.rule,
                formulation,
                max_steps: opts.max_steps,
            },
            max_oracle_calls: opts.max_oracle_calls,
            snapshot_period: opts.snapshot_period.max(1),
            iteration_budget: opts.iteration_budget,
            time_limit_ms: opts.time_limit_ms,
            record: opts.record,
            start: Instant::now(),
            total_steps: 0,
            total_calls: 0,
            halted: false,
            alpha_trace: Vec::new(),
            snapshots: Vec::new(),
            oracle_log: Vec::new(),
            step_log: Vec::new(),
        }
    }

    fn snapshot(&mut self, x: &Vector) {
        if self.snapshots.last().is_some_and(|s| s.iteration == self.total_steps) {
            return;
        }
        self.snapshots.push(Snapshot {
            iteration: self.total_steps,
            t_ms: self.start.elapsed().as_secs_f64() * 1e3,
            phi: self.instance.eval_phi(x),
            omega: self.instance.eval_omega(x),
            norm_sq: x.norm_squared(),
        });
    }

    fn out_of_time(&self) -> bool {
        self.time_limit_ms
            .is_some_and(|t| self.start.elapsed().as_secs_f64() * 1e3 >= t)
    }

    fn expand(&self, alpha: f64, rho: f64) -> Result<f64> {
        let outer = &self.instance.outer;
        match self.formulation {
            Formulation::Lifted => expansion_oracle(alpha, rho, outer.kappa, outer.gamma),
            Formulation::Collapsed => {
                expansion_oracle_smooth(alpha, rho, outer.kappa, outer.gamma, self.instance.lipschitz())
            }
        }
    }

    /// Fixed-tolerance loop from `y` at level `alpha`.
    fn fixed_tolerance(&mut self, eps: f64, phi_bar: f64, mut alpha: f64, mut y: LiftedPoint) -> Result<FtResult> {
        let mut calls = 0;
        let mut steps = 0;
        loop {
            if self.iteration_budget.is_some_and(|b| self.total_steps >= b) || self.out_of_time() {
                self.halted = true;
                break;
            }
            if calls >= self.max_oracle_calls {
                return Err(SolverError::BudgetExhausted {
                    steps,
                    alpha,
                    value: self.instance.eval_phi_hat(&y, alpha),
                    last: Box::new(y),
                });
            }
            let out = {
                let instance = self.instance;
                let period = self.snapshot_period;
                let budget = self.iteration_budget;
                let time_limit = self.time_limit_ms;
                let record = self.record;
                let start = self.start;
                let total = &mut self.total_steps;
                let snaps = &mut self.snapshots;
                let log = &mut self.step_log;
                let mut observer = |p: &LiftedPoint, o: &crate::steps::StepOutcome| {
                    if *total % period == 0 && snaps.last().is_none_or(|s| s.iteration != *total) {
                        snaps.push(Snapshot {
                            iteration: *total,
                            t_ms: start.elapsed().as_secs_f64() * 1e3,
                            phi: instance.eval_phi(&p.y1),
                            omega: instance.eval_omega(&p.y1),
                            norm_sq: p.y1.norm_squared(),
                        });
                    }
                    if record {
                        log.push(StepRecord::from_outcome(alpha, instance.eval_omega(&p.y1), o));
                    }
                    *total += 1;
                    let late = time_limit.is_some_and(|t| start.elapsed().as_secs_f64() * 1e3 >= t);
                    if budget.is_some_and(|b| *total >= b) || late {
                        ControlFlow::Break(())
                    } else {
                        ControlFlow::Continue(())
                    }
                };
                approximation_oracle_with(self.instance, &y, alpha, phi_bar, 0.5 * eps, &self.oracle, &mut observer)?
            };
            calls += 1;
            self.total_calls += 1;
            steps += out.inner_iterations;
            self.alpha_trace.push(alpha);
            if self.record {
                self.oracle_log.push(OracleRecord {
                    alpha,
                    phi_bar,
                    eps_tol: 0.5 * eps,
                    rho: out.rho,
                    phi_hat: out.value,
                    steps: out.inner_iterations,
                });
            }
            y = out.y;
            if out.halted {
                self.halted = true;
                break;
            }
            if out.rho == 0.0 {
                break;
            }
            let next = self.expand(alpha, out.rho)?;
            log::debug!("level {alpha:.6e} -> {next:.6e} (rho {:.3e})", out.rho);
            alpha = next;
            y.alpha_tag = alpha;
        }
        Ok(FtResult {
            alpha_final: alpha,
            x: y.y1,
            z: y.y2,
            oracle_calls: calls,
            step_iterations: steps,
        })
    }
}

/// Validated starting data.
struct Start {
    alpha0: f64,
    x0: Vector,
    z0: Vector,
    u0: Vector,
}

fn resolve_start(instance: &BilevelInstance, opts: &SolveOptions, collapsed: bool) -> Result<Start> {
    let n = instance.dim();
    let zero = Vector::zeros(n);
    let alpha0 = match opts.alpha0 {
        Some(a) => a,
        None if instance.inner.contains(&zero) => instance.eval_omega(&zero),
        None => instance.outer.lower_bound(),
    };
    if !alpha0.is_finite() || alpha0 < instance.outer.lower_bound() {
        return Err(SolverError::invalid(format!("initial level {alpha0} is below inf ω")));
    }
    let x0 = match &opts.x0 {
        Some(x) => x.clone(),
        None => instance.inner.prox(&zero, 1.0),
    };
    if x0.len() != n {
        return Err(SolverError::invalid("x0 has the wrong dimension"));
    }
    if !instance.inner.contains(&x0) {
        return Err(SolverError::invalid("x0 is outside dom(g)"));
    }
    let x0 = if collapsed { instance.outer.project(&x0, alpha0) } else { x0 };
    let z0 = match &opts.z0 {
        Some(z) if collapsed => {
            return Err(SolverError::invalid(format!(
                "the smooth variant takes no z0 (got a vector of length {})",
                z.len()
            )))
        }
        Some(z) => z.clone(),
        None => instance.outer.project(&x0, alpha0),
    };
    if z0.len() != n || !instance.outer.contains(&z0, alpha0) {
        return Err(SolverError::invalid("z0 must lie in the initial level set"));
    }
    let u0 = opts.u0.clone().unwrap_or_else(|| x0.clone());
    if u0.len() != n {
        return Err(SolverError::invalid("u0 has the wrong dimension"));
    }
    Ok(Start { alpha0, x0, z0, u0 })
}

/// Fixed-tolerance ITALEX: returns once the oracle finds a lifted point with
/// `φ(x) + ‖x − z‖² ≤ φ̄ + ε/2`.
pub fn italex_ft(
    instance: &BilevelInstance,
    eps: f64,
    phi_bar: f64,
    alpha0: f64,
    x0: &Vector,
    z0: &Vector,
    rule: StepRule,
) -> Result<FtResult> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(SolverError::invalid(format!("eps must be > 0, got {eps}")));
    }
    let mut opts = SolveOptions::new(rule, eps, eps);
    opts.alpha0 = Some(alpha0);
    opts.x0 = Some(x0.clone());
    opts.z0 = Some(z0.clone());
    let start = resolve_start(instance, &opts, false)?;
    let mut driver = Driver::new(instance, Formulation::Lifted, &opts);
    let y = LiftedPoint::new(start.x0, start.z0, start.alpha0);
    driver.fixed_tolerance(eps, phi_bar, start.alpha0, y)
}

/// Changing-tolerance ITALEX on the lifted problem.
pub fn italex_ct(instance: &BilevelInstance, opts: &SolveOptions) -> Result<SolveReport> {
    run_rounds(instance, opts, Formulation::Lifted)
}

/// Changing-tolerance ITALEX for `g ≡ 0` on the collapsed variable.
pub fn italex_smooth(instance: &BilevelInstance, opts: &SolveOptions) -> Result<SolveReport> {
    if !instance.inner.is_zero() {
        return Err(SolverError::unsupported("the smooth variant requires g ≡ 0"));
    }
    if !(instance.lipschitz() > 0.0) {
        return Err(SolverError::unsupported("the smooth variant requires L_f > 0"));
    }
    run_rounds(instance, opts, Formulation::Collapsed)
}

fn run_rounds(instance: &BilevelInstance, opts: &SolveOptions, formulation: Formulation) -> Result<SolveReport> {
    let (eps_target, eps1) = (opts.eps_target, opts.eps1);
    if !(eps_target > 0.0 && eps_target.is_finite()) || !(eps1 > 0.0 && eps1.is_finite()) {
        return Err(SolverError::invalid("tolerances must be finite and > 0"));
    }
    if eps1 < eps_target {
        return Err(SolverError::invalid(format!(
            "initial tolerance {eps1:e} is below the target {eps_target:e}"
        )));
    }
    let collapsed = formulation == Formulation::Collapsed;
    let start = resolve_start(instance, opts, collapsed)?;
    let mut driver = Driver::new(instance, formulation, opts);
    let mut alpha = start.alpha0;
    let mut x = start.x0;
    let mut z = if collapsed { x.clone() } else { start.z0 };
    let mut u = start.u0;
    let mut rounds = Vec::new();
    let mut eps_r = eps1;
    driver.snapshot(&x);
    loop {
        let inner = solve_inner_with(instance, &u, 0.5 * eps_r, &opts.inner)?;
        u = inner.u;
        let phi_bar = inner.phi_bar;
        let current = instance.eval_phi(&x) + (&x - &z).norm_squared();
        let skipped = current <= phi_bar + 0.5 * eps_r;
        let (calls, steps) = if skipped {
            (0, 0)
        } else {
            let y = LiftedPoint::new(x.clone(), z.clone(), alpha);
            let ft = driver.fixed_tolerance(eps_r, phi_bar, alpha, y)?;
            alpha = ft.alpha_final;
            x = ft.x;
            z = ft.z;
            (ft.oracle_calls, ft.step_iterations)
        };
        log::info!(
            "round {}: eps {eps_r:.3e}, phi_bar {phi_bar:.6e}, {calls} oracle calls, {steps} steps{}",
            rounds.len() + 1,
            if skipped { " (skipped)" } else { "" }
        );
        rounds.push(RoundRecord {
            eps: eps_r,
            phi_bar,
            oracle_calls: calls,
            step_iters: steps,
            inner_solver_iters: inner.iterations,
            skipped,
        });
        if driver.halted || eps_r <= eps_target {
            break;
        }
        eps_r *= 0.5;
    }
    driver.snapshot(&x);
    let feas_dist = instance
        .reference
        .as_ref()
        .and_then(|r| r.omega_star)
        .map(|w| instance.level_distance(&x, w));
    let final_summary = FinalSummary {
        phi: instance.eval_phi(&x),
        omega: instance.eval_omega(&x),
        alpha: Some(alpha),
        feas_dist,
        oracle_calls: driver.total_calls,
        step_iterations: driver.total_steps,
    };
    Ok(SolveReport {
        config: ReportConfig {
            method: method_name(opts.rule, formulation).to_string(),
            eps_target: Some(eps_target),
            eps1: Some(eps1),
            alpha0: Some(start.alpha0),
            snapshot_period: driver.snapshot_period,
            iteration_budget: opts.iteration_budget,
        },
        status: if driver.halted {
            SolveStatus::BudgetReached
        } else {
            SolveStatus::Converged
        },
        rounds,
        alpha_trace: driver.alpha_trace,
        snapshots: driver.snapshots,
        final_summary,
        x_final: x.iter().copied().collect(),
        z_final: z.iter().copied().collect(),
        oracle_log: driver.oracle_log,
        step_log: driver.step_log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::toy;
    use crate::model::{InnerRegularizer, LeastSquares};
    use crate::{Matrix, OuterFunction};

    fn one_d(x: f64) -> Vector {
        Vector::from_element(1, x)
    }

    #[test]
    fn solve_inner_on_toy() {
        let inst = toy();
        let (u, phi_bar) = solve_inner(&inst, &one_d(0.0), 1e-6).unwrap();
        assert!(phi_bar <= 1e-6);
        assert!((u[0] - 2.0).abs() < 1e-2);
        let (_, phi_bar) = solve_inner(&inst, &one_d(2.0), 1e-6).unwrap();
        assert_eq!(phi_bar, 0.0);
    }

    #[test]
    fn ft_on_toy() {
        let inst = toy();
        for rule in [StepRule::Pg, StepRule::Gcg] {
            let eps = 1e-4;
            let r = italex_ft(&inst, eps, 0.0, 0.0, &one_d(0.0), &one_d(0.0), rule).unwrap();
            assert!((r.x[0] - 2.0).abs() <= 0.011, "{rule:?}: x = {}", r.x[0]);
            // Termination means h(α) = (2 − α)²/2 ≤ ε/2.
            let a = r.alpha_final;
            assert!(a <= 2.0 && a >= 2.0 - eps.sqrt(), "{rule:?}: alpha = {a}");
            let bound = 2.0 * 2.0 / eps.sqrt() + 1.0;
            assert!(r.oracle_calls as f64 <= bound, "{rule:?}: {} calls", r.oracle_calls);
        }
    }

    #[test]
    fn ft_at_optimal_level_needs_one_call() {
        let inst = toy();
        let r = italex_ft(&inst, 1e-4, 0.0, 2.0, &one_d(0.0), &one_d(0.0), StepRule::Pg).unwrap();
        assert_eq!(r.oracle_calls, 1);
    }

    #[test]
    fn ct_on_toy() {
        let inst = toy();
        for rule in [StepRule::Pg, StepRule::Gcg] {
            let opts = SolveOptions::new(rule, 1e-4, 0.1);
            let rep = italex_ct(&inst, &opts).unwrap();
            assert!(rep.rounds.len() <= 11);
            assert!(rep.final_summary.phi <= 1e-4);
            assert!(rep.alpha_trace.windows(2).all(|w| w[0] <= w[1]));
            assert!(rep.rounds.windows(2).all(|w| w[1].eps == 0.5 * w[0].eps));
            let one = italex_ct(&inst, &SolveOptions::new(rule, 0.1, 0.1)).unwrap();
            assert_eq!(one.rounds.len(), 1);
        }
    }

    #[test]
    fn ct_respects_iteration_budget() {
        let inst = toy();
        let mut opts = SolveOptions::new(StepRule::Pg, 1e-8, 0.1);
        opts.iteration_budget = Some(25);
        let rep = italex_ct(&inst, &opts).unwrap();
        assert_eq!(rep.status, SolveStatus::BudgetReached);
        assert_eq!(rep.final_summary.step_iterations, 25);
    }

    #[test]
    fn smooth_variant_stays_below_optimal_value() {
        let smooth = LeastSquares::new(Matrix::identity(1, 1), one_d(2.0)).unwrap();
        let inst = BilevelInstance::new(smooth, InnerRegularizer::Zero, OuterFunction::l1()).unwrap();
        for rule in [StepRule::Pg, StepRule::Gcg] {
            let mut opts = SolveOptions::new(rule, 1e-4, 0.1);
            opts.record = true;
            let rep = italex_smooth(&inst, &opts).unwrap();
            assert!(rep.step_log.iter().all(|s| s.omega <= 2.0 + 1e-9));
            assert!(rep.alpha_trace.iter().all(|a| *a <= 2.0 + 1e-9));
            assert!(rep.final_summary.phi <= 1e-4);
        }
        assert!(matches!(
            italex_smooth(&toy(), &SolveOptions::new(StepRule::Pg, 1e-4, 0.1)),
            Err(SolverError::UnsupportedConfiguration(_))
        ));
    }
}
