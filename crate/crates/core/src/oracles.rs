//! Approximation oracle and expansion oracles.
//!
//! Given a level α and an estimate φ̄ ≥ φ*, the approximation oracle either
//! finds a lifted point with `φ̂^α(y) ≤ φ̄ + ε` (returning ρ = 0) or certifies a
//! gap `ρ ≤ h(α) − φ̄` with `ρ ≥ ε/2`. The expansion oracle turns a certified
//! gap into a level increase that cannot overshoot ω*.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};
use crate::model::{BilevelInstance, LiftedPoint};
use crate::steps::{take_step, DiameterContext, Formulation, StepOutcome, StepRule};

pub const DEFAULT_MAX_STEPS: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutcome {
    pub rho: f64,
    pub y: LiftedPoint,
    /// Step calls consumed, including the one whose check fired.
    pub inner_iterations: usize,
    /// φ̂^α at the returned point.
    pub value: f64,
    /// Set when an observer stopped the oracle before either exit fired.
    pub halted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub rule: StepRule,
    pub formulation: Formulation,
    pub max_steps: usize,
}

impl OracleConfig {
    pub fn lifted(rule: StepRule) -> Self {
        Self {
            rule,
            formulation: Formulation::Lifted,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

/// Per-call summary kept by solves that record diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub alpha: f64,
    pub phi_bar: f64,
    pub eps_tol: f64,
    pub rho: f64,
    pub phi_hat: f64,
    pub steps: usize,
}

/// Runs the oracle with the lifted formulation and no observer.
pub fn approximation_oracle(
    instance: &BilevelInstance,
    y0: &LiftedPoint,
    alpha: f64,
    phi_bar: f64,
    eps_tol: f64,
    rule: StepRule,
    max_steps: usize,
) -> Result<OracleOutcome> {
    let cfg = OracleConfig {
        rule,
        formulation: Formulation::Lifted,
        max_steps,
    };
    approximation_oracle_with(instance, y0, alpha, phi_bar, eps_tol, &cfg, &mut |_, _| {
        ControlFlow::Continue(())
    })
}

/// The oracle loop. `observer` sees every input point with its step outcome
/// before the exit checks run, and may halt the loop.
pub fn approximation_oracle_with(
    instance: &BilevelInstance,
    y0: &LiftedPoint,
    alpha: f64,
    phi_bar: f64,
    eps_tol: f64,
    cfg: &OracleConfig,
    observer: &mut dyn FnMut(&LiftedPoint, &StepOutcome) -> ControlFlow<()>,
) -> Result<OracleOutcome> {
    if !(eps_tol > 0.0 && eps_tol.is_finite()) {
        return Err(SolverError::invalid(format!("oracle tolerance must be > 0, got {eps_tol}")));
    }
    if !phi_bar.is_finite() {
        return Err(SolverError::invalid("φ̄ must be finite"));
    }
    let ctx = DiameterContext::new(instance, alpha, phi_bar, 2.0 * eps_tol);
    let mut y = y0.clone().retag(alpha);
    let mut last_value = f64::NAN;
    for j in 0..cfg.max_steps {
        let out = take_step(instance, &y, alpha, &ctx, cfg.rule, cfg.formulation)?;
        let flow = observer(&y, &out);
        let gap = out.value - phi_bar;
        if gap <= eps_tol {
            return Ok(OracleOutcome {
                rho: 0.0,
                value: out.value,
                y,
                inner_iterations: j + 1,
                halted: false,
            });
        }
        let rho = gap - out.measure;
        if rho > 0.5 * eps_tol {
            return Ok(OracleOutcome {
                rho,
                value: out.value,
                y,
                inner_iterations: j + 1,
                halted: false,
            });
        }
        if flow.is_break() {
            return Ok(OracleOutcome {
                rho: 0.0,
                value: out.next_value,
                y: out.next,
                inner_iterations: j + 1,
                halted: true,
            });
        }
        last_value = out.next_value;
        y = out.next;
    }
    Err(SolverError::BudgetExhausted {
        steps: cfg.max_steps,
        alpha,
        value: last_value,
        last: Box::new(y),
    })
}

/// `α + ρ^{κ/2}/γ`.
pub fn expansion_oracle(alpha: f64, rho: f64, kappa: f64, gamma: f64) -> Result<f64> {
    check_expansion_args(rho, kappa, gamma)?;
    Ok(alpha + rho.powf(0.5 * kappa) / gamma)
}

/// `α + (1/γ)(2ρ/L_f)^{κ/2}`, valid when the inner problem is smooth.
pub fn expansion_oracle_smooth(alpha: f64, rho: f64, kappa: f64, gamma: f64, lipschitz: f64) -> Result<f64> {
    check_expansion_args(rho, kappa, gamma)?;
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        return Err(SolverError::invalid(format!("L_f must be > 0, got {lipschitz}")));
    }
    Ok(alpha + (2.0 * rho / lipschitz).powf(0.5 * kappa) / gamma)
}

fn check_expansion_args(rho: f64, kappa: f64, gamma: f64) -> Result<()> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(SolverError::invalid(format!("expansion needs ρ > 0, got {rho}")));
    }
    if !(kappa > 0.0 && kappa <= 2.0) || !(gamma > 0.0 && gamma.is_finite()) {
        return Err(SolverError::invalid("expansion needs κ ∈ (0, 2] and γ > 0"));
    }
    Ok(())
}
