//! One descent step on the lifted objective φ̂^α together with a continuous
//! optimality measure μ^α evaluated at the input point.
//!
//! Both schemes use the fixed smoothness constant `L` of the lifted smooth
//! part (see [`BilevelInstance::lifted_lipschitz`]). The collapsed variants act on diagonal points `y₁ = y₂ = x`
//! for the smooth-inner formulation, where φ̂^α reduces to `f + δ_{Lev_ω(α)}`
//! and the constant is `L_f`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};
use crate::model::{BilevelInstance, LiftedPoint};
use crate::Vector;

/// Absolute slack under which a negative measure or decrease is treated as
/// round-off and clamped to zero.
pub const ROUNDOFF_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Generalized conditional gradient with adaptive stepsize.
    Gcg,
    /// Proximal gradient with stepsize one over the lifted smoothness constant.
    Pg,
}

/// Whether steps act on the lifted pair or on the collapsed variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    Lifted,
    Collapsed,
}

/// Diameter data shared by all steps of one oracle call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiameterContext {
    /// `𝒟_dom(g) + 𝒟_{Lev_ω(α)}`; +∞ when `dom(g)` is unbounded.
    pub d_alpha: f64,
    /// `𝒟_{Lev_ω(α)}`.
    pub d_level: f64,
    pub phi_bar: f64,
    /// The tolerance ε of the surrounding fixed-tolerance run.
    pub eps: f64,
}

impl DiameterContext {
    pub fn new(instance: &BilevelInstance, alpha: f64, phi_bar: f64, eps: f64) -> Self {
        let d_level = instance.outer.diameter(alpha);
        Self {
            d_alpha: instance.inner.domain_diameter() + d_level,
            d_level,
            phi_bar,
            eps,
        }
    }

    /// `D̃_α(y) = min{D_α, √(6(φ̂^α(y) − φ̄ + ε/2) + 4𝒟²_{Lev_ω(α)})}`, a bound on
    /// the diameter of the sublevel set of φ̂^α through `y`.
    pub fn d_tilde(&self, phi_hat_y: f64) -> f64 {
        let excess = (phi_hat_y - self.phi_bar + 0.5 * self.eps).max(0.0);
        let bound = (6.0 * excess + 4.0 * self.d_level * self.d_level).sqrt();
        self.d_alpha.min(bound)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next: LiftedPoint,
    /// μ^α at the input point.
    pub measure: f64,
    /// φ̂^α at the input point.
    pub value: f64,
    /// φ̂^α at `next`.
    pub next_value: f64,
    /// `value − next_value`.
    pub decrease: f64,
    /// `‖next − y‖²` for PG, `‖p − y‖²` (the full direction) for GCG.
    pub step_sq: f64,
    /// Diameter bound used by the step; NaN when none was needed.
    pub d_tilde: f64,
}

fn clamp_roundoff(v: f64, what: &str, scale: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -ROUNDOFF_SLACK * scale.abs().max(1.0) {
        Ok(0.0)
    } else {
        Err(SolverError::NumericalInconsistency(format!("{what} is negative: {v:e}")))
    }
}

fn require_feasible(instance: &BilevelInstance, y: &LiftedPoint, alpha: f64) -> Result<f64> {
    let v = instance.eval_phi_hat(y, alpha);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(SolverError::invalid(format!("lifted point is infeasible at level {alpha}")))
    }
}

/// GCG step on φ̂^α. With an unbounded `dom(g)` the linear oracle is taken
/// over `dom(g) ∩ B(y₁, D̃_α(y))`, which contains every better point.
pub fn gcg_step(
    instance: &BilevelInstance,
    y: &LiftedPoint,
    alpha: f64,
    ctx: &DiameterContext,
) -> Result<StepOutcome> {
    let value = require_feasible(instance, y, alpha)?;
    let (_, c1, c2) = instance.f_hat_value_and_gradient(y);
    let (p1, d_tilde) = match instance.inner.linear_oracle(&c1) {
        Some(p) => (p, f64::NAN),
        None => {
            let d = ctx.d_tilde(value);
            if !d.is_finite() {
                return Err(SolverError::unsupported(
                    "conditional gradient needs a bounded domain or a finite diameter bound",
                ));
            }
            (instance.inner.ball_linear_oracle(&c1, &y.y1, d), d)
        }
    };
    let p2 = instance.outer.lmo(&c2, alpha);
    let d1 = &p1 - &y.y1;
    let d2 = &p2 - &y.y2;
    // Both g and the level-set indicator vanish at y and p.
    let gap = -(c1.dot(&d1) + c2.dot(&d2));
    let measure = clamp_roundoff(gap, "surrogate gap", value)?;
    let step_sq = d1.norm_squared() + d2.norm_squared();
    let eta = if measure > 0.0 && step_sq > 0.0 {
        (measure / (instance.lifted_lipschitz() * step_sq)).min(1.0)
    } else {
        0.0
    };
    let next = if eta > 0.0 {
        LiftedPoint::new(&y.y1 + d1 * eta, &y.y2 + d2 * eta, alpha)
    } else {
        y.clone().retag(alpha)
    };
    finish(instance, next, alpha, value, measure, step_sq, d_tilde)
}

/// PG step on φ̂^α with measure `S̃ = 2·max{ζ, D̃·√(Lζ/2)}`, ζ the decrease and
/// `L` the lifted smoothness constant.
pub fn pg_step(
    instance: &BilevelInstance,
    y: &LiftedPoint,
    alpha: f64,
    ctx: &DiameterContext,
) -> Result<StepOutcome> {
    let value = require_feasible(instance, y, alpha)?;
    let l = instance.lifted_lipschitz();
    let (_, c1, _) = instance.f_hat_value_and_gradient(y);
    let next1 = instance.inner.prox(&(&y.y1 - c1 / l), 1.0 / l);
    let next2 = instance.outer.project(&((&y.y2 * (l - 2.0) + &y.y1 * 2.0) / l), alpha);
    let next = LiftedPoint::new(next1, next2, alpha);
    let next_value = instance.eval_phi_hat(&next, alpha);
    let zeta = clamp_roundoff(value - next_value, "proximal-gradient decrease", value)?;
    let d_tilde = ctx.d_tilde(value);
    let measure = 2.0 * zeta.max(d_tilde * (l * zeta / 2.0).sqrt());
    let step_sq = next.dist_sq(y);
    Ok(StepOutcome {
        next,
        measure,
        value,
        next_value,
        decrease: value - next_value,
        step_sq,
        d_tilde,
    })
}

fn finish(
    instance: &BilevelInstance,
    next: LiftedPoint,
    alpha: f64,
    value: f64,
    measure: f64,
    step_sq: f64,
    d_tilde: f64,
) -> Result<StepOutcome> {
    let next_value = instance.eval_phi_hat(&next, alpha);
    if !next_value.is_finite() {
        return Err(SolverError::NumericalInconsistency(format!(
            "step left the feasible region at level {alpha}"
        )));
    }
    Ok(StepOutcome {
        next,
        measure,
        value,
        next_value,
        decrease: value - next_value,
        step_sq,
        d_tilde,
    })
}

fn collapsed_start(instance: &BilevelInstance, y: &LiftedPoint, alpha: f64) -> Result<(Vector, f64, Vector)> {
    if !instance.inner.is_zero() {
        return Err(SolverError::unsupported("the collapsed formulation requires g ≡ 0"));
    }
    if !(instance.lipschitz() > 0.0) {
        return Err(SolverError::unsupported("the collapsed formulation requires L_f > 0"));
    }
    let x = y.y1.clone();
    if !instance.outer.contains(&x, alpha) {
        return Err(SolverError::invalid(format!("point is infeasible at level {alpha}")));
    }
    let (value, grad) = instance.smooth.value_and_gradient(&x);
    Ok((x, value, grad))
}

fn collapsed_value(instance: &BilevelInstance, x: &Vector, alpha: f64) -> f64 {
    if instance.outer.contains(x, alpha) {
        instance.smooth.value(x)
    } else {
        f64::INFINITY
    }
}

/// Conditional-gradient step on `f + δ_{Lev_ω(α)}` at a diagonal point.
pub fn gcg_step_collapsed(
    instance: &BilevelInstance,
    y: &LiftedPoint,
    alpha: f64,
    _ctx: &DiameterContext,
) -> Result<StepOutcome> {
    let (x, value, grad) = collapsed_start(instance, y, alpha)?;
    let p = instance.outer.lmo(&grad, alpha);
    let d = &p - &x;
    let measure = clamp_roundoff(-grad.dot(&d), "surrogate gap", value)?;
    let step_sq = d.norm_squared();
    let eta = if measure > 0.0 && step_sq > 0.0 {
        (measure / (instance.lipschitz() * step_sq)).min(1.0)
    } else {
        0.0
    };
    let nx = &x + d * eta;
    let next_value = collapsed_value(instance, &nx, alpha);
    if !next_value.is_finite() {
        return Err(SolverError::NumericalInconsistency(format!(
            "step left the feasible region at level {alpha}"
        )));
    }
    Ok(StepOutcome {
        next: LiftedPoint::diagonal(nx, alpha),
        measure,
        value,
        next_value,
        decrease: value - next_value,
        step_sq,
        d_tilde: f64::NAN,
    })
}

/// Projected-gradient step on `f + δ_{Lev_ω(α)}` at a diagonal point, with
/// `D̃ = 𝒟_{Lev_ω(α)}`.
pub fn pg_step_collapsed(
    instance: &BilevelInstance,
    y: &LiftedPoint,
    alpha: f64,
    ctx: &DiameterContext,
) -> Result<StepOutcome> {
    let (x, value, grad) = collapsed_start(instance, y, alpha)?;
    let l = instance.lipschitz();
    let nx = instance.outer.project(&(&x - grad / l), alpha);
    let next_value = collapsed_value(instance, &nx, alpha);
    let zeta = clamp_roundoff(value - next_value, "projected-gradient decrease", value)?;
    let d_tilde = ctx.d_level;
    let measure = 2.0 * zeta.max(d_tilde * (l * zeta / 2.0).sqrt());
    let step_sq = (&nx - &x).norm_squared();
    Ok(StepOutcome {
        next: LiftedPoint::diagonal(nx, alpha),
        measure,
        value,
        next_value,
        decrease: value - next_value,
        step_sq,
        d_tilde,
    })
}

/// Dispatches to the step selected by `rule` and `formulation`.
pub fn take_step(
    instance: &BilevelInstance,
    y: &LiftedPoint,
    alpha: f64,
    ctx: &DiameterContext,
    rule: StepRule,
    formulation: Formulation,
) -> Result<StepOutcome> {
    match (rule, formulation) {
        (StepRule::Gcg, Formulation::Lifted) => gcg_step(instance, y, alpha, ctx),
        (StepRule::Pg, Formulation::Lifted) => pg_step(instance, y, alpha, ctx),
        (StepRule::Gcg, Formulation::Collapsed) => gcg_step_collapsed(instance, y, alpha, ctx),
        (StepRule::Pg, Formulation::Collapsed) => pg_step_collapsed(instance, y, alpha, ctx),
    }
}

/// True iff `measure ≥ φ̂^α(y) − h(α) − 1e-6`, the defining lower-bound
/// property of an optimality measure.
pub fn surrogate_gap_lower_bound_check(
    instance: &BilevelInstance,
    y: &LiftedPoint,
    alpha: f64,
    h_alpha_ref: f64,
    measure: f64,
) -> bool {
    measure >= instance.eval_phi_hat(y, alpha) - h_alpha_ref - 1e-6
}

/// Per-step diagnostics recorded by solves that ask for them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub alpha: f64,
    /// ω at the input point's first block.
    pub omega: f64,
    pub value: f64,
    pub next_value: f64,
    pub measure: f64,
    pub step_sq: f64,
    /// Absent when the step used no diameter bound.
    pub d_tilde: Option<f64>,
}

impl StepRecord {
    pub fn from_outcome(alpha: f64, omega: f64, out: &StepOutcome) -> Self {
        Self {
            alpha,
            omega,
            value: out.value,
            next_value: out.next_value,
            measure: out.measure,
            step_sq: out.step_sq,
            d_tilde: out.d_tilde.is_finite().then_some(out.d_tilde),
        }
    }
}
