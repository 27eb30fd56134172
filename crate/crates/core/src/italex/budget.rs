use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};
use crate::model::BilevelInstance;
use crate::steps::StepRule;

/// Run data the iteration bounds depend on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetInputs {
    pub rule: StepRule,
    /// Target tolerance ε.
    pub eps: f64,
    /// Initial tolerance ε₁.
    pub eps1: f64,
    /// `φ(x⁰) + ‖x⁰ − z⁰‖²`.
    pub phi_hat_0: f64,
    /// φ̄ of the first round.
    pub phi_bar_1: f64,
    /// Any lower bound on φ*, e.g. a reference value.
    pub phi_lower: f64,
    /// Any upper bound on ω*.
    pub omega_upper: f64,
    /// `ω(z⁰)`.
    pub omega_z0: f64,
}

/// Worst-case counts: total steps are at most `k1 + k2 + n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationBudget {
    pub k1: f64,
    pub k2: f64,
    /// Bound on the number of oracle calls.
    pub n: f64,
    /// Squared diameter used for η₂.
    pub d_sq: f64,
    pub eta1: f64,
    pub eta2: f64,
}

impl IterationBudget {
    pub fn total(&self) -> f64 {
        self.k1 + self.k2 + self.n
    }
}

/// Evaluates the step-count bounds with `η₁ = 1/2` and
/// `η₂ = 1/(2LD²)`, `L` the lifted smoothness constant.
///
/// `D` is `D_{ω̄} = 𝒟_dom(g) + 𝒟_{Lev_ω(ω̄)}` for GCG on a bounded domain. For PG
/// it is `D̂₀` with `D̂₀² = min{6Δ₀ + 4𝒟²_{Lev_ω(ω̄)}, D²_{ω̄}}` and
/// `Δ₀ = φ̂₀ − φ_lower + ε₁/2`. GCG on an unbounded domain steps inside a ball
/// of radius at most `D̂₀` around `y₁`, so there `D² = D̂₀² + 𝒟²_{Lev_ω(ω̄)}`.
pub fn iteration_budget(instance: &BilevelInstance, inp: &BudgetInputs) -> Result<IterationBudget> {
    let BudgetInputs {
        rule,
        eps,
        eps1,
        phi_hat_0,
        phi_bar_1,
        phi_lower,
        omega_upper,
        omega_z0,
    } = *inp;
    if !(eps > 0.0) || !(eps1 > 0.0) {
        return Err(SolverError::invalid("tolerances must be > 0"));
    }
    let l = instance.lifted_lipschitz();
    let d_level = instance.outer.diameter(omega_upper);
    let d_dom = instance.inner.domain_diameter();
    let d_omega = d_dom + d_level;
    let delta0 = (phi_hat_0 - phi_lower + 0.5 * eps1).max(0.0);
    let d_hat0_sq = (6.0 * delta0 + 4.0 * d_level * d_level).min(d_omega * d_omega);
    let d_sq = match rule {
        StepRule::Pg => d_hat0_sq,
        StepRule::Gcg if d_dom.is_finite() => d_omega * d_omega,
        StepRule::Gcg => d_hat0_sq + d_level * d_level,
    };
    let eta1 = 0.5;
    let eta2 = 1.0 / (2.0 * l * d_sq);
    let rounds = (eps1 / eps).log2().ceil().max(0.0) + 1.0;
    let gap0 = phi_hat_0 - phi_bar_1;
    let k1 = if gap0 > 0.0 {
        ((eta2 / eta1).min(4.0 / eps1) * gap0).log2().max(0.0)
    } else {
        0.0
    };
    let k2 = 32.0 / (eta2 * eps) + (9f64.log2() + 2.0) * rounds;
    let kappa = instance.outer.kappa;
    let gamma = instance.outer.gamma;
    let n = (2f64.powf(kappa) * gamma * (omega_upper - omega_z0).max(0.0) / eps.powf(0.5 * kappa)).ceil() + rounds;
    Ok(IterationBudget {
        k1,
        k2,
        n,
        d_sq,
        eta1,
        eta2,
    })
}

/// Checks `ξ_p ≤ max{2/η, ξ₁}/p` (1-based `p`) for a nonnegative sequence with
/// `ξ_{p+1} ≤ ξ_p − η·ξ²_{p+1}`. A sequence violating the recursion is an
/// invalid argument.
pub fn check_xi_sequence(xi: &[f64], eta: f64) -> Result<bool> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(SolverError::invalid(format!("eta must be > 0, got {eta}")));
    }
    if xi.iter().any(|v| !(*v >= 0.0)) {
        return Err(SolverError::invalid("sequence must be nonnegative"));
    }
    for (p, w) in xi.windows(2).enumerate() {
        let rhs = w[0] - eta * w[1] * w[1];
        if w[1] > rhs + 1e-12 * w[0].max(1.0) {
            return Err(SolverError::invalid(format!(
                "recursion fails at index {}: {} > {}",
                p + 1,
                w[1],
                rhs
            )));
        }
    }
    let Some(&first) = xi.first() else {
        return Ok(true);
    };
    let c = (2.0 / eta).max(first);
    Ok(xi.iter().enumerate().all(|(i, v)| *v <= c / (i as f64 + 1.0) * (1.0 + 1e-12)))
}
