use crate::error::{Result, SolverError};
use crate::linalg::{l1_norm, soft_scalar, soft_threshold};
use crate::Vector;

pub(crate) fn elastic_net_value(x: &Vector, rho: f64) -> f64 {
    l1_norm(x) + rho * x.norm_squared()
}

/// Projection onto `{u : ‖u‖₁ + ρ‖u‖² ≤ α}`.
///
/// The minimizer is `soft(x, λ)/(1 + 2λρ)` for the multiplier λ that makes the
/// constraint active; λ is found by bisection and the feasible end of the
/// bracket is returned.
pub fn project_elastic_net_ball(x: &Vector, rho: f64, alpha: f64) -> Result<Vector> {
    if !(rho > 0.0) {
        return Err(SolverError::invalid(format!("elastic-net rho must be > 0, got {rho}")));
    }
    if !(alpha >= 0.0) {
        return Err(SolverError::invalid(format!("elastic-net level must be ≥ 0, got {alpha}")));
    }
    Ok(project_unchecked(x, rho, alpha))
}

pub(crate) fn project_unchecked(x: &Vector, rho: f64, alpha: f64) -> Vector {
    if elastic_net_value(x, rho) <= alpha {
        return x.clone();
    }
    if alpha <= 0.0 {
        return Vector::zeros(x.len());
    }
    let at = |lam: f64| soft_threshold(x, lam) / (1.0 + 2.0 * lam * rho);
    let mut lo = 0.0;
    let mut hi = x.amax();
    let mut best = at(hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let u = at(mid);
        let val = elastic_net_value(&u, rho);
        if val <= alpha {
            hi = mid;
            best = u;
            if alpha - val <= 1e-10 * alpha.max(1.0) {
                break;
            }
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    best
}

/// `argmin ⟨c, p⟩` over the elastic-net ball. For a multiplier μ the minimizer
/// is `pᵢ = −sign(cᵢ)·max(|cᵢ| − μ, 0)/(2ρμ)`; μ is bisected (geometrically)
/// until the constraint is active. A zero cost is treated as `e₀`.
pub(crate) fn lmo_unchecked(c: &Vector, rho: f64, alpha: f64) -> Vector {
    if alpha <= 0.0 {
        return Vector::zeros(c.len());
    }
    let mut cost = c.clone();
    if cost.iter().all(|v| *v == 0.0) {
        cost[0] = 1.0;
    }
    let at = |mu: f64| cost.map(|ci| -soft_scalar(ci, mu) / (2.0 * rho * mu));
    let top = cost.amax();
    let mut hi = top;
    let mut lo = top / 2.0;
    while elastic_net_value(&at(lo), rho) < alpha {
        hi = lo;
        lo /= 2.0;
        if lo < 1e-300 {
            break;
        }
    }
    let mut best = at(hi);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        let p = at(mid);
        let val = elastic_net_value(&p, rho);
        if val <= alpha {
            hi = mid;
            best = p;
            if alpha - val <= 1e-12 * alpha.max(1.0) {
                break;
            }
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    // Snap onto the boundary along the found direction: t‖d‖₁ + ρt²‖d‖² = α.
    let a = rho * best.norm_squared();
    let b = l1_norm(&best);
    if a > 0.0 {
        let t = (-b + (b * b + 4.0 * a * alpha).sqrt()) / (2.0 * a);
        let scaled = &best * t;
        if elastic_net_value(&scaled, rho) <= alpha * (1.0 + 1e-15) {
            return scaled;
        }
    }
    best
}

/// `prox_{t·ω}(x)` for `ω = ‖·‖₁ + ρ‖·‖²`.
pub(crate) fn prox(x: &Vector, rho: f64, t: f64) -> Vector {
    soft_threshold(x, t) / (1.0 + 2.0 * rho * t)
}
