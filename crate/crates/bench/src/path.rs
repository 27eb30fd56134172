//! The iterative-regularization trade-off curve and matching of solver
//! trajectories against it.

use italex_core::{BilevelInstance, Vector};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::reference::{reference_phi_star_from, solve_regularized};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub lambda: f64,
    pub phi_gap: f64,
    pub omega: f64,
}

/// Solves `min φ + λω` for each λ (largest first, warm-started) and returns
/// `(λ, φ − φ*, ω)` in the order given.
pub fn regularization_path(instance: &BilevelInstance, lambdas: &[f64], tol: f64) -> Result<Vec<PathPoint>> {
    if let Some(l) = lambdas.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(BenchError::invalid(format!("λ must be finite and ≥ 0, got {l}")));
    }
    let n = instance.dim();
    let phi_star = reference_phi_star_from(instance, &Vector::zeros(n), tol)?.value;
    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    order.sort_by(|&i, &j| lambdas[j].total_cmp(&lambdas[i]));
    let mut x = instance.inner.prox(&Vector::zeros(n), 1.0);
    let mut out = vec![None; lambdas.len()];
    for i in order {
        x = solve_regularized(instance, lambdas[i], &x, tol)?.x;
        out[i] = Some(PathPoint {
            lambda: lambdas[i],
            phi_gap: (instance.eval_phi(&x) - phi_star).max(0.0),
            omega: instance.eval_omega(&x),
        });
    }
    Ok(out.into_iter().map(|p| p.expect("every λ solved")).collect())
}

/// `λ_max(AᵀA)/2^ℓ` for `ℓ = 1..=depth`.
pub fn halving_lambdas(instance: &BilevelInstance, depth: usize) -> Vec<f64> {
    let top = 0.5 * instance.lipschitz();
    (1..=depth).map(|l| top / 2f64.powi(l as i32)).collect()
}

/// A trajectory point paired with the path's ω at the same φ-gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPoint {
    pub phi_gap: f64,
    pub omega: f64,
    pub path_omega: f64,
}

impl MatchedPoint {
    /// `|ω − ω_path| ≤ rel·|ω_path|`, with an absolute floor for ω_path ≈ 0.
    pub fn within(&self, rel: f64) -> bool {
        (self.omega - self.path_omega).abs() <= rel * self.path_omega.abs().max(1e-12)
    }
}

/// Interpolates the path's ω (linear in `log φ-gap`) at each trajectory
/// φ-gap that falls inside the path's positive φ-gap range. Points outside
/// that range are not matched.
pub fn match_to_path(path: &[PathPoint], trajectory: &[(f64, f64)]) -> Vec<MatchedPoint> {
    let mut pts: Vec<(f64, f64)> = path
        .iter()
        .filter(|p| p.phi_gap > 0.0)
        .map(|p| (p.phi_gap.ln(), p.omega))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.dedup_by(|a, b| a.0 == b.0);
    if pts.len() < 2 {
        return Vec::new();
    }
    let (lo, hi) = (pts[0].0, pts[pts.len() - 1].0);
    trajectory
        .iter()
        .filter(|(gap, _)| *gap > 0.0)
        .filter_map(|&(gap, omega)| {
            let g = gap.ln();
            if g < lo || g > hi {
                return None;
            }
            let k = pts.partition_point(|p| p.0 < g).clamp(1, pts.len() - 1);
            let (a, b) = (pts[k - 1], pts[k]);
            let w = (g - a.0) / (b.0 - a.0);
            Some(MatchedPoint {
                phi_gap: gap,
                omega,
                path_omega: a.1 + w * (b.1 - a.1),
            })
        })
        .collect()
}
