use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::OuterFunction;
use crate::error::{Result, SolverError};
use crate::Vector;

/// Largest accepted violation of the error bound.
pub const ERROR_BOUND_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBoundReport {
    pub kind: String,
    pub kappa: f64,
    pub gamma: f64,
    pub samples: usize,
    pub max_violation: f64,
}

impl ErrorBoundReport {
    pub fn passed(&self) -> bool {
        self.max_violation <= ERROR_BOUND_SLACK
    }
}

/// Samples `(x, α)` pairs and reports the worst value of
/// `dist(x, Lev_ω(α))^κ − γ·[ω(x) − α]₊`.
///
/// Levels are `ω̲ + 5U`. Points are uniform in `[−B, B]ⁿ`; even samples use
/// `B = 10·diameter(α)` and odd ones `B = diameter(α)` so that the region near
/// the level set, where the bound is tight, is also covered.
pub fn validate_error_bound(
    outer: &OuterFunction,
    dim: usize,
    samples: usize,
    seed: u64,
) -> Result<ErrorBoundReport> {
    if samples == 0 {
        return Err(SolverError::invalid("validator needs at least one sample"));
    }
    if dim == 0 || outer.geometry.dim().is_some_and(|d| d != dim) {
        return Err(SolverError::invalid(format!("dimension {dim} does not fit the outer function")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for s in 0..samples {
        let alpha = outer.lower_bound() + 5.0 * rng.random::<f64>();
        let diam = outer.diameter(alpha);
        let base = if diam > 0.0 { diam } else { 1.0 };
        let half = if s % 2 == 0 { 10.0 * base } else { base };
        let x = Vector::from_fn(dim, |_, _| half * (2.0 * rng.random::<f64>() - 1.0));
        let dist = (&x - outer.project(&x, alpha)).norm();
        let violation = dist.powf(outer.kappa) - outer.gamma * (outer.value(&x) - alpha).max(0.0);
        worst = worst.max(violation);
    }
    Ok(ErrorBoundReport {
        kind: outer.kind().to_string(),
        kappa: outer.kappa,
        gamma: outer.gamma,
        samples,
        max_violation: worst,
    })
}
