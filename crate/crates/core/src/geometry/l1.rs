use crate::error::{Result, SolverError};
use crate::linalg::{argmax_abs, l1_norm, sign_pos, soft_threshold};
use crate::Vector;

/// Euclidean projection onto `{u : ‖u‖₁ ≤ r}` by the sort-based threshold.
pub fn project_l1_ball(x: &Vector, r: f64) -> Result<Vector> {
    if !(r >= 0.0) {
        return Err(SolverError::invalid(format!("l1 radius must be ≥ 0, got {r}")));
    }
    Ok(project_l1_unchecked(x, r))
}

pub(crate) fn project_l1_unchecked(x: &Vector, r: f64) -> Vector {
    if l1_norm(x) <= r {
        return x.clone();
    }
    if r <= 0.0 {
        return Vector::zeros(x.len());
    }
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, m) in mags.iter().enumerate() {
        cumsum += m;
        let t = (cumsum - r) / (k as f64 + 1.0);
        if *m > t {
            theta = t;
        } else {
            break;
        }
    }
    soft_threshold(x, theta.max(0.0))
}

/// Vertex of the cross-polytope `{‖p‖₁ ≤ r}` minimizing `⟨c, p⟩`.
pub fn lmo_l1_ball(c: &Vector, r: f64) -> Vector {
    let mut p = Vector::zeros(c.len());
    if c.is_empty() {
        return p;
    }
    let i = argmax_abs(c);
    p[i] = -r * sign_pos(c[i]);
    p
}

/// `prox_{t‖·‖₁}(x)`, the soft threshold.
pub fn prox_l1(x: &Vector, t: f64) -> Vector {
    soft_threshold(x, t)
}
