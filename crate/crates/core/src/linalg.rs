//! Small dense helpers shared by the solvers.

use crate::{Matrix, Vector};

/// Largest eigenvalue of `AᵀA` by power iteration.
///
/// Iterates until the Rayleigh quotient stalls at machine precision, so the
/// result is accurate well beyond 1e-8 relative for any spectrum with a
/// visible gap. Returns 0 for an all-zero matrix.
pub fn lambda_max_gram(a: &Matrix) -> f64 {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return 0.0;
    }
    // Deterministic start with no symmetry so it is not orthogonal to the top
    // eigenvector of structured matrices.
    let mut v = Vector::from_fn(n, |i, _| 1.0 + (i as f64 + 1.0).sqrt() / n as f64);
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..20_000 {
        let w = a.tr_mul(&(a * &v));
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        if (next - lambda).abs() <= 1e-15 * next.abs() {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Componentwise soft threshold `sign(xᵢ)·max(|xᵢ| − t, 0)`.
pub fn soft_threshold(x: &Vector, t: f64) -> Vector {
    x.map(|v| soft_scalar(v, t))
}

#[inline]
pub(crate) fn soft_scalar(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// `sign` with the convention `sign(0) = +1`.
#[inline]
pub(crate) fn sign_pos(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Index of the largest `|cᵢ|`, lowest index on ties.
pub(crate) fn argmax_abs(c: &Vector) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in c.iter().enumerate() {
        if v.abs() > best_val {
            best = i;
            best_val = v.abs();
        }
    }
    best
}

pub(crate) fn l1_norm(x: &Vector) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

/// Membership slack used for every level-set and domain test.
#[inline]
pub fn level_tolerance(alpha: f64) -> f64 {
    1e-9 * alpha.abs().max(1.0)
}
