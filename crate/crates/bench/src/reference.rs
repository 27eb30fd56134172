//! High-accuracy reference values: φ*, h(α) and ω*, all by restarted FISTA.

use italex_core::apg::{fista, ApgOptions, ApgResult, Composite};
use italex_core::{BilevelInstance, Matrix, Vector};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// Iteration cap for every reference solve.
pub const MAX_ITERS: usize = 2_000_000;

/// Number of halvings in the regularization path used for ω*.
pub const PATH_DEPTH: usize = 25;

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(BenchError::invalid(format!("tolerance must be > 0, got {tol}")))
    }
}

fn restarted() -> ApgOptions {
    ApgOptions {
        max_iters: MAX_ITERS,
        restart: true,
    }
}

/// Minimum-norm least-squares solution `A⁺b` from an SVD, dropping singular
/// values below `1e-12·s_max`.
pub fn least_squares_solution(a: &Matrix, b: &Vector) -> Vector {
    let svd = a.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    svd.solve(b, 1e-12 * s_max).unwrap_or_else(|_| Vector::zeros(a.ncols()))
}

#[derive(Debug, Clone)]
pub struct PhiStar {
    pub value: f64,
    pub x: Vector,
    pub iterations: usize,
}

/// φ* by restarted FISTA to a fixed-point residual `‖y − T(y)‖ ≤ tol·1e-2`.
pub fn reference_phi_star(instance: &BilevelInstance, tol: f64) -> Result<f64> {
    Ok(reference_phi_star_from(instance, &Vector::zeros(instance.dim()), tol)?.value)
}

/// [`reference_phi_star`] from a given start. With `g ≡ 0` the iterative value
/// is cross-checked against `φ(A⁺b)` and the smaller of the two is kept.
pub fn reference_phi_star_from(instance: &BilevelInstance, x0: &Vector, tol: f64) -> Result<PhiStar> {
    check_tol(tol)?;
    if x0.len() != instance.dim() {
        return Err(BenchError::invalid("start has the wrong dimension"));
    }
    let lf = instance.lipschitz();
    let mut best = if lf == 0.0 {
        let x = instance.inner.prox(x0, 1.0);
        PhiStar {
            value: instance.eval_phi(&x),
            x,
            iterations: 0,
        }
    } else {
        let smooth = |x: &Vector| instance.smooth.value_and_gradient(x);
        let objective = |x: &Vector| instance.eval_phi(x);
        let prox = |x: &Vector, t: f64| instance.inner.prox(x, t);
        let problem = Composite {
            smooth: &smooth,
            objective: &objective,
            prox: &prox,
            lipschitz: lf,
        };
        let r = fista(&problem, x0, &restarted(), &mut |s| s.grad_map / lf <= tol * 1e-2);
        PhiStar {
            value: r.value,
            x: r.x,
            iterations: r.iterations,
        }
    };
    if instance.inner.is_zero() {
        let x = least_squares_solution(instance.smooth.matrix(), instance.smooth.rhs());
        let direct = instance.eval_phi(&x);
        if (direct - best.value).abs() > tol {
            log::warn!("direct φ* {direct:.12e} and iterative {:.12e} disagree", best.value);
        }
        if direct < best.value {
            best.value = direct;
            best.x = x;
        }
    }
    Ok(best)
}

fn stack(a: &Vector, b: &Vector) -> Vector {
    let n = a.len();
    Vector::from_fn(2 * n, |i, _| if i < n { a[i] } else { b[i - n] })
}

fn split(y: &Vector) -> (Vector, Vector) {
    let n = y.len() / 2;
    (y.rows(0, n).into_owned(), y.rows(n, n).into_owned())
}

fn lifted_fista(instance: &BilevelInstance, alpha: f64, y1: &Vector, y2: &Vector, tol: f64) -> ApgResult {
    let smooth = |y: &Vector| {
        let (a, b) = split(y);
        let (fv, gf) = instance.smooth.value_and_gradient(&a);
        let d = &a - &b;
        (fv + d.norm_squared(), stack(&(gf + &d * 2.0), &(d * -2.0)))
    };
    let objective = |y: &Vector| {
        let (a, b) = split(y);
        instance.eval_phi(&a) + (&a - &b).norm_squared()
    };
    let prox = |y: &Vector, t: f64| {
        let (a, b) = split(y);
        stack(&instance.inner.prox(&a, t), &instance.outer.project(&b, alpha))
    };
    let l = instance.lifted_lipschitz();
    let problem = Composite {
        smooth: &smooth,
        objective: &objective,
        prox: &prox,
        lipschitz: l,
    };
    fista(&problem, &stack(y1, y2), &restarted(), &mut |s| s.grad_map / l <= tol * 1e-2)
}

/// `h(α) = min φ(y₁) + ‖y₁ − y₂‖²` over `y₂ ∈ Lev_ω(α)`: the best of restarted
/// FISTA runs from three starts (the origin, a minimizer of φ, and that
/// minimizer's projection onto the level set).
pub fn reference_h(instance: &BilevelInstance, alpha: f64, tol: f64) -> Result<f64> {
    check_tol(tol)?;
    if !(alpha >= instance.outer.lower_bound()) {
        return Err(BenchError::invalid(format!("level {alpha} is below inf ω")));
    }
    let n = instance.dim();
    let x_phi = reference_phi_star_from(instance, &Vector::zeros(n), tol)?.x;
    let origin = instance.inner.prox(&Vector::zeros(n), 1.0);
    let p_phi = instance.outer.project(&x_phi, alpha);
    let starts = [
        (origin.clone(), instance.outer.project(&origin, alpha)),
        (x_phi.clone(), p_phi.clone()),
        (instance.inner.prox(&p_phi, 1.0), p_phi),
    ];
    let best = starts
        .iter()
        .map(|(a, b)| lifted_fista(instance, alpha, a, b, tol).value)
        .fold(f64::INFINITY, f64::min);
    Ok(best)
}

/// Minimizer of `φ + λω` by restarted FISTA, warm-started at `x0`.
pub fn solve_regularized(instance: &BilevelInstance, lambda: f64, x0: &Vector, tol: f64) -> Result<ApgResult> {
    check_tol(tol)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(BenchError::invalid(format!("λ must be finite and ≥ 0, got {lambda}")));
    }
    // Fails early for pairings without a closed-form prox.
    instance.outer.prox_with_inner(&instance.inner, x0, lambda)?;
    let lf = instance.lipschitz();
    if lf == 0.0 {
        return Err(BenchError::invalid("f is constant; the path is degenerate"));
    }
    let smooth = |x: &Vector| instance.smooth.value_and_gradient(x);
    let objective = |x: &Vector| instance.eval_phi(x) + lambda * instance.eval_omega(x);
    let prox = |x: &Vector, t: f64| {
        instance
            .outer
            .prox_with_inner(&instance.inner, x, t * lambda)
            .expect("checked above")
    };
    let problem = Composite {
        smooth: &smooth,
        objective: &objective,
        prox: &prox,
        lipschitz: lf,
    };
    Ok(fista(&problem, x0, &restarted(), &mut |s| s.grad_map / lf <= tol * 1e-2))
}

/// Path estimate of ω*.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OmegaStar {
    /// `upper` when available, else `lower`.
    pub value: f64,
    /// `ω(x_λ)`; never above ω* when `x_λ` is exact.
    pub lower: f64,
    /// ω at the projection of `x_λ` onto `{x : Ax = Ax*}` when that
    /// projection lies in dom(g). Minimizers of `‖Ax − b‖² + g` share `Ax`, so
    /// the projection is then in `X*` and gives an upper bound.
    pub upper: Option<f64>,
    pub lambda: f64,
    pub phi_gap: f64,
    pub x: Vec<f64>,
}

/// Orthogonal projection onto `{x : Ax = A·x_ls}`, which is `X*` for `g ≡ 0`.
pub fn project_onto_solution_set(a: &Matrix, x_ls: &Vector, x: &Vector) -> Vector {
    let r = a * (x - x_ls);
    x - least_squares_solution(a, &r)
}

/// Solves `min φ + λ_ℓ ω` for `λ_ℓ = λ_max(AᵀA)/2^ℓ`, `ℓ = 1..25`, warm
/// starting each from the last, and reads ω off the smallest λ whose φ-gap is
/// at most `tol`.
pub fn reference_omega_star(instance: &BilevelInstance, tol: f64) -> Result<OmegaStar> {
    check_tol(tol)?;
    let n = instance.dim();
    let phi = reference_phi_star_from(instance, &Vector::zeros(n), tol)?;
    let top = 0.5 * instance.lipschitz();
    let mut x = instance.inner.prox(&Vector::zeros(n), 1.0);
    let mut chosen: Option<(f64, f64, Vector)> = None;
    for l in 1..=PATH_DEPTH {
        let lambda = top / 2f64.powi(l as i32);
        x = solve_regularized(instance, lambda, &x, tol)?.x;
        let gap = instance.eval_phi(&x) - phi.value;
        if gap <= tol {
            chosen = Some((lambda, gap, x.clone()));
        }
    }
    let (lambda, phi_gap, x) = chosen.ok_or_else(|| {
        BenchError::invalid(format!("no path point reached a φ-gap of {tol:e}"))
    })?;
    let lower = instance.eval_omega(&x);
    let p = project_onto_solution_set(instance.smooth.matrix(), &phi.x, &x);
    let upper = instance
        .inner
        .contains(&p)
        .then(|| instance.eval_omega(&p).max(lower));
    Ok(OmegaStar {
        value: upper.unwrap_or(lower),
        lower,
        upper,
        lambda,
        phi_gap,
        x: x.iter().copied().collect(),
    })
}
