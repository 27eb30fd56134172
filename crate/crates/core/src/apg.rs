//! Accelerated proximal gradient (FISTA) for `F = s + n` with `s` smooth and
//! `n` proximable. Shared by the inner solver and the reference solvers.

use crate::Vector;

/// The pieces of a composite objective, borrowed from the caller.
pub struct Composite<'a> {
    /// Value and gradient of the smooth part.
    pub smooth: &'a dyn Fn(&Vector) -> (f64, Vector),
    /// Full objective value at a prox output.
    pub objective: &'a dyn Fn(&Vector) -> f64,
    /// `prox_{t·n}`.
    pub prox: &'a dyn Fn(&Vector, f64) -> Vector,
    pub lipschitz: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ApgOptions {
    pub max_iters: usize,
    /// Gradient-based adaptive restart. Faster in practice, but voids the
    /// worst-case iteration count.
    pub restart: bool,
}

/// What the stopping rule sees after each iteration.
pub struct ApgState<'a> {
    pub iteration: usize,
    /// Extrapolated point the step was taken from.
    pub y: &'a Vector,
    /// Prox-gradient image of `y`.
    pub x: &'a Vector,
    /// `L·‖y − x‖`, the norm of the gradient mapping at `y`.
    pub grad_map: f64,
}

#[derive(Debug, Clone)]
pub struct ApgResult {
    /// Best iterate seen (by objective value).
    pub x: Vector,
    pub value: f64,
    pub iterations: usize,
    /// Gradient-mapping norm at the last step.
    pub grad_map: f64,
}

pub fn fista(
    problem: &Composite<'_>,
    x0: &Vector,
    opts: &ApgOptions,
    stop: &mut dyn FnMut(&ApgState<'_>) -> bool,
) -> ApgResult {
    let l = problem.lipschitz;
    let mut x = (problem.prox)(x0, 1.0 / l);
    let mut best_value = (problem.objective)(&x);
    let mut best = x.clone();
    let mut x_prev = x.clone();
    let mut t = 1.0f64;
    let mut grad_map = f64::INFINITY;
    let mut iterations = 0;
    for k in 1..=opts.max_iters {
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let y = &x + (&x - &x_prev) * ((t - 1.0) / t_next);
        let (_, g) = (problem.smooth)(&y);
        let x_next = (problem.prox)(&(&y - g / l), 1.0 / l);
        let step = &y - &x_next;
        grad_map = l * step.norm();
        let value = (problem.objective)(&x_next);
        if value < best_value {
            best_value = value;
            best.copy_from(&x_next);
        }
        iterations = k;
        let done = stop(&ApgState {
            iteration: k,
            y: &y,
            x: &x_next,
            grad_map,
        });
        if opts.restart && step.dot(&(&x_next - &x)) < 0.0 {
            // Momentum points uphill: drop it.
            t = 1.0;
        } else {
            t = t_next;
        }
        x_prev = std::mem::replace(&mut x, x_next);
        if done {
            break;
        }
    }
    ApgResult {
        x: best,
        value: best_value,
        iterations,
        grad_map,
    }
}
