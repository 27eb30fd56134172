//! Bilevel instances: the inner composite objective φ = f + g, the outer
//! function ω, and the lifted objective
//! φ̂^α(y) = φ(y₁) + ‖y₁ − y₂‖² + δ_{Lev_ω(α)}(y₂) that every solver works on.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};
use crate::geometry::{OuterFunction, OuterSpec};
use crate::linalg::{self, level_tolerance};
use crate::{Matrix, Vector};

/// `f(x) = ‖Ax − b‖²` with gradient `2Aᵀ(Ax − b)` and `L_f = 2λ_max(AᵀA)`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    a: Matrix,
    b: Vector,
    lipschitz: f64,
}

impl LeastSquares {
    pub fn new(a: Matrix, b: Vector) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(SolverError::invalid(format!(
                "matrix has {} rows but b has {} entries",
                a.nrows(),
                b.len()
            )));
        }
        if a.ncols() == 0 {
            return Err(SolverError::invalid("matrix has no columns"));
        }
        let lipschitz = 2.0 * linalg::lambda_max_gram(&a);
        Ok(Self { a, b, lipschitz })
    }

    /// Overrides the computed Lipschitz constant, e.g. with an analytic value.
    pub fn with_lipschitz(mut self, lipschitz: f64) -> Result<Self> {
        if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
            return Err(SolverError::invalid("Lipschitz constant must be finite and ≥ 0"));
        }
        self.lipschitz = lipschitz;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn rhs(&self) -> &Vector {
        &self.b
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn value(&self, x: &Vector) -> f64 {
        (&self.a * x - &self.b).norm_squared()
    }

    pub fn value_and_gradient(&self, x: &Vector) -> (f64, Vector) {
        let r = &self.a * x - &self.b;
        let g = self.a.tr_mul(&r) * 2.0;
        (r.norm_squared(), g)
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        self.value_and_gradient(x).1
    }
}

/// The nonsmooth inner part `g`. Every shipped kind is an indicator, so `g`
/// only ever takes the values 0 and +∞.
#[derive(Debug, Clone, PartialEq)]
pub enum InnerRegularizer {
    /// `g ≡ 0`.
    Zero,
    /// Indicator of the nonnegative orthant.
    NonNeg,
    /// Indicator of `{x : l ≤ x ≤ u}`.
    Box { lower: Vector, upper: Vector },
}

impl InnerRegularizer {
    pub fn boxed(lower: Vector, upper: Vector) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(SolverError::invalid("box bounds have different lengths"));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l <= u)) {
            return Err(SolverError::invalid("box requires lower ≤ upper componentwise"));
        }
        Ok(InnerRegularizer::Box { lower, upper })
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, InnerRegularizer::Zero)
    }

    pub fn contains(&self, x: &Vector) -> bool {
        match self {
            InnerRegularizer::Zero => true,
            InnerRegularizer::NonNeg => x.iter().all(|v| *v >= -level_tolerance(0.0)),
            InnerRegularizer::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper.iter()))
                .all(|(v, (l, u))| *v >= l - level_tolerance(*l) && *v <= u + level_tolerance(*u)),
        }
    }

    pub fn evaluate(&self, x: &Vector) -> f64 {
        if self.contains(x) {
            0.0
        } else {
            f64::INFINITY
        }
    }

    /// `prox_{t·g}(x)`; for indicators the step `t` plays no role.
    pub fn prox(&self, x: &Vector, _t: f64) -> Vector {
        match self {
            InnerRegularizer::Zero => x.clone(),
            InnerRegularizer::NonNeg => x.map(|v| v.max(0.0)),
            InnerRegularizer::Box { lower, upper } => {
                Vector::from_fn(x.len(), |i, _| x[i].clamp(lower[i], upper[i]))
            }
        }
    }

    /// `argmin_p ⟨c, p⟩ + g(p)`, available only when `dom(g)` is compact.
    /// Zero costs pick the lower bound (the `sign(0) = +1` convention).
    pub fn linear_oracle(&self, c: &Vector) -> Option<Vector> {
        match self {
            InnerRegularizer::Box { lower, upper } => Some(Vector::from_fn(c.len(), |i, _| {
                if c[i] < 0.0 {
                    upper[i]
                } else {
                    lower[i]
                }
            })),
            _ => None,
        }
    }

    pub fn domain_diameter(&self) -> f64 {
        match self {
            InnerRegularizer::Box { lower, upper } => (upper - lower).norm(),
            _ => f64::INFINITY,
        }
    }

    /// `argmin ⟨c, p⟩` over `dom(g) ∩ B(center, radius)` for a `center` in
    /// `dom(g)`. Makes conditional-gradient steps available on unbounded
    /// domains.
    pub fn ball_linear_oracle(&self, c: &Vector, center: &Vector, radius: f64) -> Vector {
        let cn = c.norm();
        if cn == 0.0 || radius <= 0.0 {
            return center.clone();
        }
        if self.is_zero() {
            return center - c * (radius / cn);
        }
        // p(t) = Proj_dom(center − t·c) moves monotonically away from the
        // center; find the t where it meets the sphere.
        let ray = |t: f64| self.prox(&(center - c * t), 1.0);
        let dist = |t: f64| (ray(t) - center).norm();
        let mut hi = radius / cn;
        let mut grew = 0;
        while dist(hi) < radius {
            hi *= 2.0;
            grew += 1;
            if grew > 200 || !hi.is_finite() {
                // The whole ray stays inside the ball; its limit is optimal.
                return ray(hi);
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if dist(mid) <= radius {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        ray(lo)
    }
}

/// Known optimal values, attached to test and benchmark instances.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub phi_star: Option<f64>,
    pub omega_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_star: Option<Vec<f64>>,
}

/// A point `y = (y₁, y₂)` of the lifted problem, tagged with the level it
/// was created at.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedPoint {
    pub y1: Vector,
    pub y2: Vector,
    pub alpha_tag: f64,
}

impl LiftedPoint {
    pub fn new(y1: Vector, y2: Vector, alpha_tag: f64) -> Self {
        Self { y1, y2, alpha_tag }
    }

    /// A point with `y₁ = y₂ = x`, used by the smooth-inner formulation.
    pub fn diagonal(x: Vector, alpha_tag: f64) -> Self {
        Self {
            y2: x.clone(),
            y1: x,
            alpha_tag,
        }
    }

    pub fn gap_sq(&self) -> f64 {
        (&self.y1 - &self.y2).norm_squared()
    }

    pub fn retag(mut self, alpha: f64) -> Self {
        self.alpha_tag = alpha;
        self
    }

    /// Squared Euclidean distance in the product space.
    pub fn dist_sq(&self, other: &LiftedPoint) -> f64 {
        (&self.y1 - &other.y1).norm_squared() + (&self.y2 - &other.y2).norm_squared()
    }
}

/// A simple bilevel problem: minimize ω over `argmin φ`, φ = f + g.
#[derive(Debug, Clone)]
pub struct BilevelInstance {
    pub smooth: LeastSquares,
    pub inner: InnerRegularizer,
    pub outer: OuterFunction,
    pub reference: Option<Reference>,
}

impl BilevelInstance {
    pub fn new(smooth: LeastSquares, inner: InnerRegularizer, outer: OuterFunction) -> Result<Self> {
        let n = smooth.dim();
        if let InnerRegularizer::Box { lower, .. } = &inner {
            if lower.len() != n {
                return Err(SolverError::invalid(format!(
                    "box bounds have length {} but the problem has dimension {n}",
                    lower.len()
                )));
            }
        }
        if let Some(d) = outer.geometry.dim() {
            if d != n {
                return Err(SolverError::invalid(format!(
                    "outer function has dimension {d} but the problem has dimension {n}"
                )));
            }
        }
        Ok(Self {
            smooth,
            inner,
            outer,
            reference: None,
        })
    }

    pub fn with_reference(mut self, reference: Reference) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }

    pub fn lipschitz(&self) -> f64 {
        self.smooth.lipschitz()
    }

    /// Smoothness constant of the lifted smooth part `f(y₁) + ‖y₁ − y₂‖²`:
    /// the top eigenvalue of `[[H + 2I, −2I], [−2I, 2I]]` over `0 ⪯ H ⪯ L_f·I`,
    /// i.e. `(L_f + 4 + √(L_f² + 16))/2`. The coupling term alone has
    /// curvature 4 along `(d, −d)`, so `L_f + 2` is not enough.
    pub fn lifted_lipschitz(&self) -> f64 {
        let lf = self.smooth.lipschitz();
        0.5 * (lf + 4.0 + lf.hypot(4.0))
    }

    /// φ(x) = f(x) + g(x); +∞ outside `dom(g)`.
    pub fn eval_phi(&self, x: &Vector) -> f64 {
        let g = self.inner.evaluate(x);
        if g.is_infinite() {
            return f64::INFINITY;
        }
        self.smooth.value(x) + g
    }

    pub fn eval_omega(&self, x: &Vector) -> f64 {
        self.outer.value(x)
    }

    /// φ̂^α(y) = φ(y₁) + ‖y₁ − y₂‖², or +∞ when `ω(y₂) > α` (up to the level
    /// tolerance).
    pub fn eval_phi_hat(&self, y: &LiftedPoint, alpha: f64) -> f64 {
        if !self.outer.contains(&y.y2, alpha) {
            return f64::INFINITY;
        }
        self.eval_phi(&y.y1) + y.gap_sq()
    }

    /// Gradient of `f̂(y) = f(y₁) + ‖y₁ − y₂‖²`: `(∇f(y₁) + 2(y₁ − y₂), 2(y₂ − y₁))`.
    pub fn grad_f_hat(&self, y: &LiftedPoint) -> (Vector, Vector) {
        let (_, g1, g2) = self.f_hat_value_and_gradient(y);
        (g1, g2)
    }

    pub(crate) fn f_hat_value_and_gradient(&self, y: &LiftedPoint) -> (f64, Vector, Vector) {
        let (fv, gf) = self.smooth.value_and_gradient(&y.y1);
        let diff = &y.y1 - &y.y2;
        let value = fv + diff.norm_squared();
        let g1 = gf + &diff * 2.0;
        let g2 = diff * -2.0;
        (value, g1, g2)
    }

    /// Distance from `x` to the level set `Lev_ω(alpha)`.
    pub fn level_distance(&self, x: &Vector, alpha: f64) -> f64 {
        (x - self.outer.project(x, alpha)).norm()
    }
}

/// JSON description of an instance: least-squares data plus the kinds of `g`
/// and ω.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceDescription {
    /// Row-major dense matrix, one inner array per row.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    #[serde(default)]
    pub inner: InnerSpec,
    pub outer: OuterSpec,
    /// Optional override of `L_f`; computed by power iteration when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Reference>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InnerSpec {
    #[default]
    None,
    Nonneg,
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl InnerSpec {
    pub fn build(&self) -> Result<InnerRegularizer> {
        match self {
            InnerSpec::None => Ok(InnerRegularizer::Zero),
            InnerSpec::Nonneg => Ok(InnerRegularizer::NonNeg),
            InnerSpec::Box { lower, upper } => InnerRegularizer::boxed(
                Vector::from_vec(lower.clone()),
                Vector::from_vec(upper.clone()),
            ),
        }
    }
}

impl InstanceDescription {
    pub fn build(&self) -> Result<BilevelInstance> {
        let m = self.a.len();
        if m == 0 {
            return Err(SolverError::invalid("matrix has no rows"));
        }
        let n = self.a[0].len();
        if self.a.iter().any(|row| row.len() != n) {
            return Err(SolverError::invalid("matrix rows have different lengths"));
        }
        let a = Matrix::from_fn(m, n, |i, j| self.a[i][j]);
        let b = Vector::from_vec(self.b.clone());
        let mut smooth = LeastSquares::new(a, b)?;
        if let Some(l) = self.lipschitz {
            smooth = smooth.with_lipschitz(l)?;
        }
        let inner = self.inner.build()?;
        let outer = self.outer.build(n)?;
        let mut instance = BilevelInstance::new(smooth, inner, outer)?;
        instance.reference = self.reference.clone();
        Ok(instance)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| SolverError::invalid(format!("instance JSON: {e}")))
    }
}
