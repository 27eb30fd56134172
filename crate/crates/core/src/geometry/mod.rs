//! Outer functions with tractable level sets.
//!
//! Each geometry exposes projection onto `Lev_ω(α) = {x : ω(x) ≤ α}`, a linear
//! minimization oracle over it, an upper bound on its diameter, and the
//! constants `(κ, γ)` of a global error bound
//! `dist(x, Lev_ω(α))^κ ≤ γ·[ω(x) − α]₊`.
//!
//! | ω                       | κ | γ             |
//! |-------------------------|---|---------------|
//! | `‖x‖₁`                  | 1 | 1             |
//! | `‖x − x₀‖_Q`            | 1 | 1/√λ_min(Q)   |
//! | `‖x‖₁ + ρ‖x‖²`          | 1 | 1             |
//! | `‖x‖₁ + ρ‖x‖²`          | 2 | 1/ρ           |
//! | `c + (σ/2)‖x‖²`         | 2 | 2/σ           |

mod ball;
mod elastic_net;
mod ellipsoid;
mod l1;
mod validate;

use serde::{Deserialize, Serialize};

pub use elastic_net::project_elastic_net_ball;
pub use ellipsoid::{project_ellipsoid, Ellipsoid};
pub use l1::{lmo_l1_ball, project_l1_ball, prox_l1};
pub use validate::{validate_error_bound, ErrorBoundReport, ERROR_BOUND_SLACK};

use crate::error::{Result, SolverError};
use crate::linalg::{l1_norm, level_tolerance};
use crate::model::InnerRegularizer;
use crate::{Matrix, Vector};

/// Level-set oracles of an outer function.
pub trait LevelSetGeometry {
    fn value(&self, x: &Vector) -> f64;

    /// `inf ω`; every level below it is empty.
    fn lower_bound(&self) -> f64;

    fn project(&self, x: &Vector, alpha: f64) -> Vector;

    /// A minimizer of `⟨c, ·⟩` over the level set.
    fn lmo(&self, c: &Vector, alpha: f64) -> Vector;

    /// Upper bound on the diameter of the level set.
    fn diameter(&self, alpha: f64) -> f64;

    fn contains(&self, x: &Vector, alpha: f64) -> bool {
        self.value(x) <= alpha + level_tolerance(alpha)
    }
}

#[derive(Debug, Clone)]
pub enum OuterGeometry {
    L1,
    Ellipsoid(Ellipsoid),
    ElasticNet { rho: f64 },
    /// `offset + (σ/2)‖x‖²`.
    StronglyConvex { sigma: f64, offset: f64 },
}

impl OuterGeometry {
    pub fn kind(&self) -> &'static str {
        match self {
            OuterGeometry::L1 => "l1",
            OuterGeometry::Ellipsoid(_) => "ellipsoid",
            OuterGeometry::ElasticNet { .. } => "elastic_net",
            OuterGeometry::StronglyConvex { .. } => "strongly_convex",
        }
    }

    /// Dimension fixed by the geometry's parameters, if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            OuterGeometry::Ellipsoid(e) => Some(e.dim()),
            _ => None,
        }
    }
}

impl LevelSetGeometry for OuterGeometry {
    fn value(&self, x: &Vector) -> f64 {
        match self {
            OuterGeometry::L1 => l1_norm(x),
            OuterGeometry::Ellipsoid(e) => e.value(x),
            OuterGeometry::ElasticNet { rho } => elastic_net::elastic_net_value(x, *rho),
            OuterGeometry::StronglyConvex { sigma, offset } => offset + 0.5 * sigma * x.norm_squared(),
        }
    }

    fn lower_bound(&self) -> f64 {
        match self {
            OuterGeometry::StronglyConvex { offset, .. } => *offset,
            _ => 0.0,
        }
    }

    fn project(&self, x: &Vector, alpha: f64) -> Vector {
        match self {
            OuterGeometry::L1 => l1::project_l1_unchecked(x, alpha.max(0.0)),
            OuterGeometry::Ellipsoid(e) => e.project(x, alpha.max(0.0)),
            OuterGeometry::ElasticNet { rho } => elastic_net::project_unchecked(x, *rho, alpha.max(0.0)),
            OuterGeometry::StronglyConvex { sigma, offset } => {
                ball::project(x, ball::radius(*sigma, *offset, alpha))
            }
        }
    }

    fn lmo(&self, c: &Vector, alpha: f64) -> Vector {
        match self {
            OuterGeometry::L1 => lmo_l1_ball(c, alpha.max(0.0)),
            OuterGeometry::Ellipsoid(e) => e.lmo(c, alpha.max(0.0)),
            OuterGeometry::ElasticNet { rho } => elastic_net::lmo_unchecked(c, *rho, alpha.max(0.0)),
            OuterGeometry::StronglyConvex { sigma, offset } => {
                ball::lmo(c, ball::radius(*sigma, *offset, alpha))
            }
        }
    }

    fn diameter(&self, alpha: f64) -> f64 {
        let a = alpha.max(0.0);
        match self {
            OuterGeometry::L1 => 2.0 * a,
            OuterGeometry::Ellipsoid(e) => e.diameter(a),
            OuterGeometry::ElasticNet { rho } => 2.0 * a.min((a / rho).sqrt()),
            OuterGeometry::StronglyConvex { sigma, offset } => 2.0 * ball::radius(*sigma, *offset, alpha),
        }
    }
}

/// Which error-bound row to use for the elastic net.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElasticNetRow {
    /// κ = 1, γ = 1.
    #[default]
    Linear,
    /// κ = 2, γ = 1/ρ.
    Quadratic,
}

/// An outer function ω together with its error-bound constants.
#[derive(Debug, Clone)]
pub struct OuterFunction {
    pub geometry: OuterGeometry,
    pub kappa: f64,
    pub gamma: f64,
}

impl OuterFunction {
    pub fn l1() -> Self {
        Self {
            geometry: OuterGeometry::L1,
            kappa: 1.0,
            gamma: 1.0,
        }
    }

    pub fn ellipsoid(q: Matrix, center: Vector) -> Result<Self> {
        let e = Ellipsoid::new(q, center)?;
        let gamma = 1.0 / e.lambda_min().sqrt();
        Ok(Self {
            geometry: OuterGeometry::Ellipsoid(e),
            kappa: 1.0,
            gamma,
        })
    }

    /// `‖x‖_Q`.
    pub fn qnorm(q: Matrix) -> Result<Self> {
        let n = q.nrows();
        Self::ellipsoid(q, Vector::zeros(n))
    }

    pub fn elastic_net(rho: f64, row: ElasticNetRow) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(SolverError::invalid(format!("elastic-net rho must be > 0, got {rho}")));
        }
        let (kappa, gamma) = match row {
            ElasticNetRow::Linear => (1.0, 1.0),
            ElasticNetRow::Quadratic => (2.0, 1.0 / rho),
        };
        Ok(Self {
            geometry: OuterGeometry::ElasticNet { rho },
            kappa,
            gamma,
        })
    }

    pub fn strongly_convex(sigma: f64, offset: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) || !offset.is_finite() {
            return Err(SolverError::invalid("strongly convex outer needs finite σ > 0 and offset"));
        }
        Ok(Self {
            geometry: OuterGeometry::StronglyConvex { sigma, offset },
            kappa: 2.0,
            gamma: 2.0 / sigma,
        })
    }

    /// Replaces the error-bound constants, e.g. with a weaker pair.
    pub fn with_constants(mut self, kappa: f64, gamma: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa <= 2.0) || !(gamma > 0.0 && gamma.is_finite()) {
            return Err(SolverError::invalid("need κ ∈ (0, 2] and γ > 0"));
        }
        self.kappa = kappa;
        self.gamma = gamma;
        Ok(self)
    }

    pub fn kind(&self) -> &'static str {
        self.geometry.kind()
    }

    pub fn value(&self, x: &Vector) -> f64 {
        self.geometry.value(x)
    }

    pub fn lower_bound(&self) -> f64 {
        self.geometry.lower_bound()
    }

    pub fn project(&self, x: &Vector, alpha: f64) -> Vector {
        self.geometry.project(x, alpha)
    }

    pub fn lmo(&self, c: &Vector, alpha: f64) -> Vector {
        self.geometry.lmo(c, alpha)
    }

    pub fn diameter(&self, alpha: f64) -> f64 {
        self.geometry.diameter(alpha)
    }

    pub fn contains(&self, x: &Vector, alpha: f64) -> bool {
        self.geometry.contains(x, alpha)
    }

    /// `prox_{t·ω}(x)`.
    pub fn prox(&self, x: &Vector, t: f64) -> Vector {
        match &self.geometry {
            OuterGeometry::L1 => prox_l1(x, t),
            OuterGeometry::Ellipsoid(e) => e.prox(x, t),
            OuterGeometry::ElasticNet { rho } => elastic_net::prox(x, *rho, t),
            OuterGeometry::StronglyConvex { sigma, .. } => x / (1.0 + sigma * t),
        }
    }

    /// `prox_{t·g + s·ω}(x)` when it separates into a closed form: `g` must
    /// be zero, or an indicator of a box/orthant paired with a coordinatewise
    /// separable ω.
    pub fn prox_with_inner(&self, inner: &InnerRegularizer, x: &Vector, s: f64) -> Result<Vector> {
        match (&self.geometry, inner) {
            (_, InnerRegularizer::Zero) => Ok(self.prox(x, s)),
            (OuterGeometry::Ellipsoid(_), _) => Err(SolverError::unsupported(
                "prox of an ellipsoid norm plus an indicator has no closed form",
            )),
            // Separable, convex in each coordinate: clamping the unconstrained
            // scalar prox onto the interval is exact.
            _ => Ok(inner.prox(&self.prox(x, s), 1.0)),
        }
    }
}

/// JSON form of an outer function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OuterSpec {
    L1,
    Ellipsoid {
        q: Vec<Vec<f64>>,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    ElasticNet {
        rho: f64,
        /// 1 or 2; selects the error-bound row.
        #[serde(default)]
        kappa: Option<f64>,
    },
    Qnorm {
        q: Vec<Vec<f64>>,
    },
    StronglyConvex {
        sigma: f64,
        #[serde(default)]
        offset: f64,
    },
}

fn matrix_from_rows(rows: &[Vec<f64>], n: usize) -> Result<Matrix> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(SolverError::invalid(format!("Q must be {n}×{n}")));
    }
    Ok(Matrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl OuterSpec {
    pub fn build(&self, n: usize) -> Result<OuterFunction> {
        match self {
            OuterSpec::L1 => Ok(OuterFunction::l1()),
            OuterSpec::Ellipsoid { q, center } => {
                let q = matrix_from_rows(q, n)?;
                let center = match center {
                    Some(c) if c.len() == n => Vector::from_vec(c.clone()),
                    Some(_) => return Err(SolverError::invalid("ellipsoid center has the wrong length")),
                    None => Vector::zeros(n),
                };
                OuterFunction::ellipsoid(q, center)
            }
            OuterSpec::ElasticNet { rho, kappa } => {
                let row = match kappa {
                    None => ElasticNetRow::Linear,
                    Some(k) if *k == 1.0 => ElasticNetRow::Linear,
                    Some(k) if *k == 2.0 => ElasticNetRow::Quadratic,
                    Some(k) => {
                        return Err(SolverError::invalid(format!("elastic-net kappa must be 1 or 2, got {k}")))
                    }
                };
                OuterFunction::elastic_net(*rho, row)
            }
            OuterSpec::Qnorm { q } => OuterFunction::qnorm(matrix_from_rows(q, n)?),
            OuterSpec::StronglyConvex { sigma, offset } => OuterFunction::strongly_convex(*sigma, *offset),
        }
    }
}

/// Prox of an indicator: the componentwise clamp onto its set.
pub fn prox_indicator(x: &Vector, set: &InnerRegularizer) -> Result<Vector> {
    if let InnerRegularizer::Box { lower, upper } = set {
        if lower.len() != x.len() || upper.len() != x.len() {
            return Err(SolverError::invalid("box bounds do not match the point's dimension"));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l <= u)) {
            return Err(SolverError::invalid("box requires lower ≤ upper componentwise"));
        }
    }
    Ok(set.prox(x, 1.0))
}
