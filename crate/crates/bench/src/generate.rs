//! Random least-squares instances with a controlled spectrum.
//!
//! `A = U·diag(s)·Vᵀ` with `U`, `V` the orthonormal QR factors of Gaussian
//! matrices and `s` log-spaced from 1 down to `1/cond` over `r = min(m, n)`
//! values, so `λ_max(AᵀA) = 1` and `L_f = 2`. The signal `x̃` has `k_sparse`
//! standard-normal entries on a uniformly random support and
//! `b = A·x̃ + σ·ν` with ν standard normal.
//!
//! Draw order within an instance's stream: the `m×r` Gaussian (column-major),
//! the `n×r` Gaussian, the support, the nonzero values, the noise.

use italex_core::geometry::{ElasticNetRow, OuterSpec};
use italex_core::model::{InnerSpec, InstanceDescription};
use italex_core::{BilevelInstance, Matrix, OuterFunction, Vector};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::rng::Stream;

/// Outer functions the generator can attach.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OuterChoice {
    #[default]
    L1,
    ElasticNet {
        rho: f64,
        #[serde(default)]
        kappa: Option<f64>,
    },
    /// `‖x‖_Q` with `Q = DᵀD + I`, `D` the forward-difference matrix.
    DifferenceQnorm,
    /// `(σ/2)‖x‖²`.
    StronglyConvex { sigma: f64 },
}

impl OuterChoice {
    pub fn spec(&self, n: usize) -> OuterSpec {
        match self {
            OuterChoice::L1 => OuterSpec::L1,
            OuterChoice::ElasticNet { rho, kappa } => OuterSpec::ElasticNet {
                rho: *rho,
                kappa: *kappa,
            },
            OuterChoice::DifferenceQnorm => {
                let q = difference_gram(n);
                OuterSpec::Qnorm {
                    q: (0..n).map(|i| q.row(i).iter().copied().collect()).collect(),
                }
            }
            OuterChoice::StronglyConvex { sigma } => OuterSpec::StronglyConvex {
                sigma: *sigma,
                offset: 0.0,
            },
        }
    }
}

/// `DᵀD + I` for the `(n−1)×n` forward-difference matrix `D`.
pub fn difference_gram(n: usize) -> Matrix {
    let mut q = Matrix::identity(n, n);
    for i in 0..n.saturating_sub(1) {
        q[(i, i)] += 1.0;
        q[(i + 1, i + 1)] += 1.0;
        q[(i, i + 1)] -= 1.0;
        q[(i + 1, i)] -= 1.0;
    }
    q
}

/// The outer functions shipped with the solver, in dimension `dim`, with
/// their tabulated error-bound constants: ℓ₁; the ellipsoid norm of
/// [`difference_gram`] around a nonzero center; the elastic net with
/// `ρ = 0.05` in both rows; `(σ/2)‖x‖²` with `σ = 0.5`.
pub fn standard_outer_functions(dim: usize) -> italex_core::Result<Vec<(String, OuterFunction)>> {
    let center = Vector::from_fn(dim, |i, _| 0.1 * (i as f64 + 1.0));
    Ok(vec![
        ("l1".into(), OuterFunction::l1()),
        ("ellipsoid".into(), OuterFunction::ellipsoid(difference_gram(dim), center)?),
        ("elastic-net-k1".into(), OuterFunction::elastic_net(0.05, ElasticNetRow::Linear)?),
        ("elastic-net-k2".into(), OuterFunction::elastic_net(0.05, ElasticNetRow::Quadratic)?),
        ("strongly-convex".into(), OuterFunction::strongly_convex(0.5, 0.0)?),
    ])
}

fn default_cond() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n: usize,
    pub m: usize,
    pub k_sparse: usize,
    pub sigma: f64,
    /// Target ratio of the largest to the smallest nonzero singular value.
    #[serde(default = "default_cond")]
    pub cond: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub inner: InnerSpec,
    #[serde(default)]
    pub outer: OuterChoice,
    /// Test hook: force `A = I` (needs `m = n`).
    #[serde(default)]
    pub identity: bool,
}

impl GeneratorSpec {
    pub fn new(n: usize, m: usize, k_sparse: usize, sigma: f64, seed: u64) -> Self {
        Self {
            n,
            m,
            k_sparse,
            sigma,
            cond: default_cond(),
            seed,
            inner: InnerSpec::None,
            outer: OuterChoice::L1,
            identity: false,
        }
    }

    fn check(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(BenchError::invalid("n and m must be positive"));
        }
        if self.k_sparse > self.n {
            return Err(BenchError::invalid(format!(
                "k_sparse = {} exceeds n = {}",
                self.k_sparse, self.n
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(BenchError::invalid("noise level must be finite and ≥ 0"));
        }
        if !(self.cond >= 1.0 && self.cond.is_finite()) {
            return Err(BenchError::invalid("condition target must be finite and ≥ 1"));
        }
        if self.identity && self.m != self.n {
            return Err(BenchError::invalid("the identity hook needs m = n"));
        }
        Ok(())
    }
}

/// A generated instance with its ground truth.
#[derive(Debug, Clone)]
pub struct Generated {
    pub instance: BilevelInstance,
    pub description: InstanceDescription,
    pub x_tilde: Vector,
    /// Singular values used to build `A`, in decreasing order.
    pub singular_values: Vec<f64>,
}

/// `generate` with the default condition target, `g ≡ 0` and `ω = ‖·‖₁`.
pub fn generate_lsq(n: usize, m: usize, k_sparse: usize, sigma: f64, seed: u64) -> Result<BilevelInstance> {
    Ok(generate(&GeneratorSpec::new(n, m, k_sparse, sigma, seed), 0)?.instance)
}

fn orthonormal_columns(rng: &mut Stream, rows: usize, cols: usize) -> Matrix {
    let g = Matrix::from_fn(rows, cols, |_, _| rng.normal());
    let qr = g.qr();
    let mut q = qr.q();
    // Fix column signs so the factor does not depend on QR sign conventions.
    let r = qr.r();
    for j in 0..cols {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Instance number `index` of the family described by `spec`.
pub fn generate(spec: &GeneratorSpec, index: u64) -> Result<Generated> {
    spec.check()?;
    let (n, m) = (spec.n, spec.m);
    let mut rng = Stream::new(spec.seed, index);
    let (a, singular_values) = if spec.identity {
        (Matrix::identity(n, n), vec![1.0; n])
    } else {
        let r = m.min(n);
        let s: Vec<f64> = (0..r)
            .map(|i| {
                if r == 1 {
                    1.0
                } else {
                    spec.cond.powf(-(i as f64) / (r - 1) as f64)
                }
            })
            .collect();
        let u = orthonormal_columns(&mut rng, m, r);
        let v = orthonormal_columns(&mut rng, n, r);
        let a = &u * Matrix::from_diagonal(&Vector::from_vec(s.clone())) * v.transpose();
        (a, s)
    };
    let support = rng.sample_indices(n, spec.k_sparse);
    let mut x_tilde = Vector::zeros(n);
    for &i in &support {
        x_tilde[i] = rng.normal();
    }
    match &spec.inner {
        InnerSpec::None => {}
        InnerSpec::Nonneg => x_tilde.apply(|v| *v = v.abs()),
        InnerSpec::Box { lower, upper } => {
            if lower.len() != n || upper.len() != n {
                return Err(BenchError::invalid("box bounds must have length n"));
            }
            for i in 0..n {
                x_tilde[i] = x_tilde[i].clamp(lower[i], upper[i]);
            }
        }
    }
    let noise = Vector::from_fn(m, |_, _| rng.normal());
    let b = &a * &x_tilde + noise * spec.sigma;
    let description = InstanceDescription {
        a: (0..m).map(|i| a.row(i).iter().copied().collect()).collect(),
        b: b.iter().copied().collect(),
        inner: spec.inner.clone(),
        outer: spec.outer.spec(n),
        lipschitz: None,
        reference: None,
    };
    let instance = description.build()?;
    Ok(Generated {
        instance,
        description,
        x_tilde,
        singular_values,
    })
}

/// Ratio of the largest to the smallest of the top `min(m, n)` singular
/// values of `a`.
pub fn realized_condition(a: &Matrix) -> f64 {
    let r = a.nrows().min(a.ncols());
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s[0] / s[r - 1]
}
