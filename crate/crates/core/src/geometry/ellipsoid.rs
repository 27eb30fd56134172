use crate::error::{Result, SolverError};
use crate::{Matrix, Vector};

/// Level sets of `ω(x) = ‖x − x₀‖_Q`. The eigendecomposition of `Q` is taken
/// once; projections then reduce to a scalar root find in the eigenbasis.
#[derive(Debug, Clone)]
pub struct Ellipsoid {
    q: Matrix,
    center: Vector,
    basis: Matrix,
    eig: Vector,
}

impl Ellipsoid {
    pub fn new(q: Matrix, center: Vector) -> Result<Self> {
        let n = q.nrows();
        if n == 0 || q.ncols() != n {
            return Err(SolverError::invalid("Q must be a non-empty square matrix"));
        }
        if center.len() != n {
            return Err(SolverError::invalid("ellipsoid center has the wrong dimension"));
        }
        let scale = q.amax().max(f64::MIN_POSITIVE);
        if (&q - q.transpose()).amax() > 1e-12 * scale {
            return Err(SolverError::invalid("Q is not symmetric"));
        }
        if q.clone().cholesky().is_none() {
            return Err(SolverError::invalid("Q is not positive definite"));
        }
        let se = q.clone().symmetric_eigen();
        if se.eigenvalues.min() <= 0.0 {
            return Err(SolverError::invalid("Q is not positive definite"));
        }
        Ok(Self {
            q,
            center,
            basis: se.eigenvectors,
            eig: se.eigenvalues,
        })
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.q
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn lambda_min(&self) -> f64 {
        self.eig.min()
    }

    pub fn lambda_max(&self) -> f64 {
        self.eig.max()
    }

    pub fn value(&self, x: &Vector) -> f64 {
        let d = x - &self.center;
        d.dot(&(&self.q * &d)).max(0.0).sqrt()
    }

    pub fn project(&self, x: &Vector, r: f64) -> Vector {
        if self.value(x) <= r {
            return x.clone();
        }
        if r <= 0.0 {
            return self.center.clone();
        }
        let y = self.basis.tr_mul(&(x - &self.center));
        let u = project_weighted(&y, &self.eig, r);
        &self.center + &self.basis * u
    }

    /// `x₀ − r·Q⁻¹c/‖c‖_{Q⁻¹}`; a zero cost is treated as `e₀`.
    pub fn lmo(&self, c: &Vector, r: f64) -> Vector {
        let mut chat = self.basis.tr_mul(c);
        if chat.iter().all(|v| *v == 0.0) {
            let mut e = Vector::zeros(c.len());
            e[0] = 1.0;
            chat = self.basis.tr_mul(&e);
        }
        let w = chat.component_div(&self.eig);
        let dual = chat.dot(&w).sqrt();
        &self.center - &self.basis * w * (r / dual)
    }

    pub fn diameter(&self, r: f64) -> f64 {
        2.0 * r.max(0.0) / self.lambda_min().sqrt()
    }

    /// `prox_{t‖· − x₀‖_Q}(x)` via Moreau: subtract the projection onto the
    /// dual-norm ball `{‖v‖_{Q⁻¹} ≤ t}`.
    pub fn prox(&self, x: &Vector, t: f64) -> Vector {
        let y = self.basis.tr_mul(&(x - &self.center));
        let inv = self.eig.map(|e| 1.0 / e);
        let dual_norm = y.component_mul(&inv).dot(&y).sqrt();
        if dual_norm <= t {
            return self.center.clone();
        }
        let v = project_weighted(&y, &inv, t);
        &self.center + &self.basis * (y - v)
    }

    /// Gradient of `‖x − x₀‖²_Q`, used as the smooth surrogate by baselines.
    pub fn squared_gradient(&self, x: &Vector) -> Vector {
        &self.q * (x - &self.center) * 2.0
    }
}

/// Projects `y` onto `{u : Σ wᵢuᵢ² ≤ r²}` for positive weights, assuming `y`
/// lies outside. Solves for the multiplier in `uᵢ = yᵢ/(1 + λwᵢ)` with
/// Newton safeguarded by bisection, then rescales onto the boundary.
pub(crate) fn project_weighted(y: &Vector, w: &Vector, r: f64) -> Vector {
    let r2 = r * r;
    let eval = |lam: f64| {
        let mut s = 0.0;
        let mut ds = 0.0;
        for i in 0..y.len() {
            let d = 1.0 + lam * w[i];
            let t = w[i] * y[i] * y[i] / (d * d);
            s += t;
            ds += -2.0 * t * w[i] / d;
        }
        (s - r2, ds)
    };
    let wmin = w.min();
    let mut lo = 0.0;
    let mut hi = y.norm() / (r * wmin.sqrt()) + 1.0;
    let mut lam = 0.0;
    for _ in 0..200 {
        let (psi, dpsi) = eval(lam);
        if psi.abs() <= 1e-12 * r2.max(1e-300) {
            break;
        }
        if psi > 0.0 {
            lo = lam;
        } else {
            hi = lam;
        }
        let mut next = if dpsi < 0.0 { lam - psi / dpsi } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next == lam {
            break;
        }
        lam = next;
    }
    let u = Vector::from_fn(y.len(), |i, _| y[i] / (1.0 + lam * w[i]));
    let norm = u.component_mul(w).dot(&u).sqrt();
    if norm > 0.0 {
        u * (r / norm)
    } else {
        u
    }
}

/// Projection onto `{u : ‖u‖_Q ≤ r}`.
pub fn project_ellipsoid(x: &Vector, q: &Matrix, r: f64) -> Result<Vector> {
    if !(r > 0.0) {
        return Err(SolverError::invalid(format!("ellipsoid radius must be > 0, got {r}")));
    }
    let e = Ellipsoid::new(q.clone(), Vector::zeros(q.nrows()))?;
    if x.len() != e.dim() {
        return Err(SolverError::invalid("point has the wrong dimension"));
    }
    Ok(e.project(x, r))
}
