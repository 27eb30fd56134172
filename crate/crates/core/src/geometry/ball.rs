use crate::linalg::sign_pos;
use crate::Vector;

/// Radius of the level set of `offset + (σ/2)‖x‖²` at `alpha`.
pub(crate) fn radius(sigma: f64, offset: f64, alpha: f64) -> f64 {
    (2.0 * (alpha - offset).max(0.0) / sigma).sqrt()
}

pub(crate) fn project(x: &Vector, r: f64) -> Vector {
    let n = x.norm();
    if n <= r {
        x.clone()
    } else {
        x * (r / n)
    }
}

pub(crate) fn lmo(c: &Vector, r: f64) -> Vector {
    let n = c.norm();
    if n == 0.0 {
        let mut p = Vector::zeros(c.len());
        if !p.is_empty() {
            p[0] = -r * sign_pos(0.0);
        }
        return p;
    }
    c * (-r / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_projection() {
        let p = project(&Vector::from_vec(vec![3.0, 4.0]), 1.0);
        assert!((p - Vector::from_vec(vec![0.6, 0.8])).norm() < 1e-15);
        assert_eq!(radius(2.0, 0.5, 1.5), 1.0);
        assert_eq!(radius(2.0, 0.5, 0.0), 0.0);
    }

    #[test]
    fn lmo_direction() {
        let p = lmo(&Vector::from_vec(vec![0.0, -2.0]), 3.0);
        assert_eq!(p, Vector::from_vec(vec![0.0, 3.0]));
    }
}
