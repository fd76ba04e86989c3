//! Coordinate charts. Generating functions are evaluated on ambient
//! (embedded) coordinates and differentiated in chart coordinates.

use crate::error::{GjeError, Result};
use crate::linalg::{Matrix, Vector};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub enum Chart<T> {
    /// Flat coordinates, chart = ambient.
    Euclidean { dim: usize },
    /// Orthographic chart of the unit sphere in ℝ³ around `pole`:
    /// ξ ↦ ξ₁e₁ + ξ₂e₂ + √(1 − |ξ|²)·pole, valid for |ξ| < `cap`.
    Sphere { pole: Vector<T>, e1: Vector<T>, e2: Vector<T>, cap: T },
    /// The horizontal plane {y₃ = height} in ℝ³ with coordinates (y₁, y₂).
    Plane { height: T },
}

impl<T: Real> Chart<T> {
    /// Sphere chart with validity cap given as a polar angle in degrees.
    pub fn sphere(pole: [f64; 3], cap_angle_deg: f64) -> Result<Self> {
        let p = Vector::<T>::from_f64(&pole);
        let n = p.norm();
        if !(n.as_f64() > 0.0) || !p.is_finite() {
            return Err(GjeError::Config(format!("sphere pole {pole:?} is not a nonzero vector")));
        }
        if !(cap_angle_deg > 0.0 && cap_angle_deg < 90.0) {
            return Err(GjeError::Config(format!("cap angle {cap_angle_deg} must lie in (0, 90)")));
        }
        let pole = p.scale(T::one() / n);
        let a = if pole[0].abs() < T::lit(0.9) {
            Vector::unit(3, 0)
        } else {
            Vector::unit(3, 1)
        };
        let e1 = a.axpy(-a.dot(&pole), &pole).normalized();
        let e2 = pole.cross(&e1);
        let cap = T::lit(cap_angle_deg.to_radians().sin());
        Ok(Chart::Sphere { pole, e1, e2, cap })
    }

    pub fn dim(&self) -> usize {
        match self {
            Chart::Euclidean { dim } => *dim,
            Chart::Sphere { .. } | Chart::Plane { .. } => 2,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            Chart::Euclidean { dim } => *dim,
            Chart::Sphere { .. } | Chart::Plane { .. } => 3,
        }
    }

    pub fn contains(&self, c: &Vector<T>) -> bool {
        if c.len() != self.dim() || !c.is_finite() {
            return false;
        }
        match self {
            Chart::Sphere { cap, .. } => c.norm_sq() < *cap * *cap,
            _ => true,
        }
    }

    pub fn embed(&self, c: &Vector<T>) -> Vector<T> {
        match self {
            Chart::Euclidean { .. } => *c,
            Chart::Sphere { pole, e1, e2, .. } => {
                let w = (T::one() - c.norm_sq()).sqrt();
                e1.scale(c[0]).axpy(c[1], e2).axpy(w, pole)
            }
            Chart::Plane { height } => Vector::from_slice(&[c[0], c[1], *height]),
        }
    }

    /// Ambient-by-chart Jacobian of the embedding.
    pub fn jacobian(&self, c: &Vector<T>) -> Matrix<T> {
        match self {
            Chart::Euclidean { dim } => Matrix::identity(*dim),
            Chart::Sphere { pole, e1, e2, .. } => {
                let w = (T::one() - c.norm_sq()).sqrt();
                let c1 = e1.axpy(-c[0] / w, pole);
                let c2 = e2.axpy(-c[1] / w, pole);
                Matrix::from_fn(3, 2, |i, j| if j == 0 { c1[i] } else { c2[i] })
            }
            Chart::Plane { .. } => {
                Matrix::from_fn(3, 2, |i, j| if i == j { T::one() } else { T::zero() })
            }
        }
    }

    /// Σ_k grad_k ∂²E_k/∂cⁱ∂cʲ for an ambient gradient `grad`.
    pub fn curvature_term(&self, c: &Vector<T>, grad: &Vector<T>) -> Matrix<T> {
        let n = self.dim();
        match self {
            Chart::Sphere { pole, .. } => {
                let w2 = T::one() - c.norm_sq();
                let w = w2.sqrt();
                let gp = grad.dot(pole);
                Matrix::from_fn(n, n, |i, j| {
                    let d = if i == j { T::one() } else { T::zero() };
                    gp * (-d / w - c[i] * c[j] / (w2 * w))
                })
            }
            _ => Matrix::zeros(n, n),
        }
    }

    /// Inverse of [`Chart::embed`] for points on the embedded manifold.
    pub fn lift(&self, v: &Vector<T>) -> Result<Vector<T>> {
        match self {
            Chart::Euclidean { dim } => {
                if v.len() != *dim {
                    return Err(GjeError::Domain(format!("expected {dim} coordinates, got {v:?}")));
                }
                Ok(*v)
            }
            Chart::Sphere { pole, e1, e2, .. } => {
                if v.len() != 3 || (v.norm() - T::one()).abs() > T::lit(1e-12).max(T::epsilon() * T::lit(8.0)) {
                    return Err(GjeError::Domain(format!("{v:?} is not a unit vector")));
                }
                if v.dot(pole) <= T::zero() {
                    return Err(GjeError::Domain(format!("{v:?} lies outside the chart hemisphere")));
                }
                let c = Vector::from_slice(&[v.dot(e1), v.dot(e2)]);
                if !self.contains(&c) {
                    return Err(GjeError::Domain(format!("{v:?} lies beyond the chart cap")));
                }
                Ok(c)
            }
            Chart::Plane { height } => {
                if v.len() != 3 || (v[2] - *height).abs() > T::lit(1e-12) * T::one().max(height.abs()) {
                    return Err(GjeError::Domain(format!("{v:?} is not on the target plane")));
                }
                Ok(Vector::from_slice(&[v[0], v[1]]))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere() -> Chart<f64> {
        Chart::sphere([0.3, -0.2, 1.0], 80.0).unwrap()
    }

    #[test]
    fn sphere_embedding_is_unit_and_lifts_back() {
        let ch = sphere();
        let c = Vector::from_slice(&[0.31, -0.42]);
        let v = ch.embed(&c);
        assert!((v.norm() - 1.0).abs() < 1e-15);
        let back = ch.lift(&v).unwrap();
        assert!((back - c).norm_inf() < 1e-15);
    }

    #[test]
    fn sphere_jacobian_matches_differences() {
        let ch = sphere();
        let c = Vector::from_slice(&[0.2, 0.5]);
        let j = ch.jacobian(&c);
        let h = 1e-6;
        for k in 0..2 {
            let d = (ch.embed(&c.axpy(h, &Vector::unit(2, k))) - ch.embed(&c.axpy(-h, &Vector::unit(2, k))))
                .scale(0.5 / h);
            for i in 0..3 {
                assert!((d[i] - j[(i, k)]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn curvature_term_matches_second_differences() {
        let ch = sphere();
        let c = Vector::from_slice(&[-0.3, 0.25]);
        let grad = Vector::from_slice(&[0.7, -1.1, 0.4]);
        let m = ch.curvature_term(&c, &grad);
        let f = |cc: &Vector<f64>| ch.embed(cc).dot(&grad);
        let h = 1e-4;
        for i in 0..2 {
            for j in 0..2 {
                let ei = Vector::unit(2, i).scale(h);
                let ej = Vector::unit(2, j).scale(h);
                let d = (f(&(c + ei + ej)) - f(&(c + ei - ej)) - f(&(c - ei + ej)) + f(&(c - ei - ej)))
                    / (4.0 * h * h);
                assert!((d - m[(i, j)]).abs() < 1e-6, "{i}{j}: {d} vs {}", m[(i, j)]);
            }
        }
    }

    #[test]
    fn cap_rejects_far_points() {
        let ch = Chart::<f64>::sphere([0.0, 0.0, 1.0], 80.0).unwrap();
        assert!(ch.contains(&Vector::from_slice(&[0.5, 0.5])));
        assert!(!ch.contains(&Vector::from_slice(&[0.99, 0.0])));
    }

    #[test]
    fn north_pole_chart_uses_xy_coordinates() {
        let ch = Chart::<f64>::sphere([0.0, 0.0, 1.0], 80.0).unwrap();
        let v = ch.embed(&Vector::from_slice(&[0.1, 0.2]));
        assert!((v[0] - 0.1).abs() < 1e-15 && (v[1] - 0.2).abs() < 1e-15);
    }
}
