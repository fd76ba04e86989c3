//! Minimum-volume enclosing ellipses of planar clouds (Khachiyan's
//! barycentric coordinate ascent).

use serde::{Deserialize, Serialize};

use crate::error::{GjeError, Result};
use crate::hull::{convex_hull, P2};
use crate::linalg::{Matrix, Vector};

const CONTAINMENT_TOL: f64 = 1e-8;

/// E = {x : (x − c)ᵀ A (x − c) ≤ 1} together with the inner factor α:
/// c + α(E − c) ⊆ hull ⊆ E.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JohnEllipsoid {
    pub center: P2,
    pub shape: [[f64; 2]; 2],
    pub alpha: f64,
    /// min over hull edges of (edge offset − support of αE); ≥ −1e−8 when
    /// the inner containment holds.
    pub inner_margin: f64,
    /// max over the cloud of (x − c)ᵀA(x − c) − 1.
    pub outer_excess: f64,
    pub iterations: usize,
}

impl JohnEllipsoid {
    fn inv_shape(&self) -> [[f64; 2]; 2] {
        let [[a, b], [c, d]] = self.shape;
        let det = a * d - b * c;
        [[d / det, -b / det], [-c / det, a / det]]
    }

    pub fn quad(&self, p: P2) -> f64 {
        let (x, y) = (p[0] - self.center[0], p[1] - self.center[1]);
        let s = &self.shape;
        s[0][0] * x * x + (s[0][1] + s[1][0]) * x * y + s[1][1] * y * y
    }

    pub fn contains(&self, p: P2, tol: f64) -> bool {
        self.quad(p) <= 1.0 + tol
    }

    /// max over E of ⟨w, x⟩.
    pub fn support(&self, w: P2) -> f64 {
        let q = self.inv_shape();
        let r = q[0][0] * w[0] * w[0] + (q[0][1] + q[1][0]) * w[0] * w[1] + q[1][1] * w[1] * w[1];
        w[0] * self.center[0] + w[1] * self.center[1] + r.max(0.0).sqrt()
    }

    pub fn area(&self) -> f64 {
        let [[a, b], [c, d]] = self.shape;
        std::f64::consts::PI / (a * d - b * c).sqrt()
    }

    pub fn verified(&self) -> bool {
        self.inner_margin >= -CONTAINMENT_TOL && self.outer_excess <= CONTAINMENT_TOL
    }
}

pub fn john_ellipsoid(cloud: &[P2]) -> Result<JohnEllipsoid> {
    john_ellipsoid_with(cloud, 1e-10, 200_000)
}

pub fn john_ellipsoid_with(cloud: &[P2], tol: f64, max_iter: usize) -> Result<JohnEllipsoid> {
    let hull = convex_hull(cloud, 1e-12);
    let scale = hull.vertices.iter().flat_map(|p| p.iter().map(|v| v.abs())).fold(1.0, f64::max);
    if hull.is_degenerate() || hull.area() <= 1e-14 * scale * scale {
        return Err(GjeError::Degenerate("the cloud does not span the plane".into()));
    }
    let pts = &hull.vertices;
    let n = pts.len();
    let d = 2.0;
    let lifted: Vec<Vector<f64>> = pts.iter().map(|p| Vector::from_slice(&[p[0], p[1], 1.0])).collect();
    let mut w = vec![1.0 / n as f64; n];
    let mut iterations = 0;
    loop {
        let mut x = Matrix::zeros(3, 3);
        for (q, wi) in lifted.iter().zip(&w) {
            x = x.add(&Matrix::outer(q, q).scale(*wi));
        }
        let xi = x.inverse().ok_or_else(|| GjeError::Degenerate("singular moment matrix".into()))?;
        let (j, mj) = lifted
            .iter()
            .map(|q| q.dot(&xi.matvec(q)))
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, v)| if v > b.1 { (i, v) } else { b });
        if mj <= (d + 1.0) * (1.0 + tol) || iterations >= max_iter {
            break;
        }
        let step = (mj - d - 1.0) / ((d + 1.0) * (mj - 1.0));
        for wi in w.iter_mut() {
            *wi *= 1.0 - step;
        }
        w[j] += step;
        iterations += 1;
    }
    let c = [0, 1].map(|a| pts.iter().zip(&w).map(|(p, wi)| wi * p[a]).sum::<f64>());
    let mut cov = [[0.0; 2]; 2];
    for (p, wi) in pts.iter().zip(&w) {
        let v = [p[0] - c[0], p[1] - c[1]];
        for a in 0..2 {
            for b in 0..2 {
                cov[a][b] += wi * v[a] * v[b];
            }
        }
    }
    let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    if !(det > 0.0) {
        return Err(GjeError::Degenerate("singular covariance".into()));
    }
    let mut e = JohnEllipsoid {
        center: c,
        shape: [[cov[1][1] / (d * det), -cov[0][1] / (d * det)], [-cov[1][0] / (d * det), cov[0][0] / (d * det)]],
        alpha: 1.0 / d,
        inner_margin: 0.0,
        outer_excess: 0.0,
        iterations,
    };
    // Rescale so the hull sits exactly inside.
    let s = pts.iter().map(|p| e.quad(*p)).fold(0.0, f64::max);
    for row in e.shape.iter_mut() {
        for v in row.iter_mut() {
            *v /= s;
        }
    }
    e.outer_excess = cloud.iter().map(|p| e.quad(*p) - 1.0).fold(f64::NEG_INFINITY, f64::max);
    let mut margin = f64::INFINITY;
    for k in 0..n {
        let (a, b) = (pts[k], pts[(k + 1) % n]);
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let nrm = [(b[1] - a[1]) / len, -(b[0] - a[0]) / len];
        let off = nrm[0] * a[0] + nrm[1] * a[1];
        let sup = nrm[0] * c[0] + nrm[1] * c[1] + e.alpha * (e.support(nrm) - nrm[0] * c[0] - nrm[1] * c[1]);
        margin = margin.min(off - sup);
    }
    e.inner_margin = margin;
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn square_gets_its_circumcircle() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]];
        let e = john_ellipsoid(&sq).unwrap();
        assert!((e.center[0] - 0.5).abs() < 1e-9 && (e.center[1] - 0.5).abs() < 1e-9);
        for (got, want) in e.shape.iter().flatten().zip([2.0, 0.0, 0.0, 2.0]) {
            assert!((got - want).abs() < 1e-8, "{:?}", e.shape);
        }
        assert!(e.verified(), "{e:?}");
        // A square is symmetric, so even α = 1/√2 is attained.
        assert!(e.inner_margin > 0.1);
    }

    #[test]
    fn triangle_gets_the_steiner_circumellipse() {
        let t = [[0.0, 0.0], [3.0, 0.2], [0.7, 2.0]];
        let e = john_ellipsoid(&t).unwrap();
        let g = [(0.0 + 3.0 + 0.7) / 3.0, (0.0 + 0.2 + 2.0) / 3.0];
        assert!((e.center[0] - g[0]).abs() < 1e-9 && (e.center[1] - g[1]).abs() < 1e-9);
        let tri_area = 0.5 * (3.0f64 * 2.0 - 0.2 * 0.7).abs();
        let want = 4.0 * PI / (3.0 * 3.0f64.sqrt()) * tri_area;
        assert!((e.area() - want).abs() < 1e-9 * want, "{} vs {want}", e.area());
        for p in t {
            assert!((e.quad(p) - 1.0).abs() < 1e-9);
        }
        // The inner ellipse is the Steiner inellipse, tangent at the midpoints.
        assert!(e.verified() && e.inner_margin.abs() < 1e-9, "{e:?}");
    }

    #[test]
    fn disc_samples_give_the_unit_disc() {
        let pts: Vec<P2> = (0..400).map(|k| {
            let a = k as f64 * 0.7548776662466927 * std::f64::consts::TAU;
            let r = ((k % 97) as f64 / 96.0).sqrt();
            [r * a.cos(), r * a.sin()]
        }).chain((0..64).map(|k| {
            let a = std::f64::consts::TAU * k as f64 / 64.0;
            [a.cos(), a.sin()]
        })).collect();
        let e = john_ellipsoid(&pts).unwrap();
        assert!((e.area() - PI).abs() < 0.01 * PI, "{}", e.area());
        assert!(e.center[0].abs() < 0.01 && e.center[1].abs() < 0.01);
        assert!(e.verified());
    }

    #[test]
    fn flat_clouds_are_rejected() {
        assert!(matches!(john_ellipsoid(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]), Err(GjeError::Degenerate(_))));
        assert!(john_ellipsoid(&[[0.0, 0.0]]).is_err());
    }
}
