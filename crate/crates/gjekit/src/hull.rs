//! Planar convex hulls with exact orientation tests on snapped coordinates,
//! and half-plane polygons.

use serde::{Deserialize, Serialize};

use crate::error::{GjeError, Result};

pub type P2 = [f64; 2];

fn sub(a: P2, b: P2) -> P2 {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: P2, b: P2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn cross(a: P2, b: P2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn norm(a: P2) -> f64 {
    dot(a, a).sqrt()
}

/// Convex polygon, vertices counter-clockwise without repeated or collinear
/// points. Degenerate hulls keep 1 or 2 vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hull2 {
    pub vertices: Vec<P2>,
}

/// Monotone-chain hull. Coordinates are snapped to multiples of `snap` and
/// compared in exact integer arithmetic, so nearly collinear points never
/// flip orientation.
pub fn convex_hull(points: &[P2], snap: f64) -> Hull2 {
    let q = |v: f64| (v / snap).round() as i64;
    let mut pts: Vec<(i64, i64)> = points.iter().filter(|p| p[0].is_finite() && p[1].is_finite()).map(|p| (q(p[0]), q(p[1]))).collect();
    pts.sort_unstable();
    pts.dedup();
    let back = |p: (i64, i64)| [p.0 as f64 * snap, p.1 as f64 * snap];
    if pts.len() <= 2 {
        return Hull2 { vertices: pts.into_iter().map(back).collect() };
    }
    let turn = |o: (i64, i64), a: (i64, i64), b: (i64, i64)| {
        (a.0 as i128 - o.0 as i128) * (b.1 as i128 - o.1 as i128) - (a.1 as i128 - o.1 as i128) * (b.0 as i128 - o.0 as i128)
    };
    let mut h: Vec<(i64, i64)> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = h.len();
        let it: Box<dyn Iterator<Item = &(i64, i64)>> = if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in it {
            while h.len() >= start + 2 && turn(h[h.len() - 2], h[h.len() - 1], p) <= 0 {
                h.pop();
            }
            h.push(p);
        }
        h.pop();
    }
    if h.len() < 3 {
        // All points collinear: keep the two extremes.
        h = vec![pts[0], pts[pts.len() - 1]];
    }
    Hull2 { vertices: h.into_iter().map(back).collect() }
}

impl Hull2 {
    pub fn is_degenerate(&self) -> bool {
        self.vertices.len() < 3
    }

    pub fn area(&self) -> f64 {
        let v = &self.vertices;
        (0..v.len()).map(|k| cross(v[k], v[(k + 1) % v.len()])).sum::<f64>() * 0.5
    }

    pub fn centroid(&self) -> P2 {
        let v = &self.vertices;
        let a = self.area();
        if a <= 0.0 {
            let n = v.len().max(1) as f64;
            return [v.iter().map(|p| p[0]).sum::<f64>() / n, v.iter().map(|p| p[1]).sum::<f64>() / n];
        }
        let (mut cx, mut cy) = (0.0, 0.0);
        for k in 0..v.len() {
            let (p, q) = (v[k], v[(k + 1) % v.len()]);
            let c = cross(p, q);
            cx += (p[0] + q[0]) * c;
            cy += (p[1] + q[1]) * c;
        }
        [cx / (6.0 * a), cy / (6.0 * a)]
    }

    /// max over the hull of ⟨ω, p⟩.
    pub fn support(&self, w: P2) -> f64 {
        self.vertices.iter().map(|p| dot(w, *p)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Distance between the two supporting lines with normals ±ω (ω unit).
    pub fn width(&self, w: P2) -> f64 {
        self.support(w) + self.support([-w[0], -w[1]])
    }

    /// Signed distance to the boundary: negative inside.
    pub fn signed_distance(&self, p: P2) -> f64 {
        let v = &self.vertices;
        match v.len() {
            0 => f64::INFINITY,
            1 => norm(sub(p, v[0])),
            _ => {
                let mut d = f64::INFINITY;
                let mut inside = v.len() >= 3;
                for k in 0..v.len() {
                    let (a, b) = (v[k], v[(k + 1) % v.len()]);
                    let e = sub(b, a);
                    let t = (dot(sub(p, a), e) / dot(e, e)).clamp(0.0, 1.0);
                    d = d.min(norm(sub(p, [a[0] + t * e[0], a[1] + t * e[1]])));
                    if cross(e, sub(p, a)) < 0.0 {
                        inside = false;
                    }
                }
                if inside {
                    -d
                } else {
                    d
                }
            }
        }
    }

    pub fn contains(&self, p: P2, tol: f64) -> bool {
        self.signed_distance(p) <= tol
    }

    /// Longest chord of the hull parallel to ω. The chord length is a concave
    /// function of the offset, so it peaks on a line through a vertex.
    pub fn max_chord(&self, w: P2) -> f64 {
        let v = &self.vertices;
        if v.len() < 2 {
            return 0.0;
        }
        let wn = norm(w);
        let w = [w[0] / wn, w[1] / wn];
        let perp = [-w[1], w[0]];
        if v.len() == 2 {
            let e = sub(v[1], v[0]);
            return if cross(e, w).abs() <= 1e-12 * norm(e) { norm(e) } else { 0.0 };
        }
        let mut best = 0.0f64;
        for &c in v {
            let off = dot(perp, c);
            // Intersect the line {⟨perp, p⟩ = off} with every edge.
            let mut ts = Vec::with_capacity(4);
            for k in 0..v.len() {
                let (a, b) = (v[k], v[(k + 1) % v.len()]);
                let (da, db) = (dot(perp, a) - off, dot(perp, b) - off);
                if (da <= 0.0 && db >= 0.0) || (da >= 0.0 && db <= 0.0) {
                    if da == db {
                        ts.push(dot(w, a));
                        ts.push(dot(w, b));
                    } else {
                        let t = da / (da - db);
                        ts.push(dot(w, [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]));
                    }
                }
            }
            if let (Some(lo), Some(hi)) = (ts.iter().copied().reduce(f64::min), ts.iter().copied().reduce(f64::max)) {
                best = best.max(hi - lo);
            }
        }
        best
    }
}

/// Bounded polygon given as {q : ⟨aₖ, q⟩ ≤ bₖ}, with its vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polygon2 {
    pub normals: Vec<P2>,
    pub offsets: Vec<f64>,
    pub vertices: Vec<P2>,
}

impl Polygon2 {
    /// Half-planes listed in angular order of their normals, each one
    /// contributing an edge; vertices are adjacent-pair intersections.
    pub fn from_cyclic_halfplanes(normals: Vec<P2>, offsets: Vec<f64>) -> Result<Self> {
        let n = normals.len();
        if n < 3 {
            return Err(GjeError::Degenerate("fewer than three half-planes".into()));
        }
        let mut vertices = Vec::with_capacity(n);
        for k in 0..n {
            let (a, b) = (normals[k], normals[(k + 1) % n]);
            let det = cross(a, b);
            if det.abs() < 1e-300 {
                return Err(GjeError::Degenerate("parallel adjacent half-planes".into()));
            }
            let (c, d) = (offsets[k], offsets[(k + 1) % n]);
            vertices.push([(c * b[1] - d * a[1]) / det, (a[0] * d - b[0] * c) / det]);
        }
        Ok(Polygon2 { normals, offsets, vertices })
    }

    pub fn contains(&self, q: P2, tol: f64) -> bool {
        self.normals.iter().zip(&self.offsets).all(|(a, b)| dot(*a, q) <= b + tol * norm(*a).max(1.0))
    }

    pub fn area(&self) -> f64 {
        convex_hull(&self.vertices, 1e-12).area()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Vec<P2> {
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5], [0.5, 0.0]]
    }

    #[test]
    fn hull_drops_interior_and_collinear_points() {
        let h = convex_hull(&square(), 1e-12);
        assert_eq!(h.vertices.len(), 4);
        assert!((h.area() - 1.0).abs() < 1e-15);
        assert_eq!(h.centroid(), [0.5, 0.5]);
    }

    #[test]
    fn distances_and_support() {
        let h = convex_hull(&square(), 1e-12);
        assert!((h.signed_distance([0.5, 0.5]) + 0.5).abs() < 1e-15);
        assert!((h.signed_distance([2.0, 0.5]) - 1.0).abs() < 1e-15);
        assert!((h.support([1.0, 0.0]) - 0.5 - 0.5).abs() < 1e-15);
        let w = [std::f64::consts::FRAC_1_SQRT_2; 2];
        assert!((h.width(w) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn chords_of_the_unit_square() {
        let h = convex_hull(&square(), 1e-12);
        assert!((h.max_chord([1.0, 0.0]) - 1.0).abs() < 1e-12);
        assert!((h.max_chord([1.0, 1.0]) - 2f64.sqrt()).abs() < 1e-12);
        assert!((h.max_chord([1.0, 0.5]) - 1.25f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_hulls() {
        let one = convex_hull(&[[1.0, 2.0], [1.0, 2.0]], 1e-12);
        assert_eq!(one.vertices.len(), 1);
        assert_eq!(one.max_chord([1.0, 0.0]), 0.0);
        let line = convex_hull(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]], 1e-12);
        assert_eq!(line.vertices.len(), 2);
        assert!((line.max_chord([1.0, 1.0]) - 8f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn halfplane_square() {
        let p = Polygon2::from_cyclic_halfplanes(
            vec![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]],
            vec![1.0, 1.0, 1.0, 1.0],
        )
        .unwrap();
        assert!((p.area() - 4.0).abs() < 1e-12);
        assert!(p.contains([0.9, -0.9], 0.0) && !p.contains([1.1, 0.0], 0.0));
    }
}
