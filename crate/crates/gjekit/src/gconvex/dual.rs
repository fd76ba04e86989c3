//! Sampled G-cones and G-duals over target nets, and exact polar duals.

use rayon::prelude::*;

use super::{section::Section, Envelope, GAffine};
use crate::error::{GjeError, Result};
use crate::genfun::{GenFun, SourcePoint, TargetPoint};
use crate::grid::Grid2;
use crate::hull::{convex_hull, Polygon2, P2};
use crate::sampling::{BoxDomain, Halton};

/// Low-discrepancy candidates in the target box.
pub fn target_net(target: &BoxDomain, count: usize, seed: u64) -> Vec<TargetPoint<f64>> {
    Halton::new(target.dim(), seed).take(count).map(|q| target.at(&q)).collect()
}

/// ∂_G K(x₀) for the G-cone with base S and vertex (x₀, u(x₀)):
/// candidates x̄ with G(y, x̄, H(x₀, x̄, u(x₀))) ≤ m(y) on the sampled boundary of S.
pub fn g_cone_subdiff(
    env: &Envelope<f64>,
    grid: &Grid2,
    sec: &Section,
    x0: &SourcePoint<f64>,
    net: &[TargetPoint<f64>],
) -> Result<Vec<TargetPoint<f64>>> {
    let gf = &env.gf;
    let u0 = env.value(x0)?;
    let m0 = sec.m.value(gf, x0)?;
    if u0 > m0 {
        return Err(GjeError::Hypothesis(format!("vertex {x0:?} is outside the section (u = {u0}, m = {m0})")));
    }
    let rim: Vec<(SourcePoint<f64>, f64)> = sec
        .mask
        .boundary(grid)
        .into_iter()
        .map(|k| {
            let y = grid.center(k);
            sec.m.value(gf, &y).map(|m| (y, m))
        })
        .collect::<Result<_>>()?;
    Ok(filter_net(gf, net, x0, u0, &rim, 0.0))
}

fn filter_net(
    gf: &GenFun<f64>,
    net: &[TargetPoint<f64>],
    x: &SourcePoint<f64>,
    ux: f64,
    bound: &[(SourcePoint<f64>, f64)],
    slack: f64,
) -> Vec<TargetPoint<f64>> {
    net.par_iter()
        .filter(|xb| {
            let Ok(z) = gf.h(x, xb, ux) else { return false };
            bound.iter().all(|(y, my)| gf.value(y, xb, z).is_ok_and(|g| g <= my + slack))
        })
        .copied()
        .collect()
}

/// G-dual of A with vertex x: candidates x̄ with
/// G(y, x̄, H(x, x̄, m(x))) ≤ m(y) + λ for every sampled y ∈ A.
pub fn g_dual(
    gf: &GenFun<f64>,
    a: &[SourcePoint<f64>],
    x: &SourcePoint<f64>,
    m: &GAffine<f64>,
    lambda: f64,
    net: &[TargetPoint<f64>],
) -> Result<Vec<TargetPoint<f64>>> {
    if !(lambda > 0.0) {
        return Err(GjeError::Config(format!("λ must be positive, got {lambda}")));
    }
    let r = gf.range();
    let bound: Vec<(SourcePoint<f64>, f64)> = a.iter().map(|y| m.value(gf, y).map(|v| (*y, v))).collect::<Result<_>>()?;
    let sup = bound.iter().map(|b| b.1).fold(f64::NEG_INFINITY, f64::max);
    if !(sup + lambda < r.upper) || bound.iter().any(|b| !r.contains(b.1)) {
        return Err(GjeError::Niceness(format!("sup m + λ = {} leaves the range ({}, {})", sup + lambda, r.lower, r.upper)));
    }
    let mx = m.value(gf, x)?;
    Ok(filter_net(gf, net, x, mx, &bound, lambda))
}

/// {q : ⟨q − q₀, p − p₀⟩ ≤ λ for all p ∈ hull(A)}, exact. p₀ must lie
/// strictly inside the hull for the polygon to be bounded.
pub fn polar_dual(a: &[P2], p0: P2, q0: P2, lambda: f64) -> Result<Polygon2> {
    if !(lambda > 0.0) {
        return Err(GjeError::Config(format!("λ must be positive, got {lambda}")));
    }
    let h = convex_hull(a, 1e-12);
    if h.is_degenerate() || h.signed_distance(p0) >= 0.0 {
        return Err(GjeError::Degenerate("the polar dual is unbounded: p₀ is not interior to hull(A)".into()));
    }
    let normals: Vec<P2> = h.vertices.iter().map(|v| [v[0] - p0[0], v[1] - p0[1]]).collect();
    let offsets = normals.iter().map(|n| lambda + n[0] * q0[0] + n[1] * q0[1]).collect();
    Polygon2::from_cyclic_halfplanes(normals, offsets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demos::paraboloid_envelope;
    use crate::gconvex::section;
    use crate::genfun::GenFunSpec;
    use crate::linalg::Vector;

    fn v(a: f64, b: f64) -> Vector<f64> {
        Vector::from_slice(&[a, b])
    }

    #[test]
    fn polar_dual_of_the_square_is_a_diamond() {
        let sq = [[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]];
        let d = polar_dual(&sq, [0.0, 0.0], [0.0, 0.0], 1.0).unwrap();
        let mut vs = d.vertices.clone();
        vs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let want = [[-2.0, 0.0], [0.0, -2.0], [0.0, 2.0], [2.0, 0.0]];
        for (a, b) in vs.iter().zip(want) {
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12, "{vs:?}");
        }
        assert!((d.area() - 8.0).abs() < 1e-12);
        assert!(polar_dual(&sq, [0.5, 0.5], [0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn g_dual_grows_with_lambda() {
        let gf = GenFun::<f64>::from_spec(&GenFunSpec::point_source(-3.0)).unwrap();
        let x = v(0.0, 0.0);
        let a: Vec<_> = (0..12).map(|k| v(0.1 * (k as f64).cos(), 0.1 * (k as f64).sin())).collect();
        let m = GAffine::through(&gf, &x, v(0.1, 0.2), 0.5).unwrap();
        let net = target_net(&BoxDomain::square(1.5, 2), 2000, 1);
        let mut prev = 0;
        for lam in [0.005, 0.01, 0.02, 0.04] {
            let d = g_dual(&gf, &a, &x, &m, lam, &net).unwrap();
            assert!(d.len() >= prev);
            prev = d.len();
        }
        assert!(prev > 0);
    }

    #[test]
    fn quadratic_g_dual_is_the_polar_dual() {
        let gf = GenFun::<f64>::from_spec(&GenFunSpec::quadratic()).unwrap();
        let x = v(0.05, -0.02);
        let a: Vec<_> = (0..9).map(|k| v(0.3 * (0.7 * k as f64).cos(), 0.2 * (0.7 * k as f64).sin())).collect();
        let m = GAffine::new(v(0.2, -0.1), 0.3);
        let net = target_net(&BoxDomain::square(4.0, 2), 4000, 5);
        let acc = g_dual(&gf, &a, &x, &m, 0.1, &net).unwrap();
        let pts: Vec<P2> = a.iter().map(|p| [p[0], p[1]]).collect();
        let poly = polar_dual(&pts, [x[0], x[1]], [0.2, -0.1], 0.1).unwrap();
        for q in &net {
            let inside = poly.contains([q[0], q[1]], 1e-9);
            let near = !poly.contains([q[0], q[1]], -1e-6) && poly.contains([q[0], q[1]], 1e-6);
            assert!(near || inside == acc.contains(q), "{q:?}");
        }
    }

    #[test]
    fn cone_of_a_paraboloid_section() {
        let env = paraboloid_envelope(60, 1.0);
        let grid = Grid2::square(1.0, 120);
        let h = 0.08;
        let sec = section(&env, &grid, &GAffine::new(v(0.0, 0.0), -h)).unwrap();
        let x0 = v(0.0, 0.0);
        let net = target_net(&BoxDomain::square(1.0, 2), 4000, 2);
        let cone = g_cone_subdiff(&env, &grid, &sec, &x0, &net).unwrap();
        // Disc of radius (m(x₀) − u(x₀))/R with R = √(2h).
        let u0 = env.value(&x0).unwrap();
        let rad = (h - u0) / (2.0 * h).sqrt();
        let far = cone.iter().map(|q| q.norm()).fold(0.0, f64::max);
        assert!((far - rad).abs() < 0.06 * rad, "{far} vs {rad}");
        // Zero height: the focus of m itself is accepted.
        let top = GAffine::new(v(0.0, 0.0), -u0);
        let sec0 = section(&env, &grid, &top).unwrap();
        if !sec0.is_empty() {
            let acc = g_cone_subdiff(&env, &grid, &sec0, &x0, &[v(0.0, 0.0)]).unwrap();
            assert_eq!(acc.len(), 1);
        }
    }
}
