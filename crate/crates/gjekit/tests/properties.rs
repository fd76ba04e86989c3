use gjekit::demos;
use gjekit::estimates::{john_ellipsoid, supporting_plane_distance};
use gjekit::expmaps::{exp_source, p_map};
use gjekit::gconvex::{gma_measure, sample_sections, CellIntegrator, Envelope, Estimator, GAffine};
use gjekit::genfun::{finite_diff_derivatives, DerivId, GenFun, GenFunSpec};
use gjekit::grid::{Grid2, Mask};
use gjekit::hull::{convex_hull, P2};
use gjekit::linalg::Vector;
use gjekit::optics::ReflectorSurface;
use gjekit::sampling::{default_boxes, sample_triples};
use gjekit::structure::{g3w_form, PrimalBase};
use proptest::prelude::*;

fn builtin(i: usize) -> GenFun<f64> {
    GenFun::from_spec(&demos::builtin_specs()[i % 5]).unwrap()
}

fn v2(a: f64, b: f64) -> Vector<f64> {
    Vector::from_slice(&[a, b])
}

fn cloud() -> impl Strategy<Value = Vec<P2>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| [a, b]), 3..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dual_and_coordinate_roundtrips(i in 0usize..5, seed in 0u64..1_000_000) {
        let gf = builtin(i);
        let (sb, tb) = default_boxes(&gf);
        for t in sample_triples(&gf, &sb, &tb, 4, seed) {
            let u = gf.value(&t.x, &t.xb, t.z).unwrap();
            let z = gf.h(&t.x, &t.xb, u).unwrap();
            prop_assert!((gf.value(&t.x, &t.xb, z).unwrap() - u).abs() <= 1e-9 * u.abs().max(1.0));
            let p = p_map(&gf, &t.xb, t.z, &t.x).unwrap();
            let x = exp_source(&gf, &t.xb, t.z, &p, Some(&sb.center())).unwrap();
            prop_assert!((x - t.x).norm_inf() <= 1e-8);
        }
    }

    #[test]
    fn analytic_derivatives_match_differences(i in 0usize..5, seed in 0u64..1_000_000) {
        let gf = builtin(i);
        let (sb, tb) = default_boxes(&gf);
        for t in sample_triples(&gf, &sb, &tb, 2, seed) {
            let d = gf.derivs(&t.x, &t.xb, t.z).unwrap();
            let Ok(fd) = finite_diff_derivatives(&gf, DerivId::DxDxb, &t.x, &t.xb, t.z) else { continue };
            let fd = fd.as_matrix().unwrap();
            let scale = d.dxdxb.norm_max().max(1.0);
            for r in 0..2 {
                for c in 0..2 {
                    prop_assert!((fd[(r, c)] - d.dxdxb[(r, c)]).abs() <= 1e-5 * scale, "{:?} vs {:?}", fd, d.dxdxb);
                }
            }
            let Ok(gz) = finite_diff_derivatives(&gf, DerivId::Gz, &t.x, &t.xb, t.z) else { continue };
            let gz = gz.as_scalar().unwrap();
            prop_assert!((gz - d.gz).abs() <= 1e-5 * d.gz.abs().max(1.0));
        }
    }

    #[test]
    fn g3w_form_is_even_and_biquadratic(i in 0usize..5, seed in 0u64..1_000_000, t in 0.2..3.0f64, s in 0.2..3.0f64) {
        let gf = builtin(i);
        let (sb, tb) = default_boxes(&gf);
        let tr = &sample_triples(&gf, &sb, &tb, 1, seed)[0];
        let Ok(base) = PrimalBase::at_triple(&gf, &tr.x, &tr.xb, tr.z) else { return Ok(()) };
        let (v, eta) = (v2(0.6, -0.8), v2(0.8, 0.6));
        let (Ok(f), Ok(g), Ok(h)) = (
            g3w_form(&gf, &base, &v, &eta),
            g3w_form(&gf, &base, &v.scale(-t), &eta.scale(s)),
            g3w_form(&gf, &base, &v, &eta.scale(-1.0)),
        ) else { return Ok(()) };
        let scale = f.abs().max(1e-3);
        prop_assert!((g - t * t * s * s * f).abs() <= 1e-3 * scale * (t * t * s * s).max(1.0), "{} vs {}", g, t * t * s * s * f);
        prop_assert!((h - f).abs() <= 1e-3 * scale);
    }

    #[test]
    fn cell_masses_partition_the_source(i in 0usize..5, seed in 0u64..1_000) {
        let gf = builtin(i);
        let (env, _) = demos::random_envelope(&gf, 7, seed).unwrap();
        let grid = Grid2::from_box(&gjekit::structure::CheckSetup::for_builtin(&gf).source, 24, 24).unwrap();
        let ci = CellIntegrator::new(&grid, grid.cell_masses(|x| 1.0 + 0.3 * x[0]));
        let m = ci.masses(&ci.values(&gf, &env.pieces), None);
        let total = ci.total_mass();
        prop_assert!((m.iter().sum::<f64>() - total).abs() <= 1e-12 * total);
        prop_assert!(m.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn envelope_pieces_support_from_below(i in 0usize..5, seed in 0u64..1_000, a in -1.0..1.0f64, b in -1.0..1.0f64) {
        let gf = builtin(i);
        let (env, grid) = demos::random_envelope(&gf, 9, seed).unwrap();
        let x = v2(grid.lo[0] + (a + 1.0) / 2.0 * (grid.hi[0] - grid.lo[0]), grid.lo[1] + (b + 1.0) / 2.0 * (grid.hi[1] - grid.lo[1]));
        let (u, act) = env.eval(&x).unwrap();
        for (k, p) in env.pieces.iter().enumerate() {
            if let Ok(v) = p.value(&gf, &x) {
                prop_assert!(v <= u + env.tie);
                if act.contains(&k) {
                    prop_assert!((v - u).abs() <= env.tie);
                }
            }
        }
    }

    #[test]
    fn measures_are_monotone_and_additive(r1 in 0.05..0.25f64, r2 in 0.05..0.25f64, cx in -0.15..0.15f64) {
        let env = demos::paraboloid_envelope(12, 0.5);
        let grid = Grid2::square(0.5, 40);
        let disc = |c: f64, r: f64| Mask::from_fn(&grid, |k| (grid.center(k) - v2(c, 0.0)).norm() <= r);
        let (small, big) = (disc(cx, r1.min(r2)), disc(cx, r1.max(r2)));
        let left = Mask::from_fn(&grid, |k| big.get(k) && grid.center(k)[0] < cx);
        let right = Mask::from_fn(&grid, |k| big.get(k) && !left.get(k));
        let hit = Estimator::HitMass { weights: vec![1.0; env.len()], cell_mass: grid.cell_masses(|_| 1.0) };
        for est in [Estimator::Grid, hit] {
            let m = |a: &Mask| gma_measure(&env, &grid, a, &est).unwrap().volume;
            prop_assert!(m(&small) <= m(&big) + 1e-12);
            prop_assert!(m(&big) <= m(&left) + m(&right) + 1e-12);
        }
        let exact = |a: &Mask| gma_measure(&env, &grid, a, &Estimator::Grid).unwrap().volume;
        prop_assert!((exact(&big) - exact(&left) - exact(&right)).abs() <= 1e-12);
    }

    #[test]
    fn slab_widths_add_up(pts in cloud(), angle in 0.0..std::f64::consts::TAU, pick in 0usize..40) {
        let w = [angle.cos(), angle.sin()];
        let p0 = pts[pick % pts.len()];
        let proj: Vec<f64> = pts.iter().map(|p| p[0] * w[0] + p[1] * w[1]).collect();
        let width = proj.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - proj.iter().cloned().fold(f64::INFINITY, f64::min);
        let hull = convex_hull(&pts, 1e-12);
        let sum = supporting_plane_distance(&hull.vertices, p0, w) + supporting_plane_distance(&hull.vertices, p0, [-w[0], -w[1]]);
        prop_assert!((sum - width).abs() <= 1e-10, "{} vs {}", sum, width);
    }

    #[test]
    fn john_ellipse_brackets_the_hull(pts in cloud()) {
        let hull = convex_hull(&pts, 1e-12);
        prop_assume!(!hull.is_degenerate() && hull.area() > 1e-3);
        let e = john_ellipsoid(&pts).unwrap();
        prop_assert!(e.verified(), "{:?}", e);
        prop_assert!(pts.iter().all(|p| e.contains(*p, 1e-8)));
        // Both sides of the sandwich bound the hull area.
        prop_assert!(e.alpha * e.alpha * e.area() <= hull.area() * (1.0 + 1e-8) && hull.area() <= e.area() * (1.0 + 1e-8));
    }

    #[test]
    fn reflection_law_on_single_sheets(fx in -0.5..0.5f64, fy in -0.5..0.5f64, u0 in 0.3..0.8f64, a in -0.3..0.3f64, b in -0.3..0.3f64) {
        let gf = GenFun::<f64>::from_spec(&GenFunSpec::point_source(-3.0)).unwrap();
        let p = GAffine::through(&gf, &v2(0.0, 0.0), v2(fx, fy), u0).unwrap();
        let s = ReflectorSurface::new(Envelope::new(gf, vec![p])).unwrap();
        let t = s.trace_ray(&s.source_ray(&v2(a, b))).unwrap();
        prop_assert_eq!(t.target, Some(0));
        prop_assert!(t.focal_miss <= 1e-9 && t.reflection_residual <= 1e-12 && t.coplanarity <= 1e-12, "{:?}", t);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn sections_of_builtin_envelopes_are_convex(i in 0usize..5, seed in 0u64..1_000) {
        let gf = builtin(i);
        let (env, grid) = demos::random_envelope(&gf, 16, seed).unwrap();
        for s in sample_sections(&env, &grid, 5, seed) {
            prop_assert!(s.convexity_score <= 2.0, "{}", s.convexity_score);
        }
    }
}
