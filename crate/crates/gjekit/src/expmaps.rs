//! The nondegeneracy matrix, the G-coordinates p and p̄, the exponential
//! maps X, X̄, Z, G-segments and their velocities.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{GjeError, Result};
use crate::genfun::{Derivs, GenFun, SourcePoint, TargetPoint};
use crate::linalg::{Matrix, Vector};
use crate::scalar::Real;

/// E or its adjoint E* at one admissible triple.
#[derive(Clone, Copy, Debug)]
pub struct EMatrix<T> {
    pub entries: Matrix<T>,
    pub det: T,
    pub adjoint: bool,
}

impl<T: Real> EMatrix<T> {
    pub fn adjoint(&self) -> EMatrix<T> {
        EMatrix { entries: self.entries.transpose(), det: self.det, adjoint: !self.adjoint }
    }
}

/// E_ij = G_{xⁱx̄ʲ} − G_{xⁱz}G_{x̄ʲ}/G_z.
pub fn e_from_derivs<T: Real>(d: &Derivs<T>) -> Matrix<T> {
    let n = d.dx.len();
    Matrix::from_fn(n, n, |i, j| d.dxdxb[(i, j)] - d.dxgz[i] * d.dxb[j] / d.gz)
}

pub fn e_matrix<T: Real>(gf: &GenFun<T>, x: &SourcePoint<T>, xb: &TargetPoint<T>, z: T) -> Result<EMatrix<T>> {
    let e = e_from_derivs(&gf.derivs(x, xb, z)?);
    Ok(EMatrix { det: e.det(), entries: e, adjoint: false })
}

/// p = −D̄G/G_z at (x, x̄, z): a covector at x̄.
pub fn p_map<T: Real>(gf: &GenFun<T>, xb: &TargetPoint<T>, z: T, x: &SourcePoint<T>) -> Result<Vector<T>> {
    let d = gf.derivs(x, xb, z)?;
    Ok(d.dxb.scale(-T::one() / d.gz))
}

/// p̄ = DₓG(x, x̄, H(x, x̄, u)): a covector at x.
pub fn pbar_map<T: Real>(gf: &GenFun<T>, x: &SourcePoint<T>, u: T, xb: &TargetPoint<T>) -> Result<Vector<T>> {
    let z = gf.h(x, xb, u)?;
    Ok(gf.derivs(x, xb, z)?.dx)
}

fn residual_goal<T: Real>(gf: &GenFun<T>, scale: T) -> (T, T) {
    // (target reached, acceptable on exit)
    let s = T::one().max(scale);
    let accept = T::lit(gf.tol().newton_residual).max(T::lit(64.0) * T::epsilon() * s);
    (T::lit(16.0) * T::epsilon() * s, accept)
}

/// The map X: solves −D̄G/G_z(x, x̄, z) = p for x by damped Newton with
/// Jacobian −E*/G_z. Starts from `guess`, or the chart center.
pub fn exp_source<T: Real>(
    gf: &GenFun<T>,
    xb: &TargetPoint<T>,
    z: T,
    p: &Vector<T>,
    guess: Option<&SourcePoint<T>>,
) -> Result<SourcePoint<T>> {
    let n = gf.dim();
    let mut x = guess.copied().unwrap_or_else(|| Vector::zeros(n));
    let tol = gf.tol();
    let (tight, accept) = residual_goal(gf, p.norm_inf());
    let eval = |x: &SourcePoint<T>| -> Result<(Vector<T>, Derivs<T>)> {
        let d = gf.derivs(x, xb, z)?;
        Ok((d.dxb.scale(-T::one() / d.gz) - *p, d))
    };
    let (mut r, mut d) = eval(&x)?;
    let mut rn = r.norm_inf();
    for _ in 0..tol.newton_max_iter {
        if rn <= tight {
            return Ok(x);
        }
        let jac = e_from_derivs(&d).transpose().scale(-T::one() / d.gz);
        let step = jac
            .solve(&(-r))
            .ok_or_else(|| GjeError::Convergence(format!("singular E* while inverting p = {p:?}")))?;
        let mut lambda = T::one();
        let mut accepted = false;
        let mut saw_admissible = false;
        for _ in 0..=tol.newton_halvings {
            let trial = x.axpy(lambda, &step);
            if let Ok((rt, dt)) = eval(&trial) {
                saw_admissible = true;
                let tn = rt.norm_inf();
                if tn < rn {
                    x = trial;
                    r = rt;
                    d = dt;
                    rn = tn;
                    accepted = true;
                    break;
                }
            }
            lambda = lambda * T::lit(0.5);
        }
        if !accepted {
            if rn <= accept {
                return Ok(x);
            }
            return Err(if saw_admissible {
                GjeError::Convergence(format!("X stalled at residual {rn} for p = {p:?}"))
            } else {
                GjeError::Domain(format!("X iterates left the chart for p = {p:?}"))
            });
        }
    }
    if rn <= accept {
        Ok(x)
    } else {
        Err(GjeError::Convergence(format!("X: residual {rn} after {} iterations", tol.newton_max_iter)))
    }
}

/// The pair (X̄, Z): joint Newton on (DₓG − p̄, G − u) in (x̄, z). Starts from
/// `guess`, or the target chart center with z = H(x, x̄, u).
pub fn exp_target<T: Real>(
    gf: &GenFun<T>,
    x: &SourcePoint<T>,
    u: T,
    pbar: &Vector<T>,
    guess: Option<(&TargetPoint<T>, T)>,
) -> Result<(TargetPoint<T>, T)> {
    let n = gf.dim();
    let tol = gf.tol();
    let (mut xb, mut z) = match guess {
        Some((g, z)) => (*g, z),
        None => {
            let c = Vector::zeros(n);
            (c, gf.h(x, &c, u)?)
        }
    };
    if !gf.admissible(x, &xb, z) {
        z = gf.h(x, &xb, u)?;
    }
    let (tight, accept) = residual_goal(gf, pbar.norm_inf().max(u.abs()));
    let eval = |xb: &TargetPoint<T>, z: T| -> Result<(Vector<T>, Derivs<T>)> {
        let d = gf.derivs(x, xb, z)?;
        let r = (d.dx - *pbar).concat(&Vector::from_slice(&[d.g - u]));
        Ok((r, d))
    };
    let (mut r, mut d) = eval(&xb, z)?;
    let mut rn = r.norm_inf();
    for _ in 0..tol.newton_max_iter {
        if rn <= tight {
            return Ok((xb, z));
        }
        let jac = Matrix::from_fn(n + 1, n + 1, |i, j| match (i < n, j < n) {
            (true, true) => d.dxdxb[(i, j)],
            (true, false) => d.dxgz[i],
            (false, true) => d.dxb[j],
            (false, false) => d.gz,
        });
        let step = jac
            .solve(&(-r))
            .ok_or_else(|| GjeError::Convergence(format!("singular Jacobian while inverting p̄ = {pbar:?}")))?;
        let (sxb, sz) = (step.head(n), step[n]);
        let mut lambda = T::one();
        let mut accepted = false;
        let mut saw_admissible = false;
        for _ in 0..=tol.newton_halvings {
            let txb = xb.axpy(lambda, &sxb);
            let tz = z + lambda * sz;
            if let Ok((rt, dt)) = eval(&txb, tz) {
                saw_admissible = true;
                let tn = rt.norm_inf();
                if tn < rn {
                    xb = txb;
                    z = tz;
                    r = rt;
                    d = dt;
                    rn = tn;
                    accepted = true;
                    break;
                }
            }
            lambda = lambda * T::lit(0.5);
        }
        if !accepted {
            if rn <= accept {
                return Ok((xb, z));
            }
            return Err(if saw_admissible {
                GjeError::Convergence(format!("(X̄, Z) stalled at residual {rn} for p̄ = {pbar:?}"))
            } else {
                GjeError::Domain(format!("(X̄, Z) iterates left 𝔤 for p̄ = {pbar:?}"))
            });
        }
    }
    if rn <= accept {
        Ok((xb, z))
    } else {
        Err(GjeError::Convergence(format!("(X̄, Z): residual {rn} after {} iterations", tol.newton_max_iter)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    /// x(s) with p(x(s)) affine, relative to a fixed focus (x̄₀, z₀).
    Source,
    /// (x̄(t), z(t)) with p̄ affine and G(x₀, x̄(t), z(t)) = u₀.
    Target,
}

#[derive(Clone, Copy, Debug)]
pub struct SegmentSample<T> {
    pub s: T,
    /// x(s) for source segments, x̄(t) for target segments.
    pub point: Vector<T>,
    /// z(t) for target segments; the anchor z₀ for source segments.
    pub z: T,
}

#[derive(Clone, Debug)]
pub struct GSegment<T: Real> {
    pub kind: SegmentKind,
    /// (x̄₀, z₀) for source segments, (x₀, u₀) for target segments.
    pub anchor: (Vector<T>, T),
    pub endpoints: [Vector<T>; 2],
    /// Cotangent coordinates of the endpoints (p for source, p̄ for target).
    pub coords: [Vector<T>; 2],
    pub samples: Vec<Result<SegmentSample<T>>>,
    /// False when some interior sample could not be inverted. This is a
    /// statement about the sample grid only.
    pub well_defined: bool,
    pub failures: Vec<T>,
}

impl<T: Real> GSegment<T> {
    /// Cotangent coordinate at parameter s.
    pub fn coord_at(&self, s: T) -> Vector<T> {
        self.coords[0].lerp(&self.coords[1], s)
    }

    fn nearest_sample(&self, s: T) -> Option<&SegmentSample<T>> {
        self.samples
            .iter()
            .filter_map(|r| r.as_ref().ok())
            .min_by(|a, b| (a.s - s).abs().partial_cmp(&(b.s - s).abs()).unwrap_or(std::cmp::Ordering::Equal))
    }

    /// Point (and scalar) at any s, warm-started from the nearest cached sample.
    pub fn eval(&self, gf: &GenFun<T>, s: T) -> Result<SegmentSample<T>> {
        let near = self.nearest_sample(s).copied();
        let q = self.coord_at(s);
        match self.kind {
            SegmentKind::Source => {
                let (xb, z) = (&self.anchor.0, self.anchor.1);
                let x = exp_source(gf, xb, z, &q, near.as_ref().map(|n| &n.point))?;
                Ok(SegmentSample { s, point: x, z })
            }
            SegmentKind::Target => {
                let (x, u) = (&self.anchor.0, self.anchor.1);
                let (xb, z) = exp_target(gf, x, u, &q, near.as_ref().map(|n| (&n.point, n.z)))?;
                Ok(SegmentSample { s, point: xb, z })
            }
        }
    }

    /// Writes `s, point…, z, coord…` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.endpoints[0].len();
        let mut header = vec!["s".to_string()];
        let (pt, co) = match self.kind {
            SegmentKind::Source => ("x", "p"),
            SegmentKind::Target => ("xbar", "pbar"),
        };
        header.extend((0..n).map(|i| format!("{pt}{i}")));
        header.push("z".into());
        header.extend((0..n).map(|i| format!("{co}{i}")));
        w.write_record(&header)?;
        for smp in self.samples.iter().filter_map(|r| r.as_ref().ok()) {
            let c = self.coord_at(smp.s);
            let mut row = vec![smp.s.as_f64()];
            row.extend(smp.point.to_f64());
            row.push(smp.z.as_f64());
            row.extend(c.to_f64());
            w.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Uniform parameter grid with `k + 1` points on [0, 1].
pub fn uniform_grid<T: Real>(k: usize) -> Vec<T> {
    (0..=k).map(|i| T::lit(i as f64 / k as f64)).collect()
}

/// Source segment from x₀ to x₁ with respect to the focus (x̄₀, z₀).
pub fn source_segment<T: Real>(
    gf: &GenFun<T>,
    xb0: &TargetPoint<T>,
    z0: T,
    ends: [SourcePoint<T>; 2],
    s_grid: &[T],
) -> Result<GSegment<T>> {
    let coords = [p_map(gf, xb0, z0, &ends[0])?, p_map(gf, xb0, z0, &ends[1])?];
    let mut seg = GSegment {
        kind: SegmentKind::Source,
        anchor: (*xb0, z0),
        endpoints: ends,
        coords,
        samples: Vec::with_capacity(s_grid.len()),
        well_defined: true,
        failures: Vec::new(),
    };
    let mut warm = ends[0];
    for &s in s_grid {
        let q = seg.coord_at(s);
        let r = exp_source(gf, xb0, z0, &q, Some(&warm)).map(|x| SegmentSample { s, point: x, z: z0 });
        record(&mut seg, s, r, |smp| warm = smp.point);
    }
    Ok(seg)
}

/// Target segment from x̄₀ to x̄₁ with respect to (x₀, u₀).
pub fn target_segment<T: Real>(
    gf: &GenFun<T>,
    x0: &SourcePoint<T>,
    u0: T,
    ends: [TargetPoint<T>; 2],
    s_grid: &[T],
) -> Result<GSegment<T>> {
    let z_ends = [gf.h(x0, &ends[0], u0)?, gf.h(x0, &ends[1], u0)?];
    let coords = [gf.derivs(x0, &ends[0], z_ends[0])?.dx, gf.derivs(x0, &ends[1], z_ends[1])?.dx];
    let mut seg = GSegment {
        kind: SegmentKind::Target,
        anchor: (*x0, u0),
        endpoints: ends,
        coords,
        samples: Vec::with_capacity(s_grid.len()),
        well_defined: true,
        failures: Vec::new(),
    };
    let mut warm = (ends[0], z_ends[0]);
    for &s in s_grid {
        let q = seg.coord_at(s);
        let r = exp_target(gf, x0, u0, &q, Some((&warm.0, warm.1))).map(|(xb, z)| SegmentSample { s, point: xb, z });
        record(&mut seg, s, r, |smp| warm = (smp.point, smp.z));
    }
    Ok(seg)
}

fn record<T: Real>(
    seg: &mut GSegment<T>,
    s: T,
    r: Result<SegmentSample<T>>,
    mut on_ok: impl FnMut(&SegmentSample<T>),
) {
    match &r {
        Ok(smp) => on_ok(smp),
        Err(_) => {
            seg.well_defined = false;
            seg.failures.push(s);
        }
    }
    seg.samples.push(r);
}

/// Dispatching constructor: `ends` are source points for [`SegmentKind::Source`]
/// and target points for [`SegmentKind::Target`]; `anchor` is (x̄₀, z₀) or (x₀, u₀).
pub fn g_segment<T: Real>(
    gf: &GenFun<T>,
    kind: SegmentKind,
    ends: [Vector<T>; 2],
    anchor: (Vector<T>, T),
    s_grid: &[T],
) -> Result<GSegment<T>> {
    match kind {
        SegmentKind::Source => source_segment(gf, &anchor.0, anchor.1, ends, s_grid),
        SegmentKind::Target => target_segment(gf, &anchor.0, anchor.1, ends, s_grid),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Velocity<T> {
    /// ẋ(s) or x̄̇(t).
    pub point: Vector<T>,
    /// ż(t) for target segments, zero for source segments.
    pub z: T,
}

/// Closed-form velocity of a G-segment:
/// ẋ = −G_z (E*)⁻¹(p₁ − p₀) at (x(s), x̄₀, z₀);
/// x̄̇ = E⁻¹(p̄₁ − p̄₀) and ż = ⟨−D̄G/G_z, x̄̇⟩ at (x₀, x̄(t), z(t)).
pub fn segment_velocity<T: Real>(gf: &GenFun<T>, seg: &GSegment<T>, s: T) -> Result<Velocity<T>> {
    let smp = seg.eval(gf, s)?;
    let dq = seg.coords[1] - seg.coords[0];
    let singular = || GjeError::Degenerate(format!("E is singular along the segment at s = {s}"));
    match seg.kind {
        SegmentKind::Source => {
            let d = gf.derivs(&smp.point, &seg.anchor.0, seg.anchor.1)?;
            let e = e_from_derivs(&d);
            let v = e.transpose().solve(&dq).ok_or_else(singular)?;
            Ok(Velocity { point: v.scale(-d.gz), z: T::zero() })
        }
        SegmentKind::Target => {
            let d = gf.derivs(&seg.anchor.0, &smp.point, smp.z)?;
            let e = e_from_derivs(&d);
            let v = e.solve(&dq).ok_or_else(singular)?;
            let zdot = d.dxb.scale(-T::one() / d.gz).dot(&v);
            Ok(Velocity { point: v, z: zdot })
        }
    }
}

/// Bi-Lipschitz constant of x ↦ p(x̄, z, x) over pairs of `points`:
/// C with 1/C ≤ |p(x₁) − p(x₂)|/|x₁ − x₂| ≤ C.
pub fn comparability_constant<T: Real>(
    gf: &GenFun<T>,
    xb: &TargetPoint<T>,
    z: T,
    points: &[SourcePoint<T>],
) -> Result<f64> {
    let ps = points.iter().map(|x| p_map(gf, xb, z, x)).collect::<Result<Vec<_>>>()?;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..points.len() {
        for j in 0..i {
            let dx = (points[i] - points[j]).norm().as_f64();
            if dx > 0.0 {
                let r = (ps[i] - ps[j]).norm().as_f64() / dx;
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
    }
    if hi == 0.0 {
        return Ok(1.0);
    }
    Ok(hi.max(1.0 / lo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genfun::{fd, make_builtin, GenFunSpec};

    fn v(s: &[f64]) -> Vector<f64> {
        Vector::from_slice(s)
    }

    #[test]
    fn quadratic_maps_are_identities() {
        let gf = make_builtin::<f64>(&GenFunSpec::quadratic()).unwrap();
        let (x, xb) = (v(&[0.3, -0.4]), v(&[0.7, 0.1]));
        let e = e_matrix(&gf, &x, &xb, 0.2).unwrap();
        assert_eq!(e.det, 1.0);
        assert_eq!(p_map(&gf, &xb, 5.0, &x).unwrap(), x);
        assert_eq!(pbar_map(&gf, &x, 0.3, &xb).unwrap(), xb);
        let p = v(&[0.25, 0.5]);
        assert!((exp_source(&gf, &xb, 0.1, &p, None).unwrap() - p).norm() < 1e-14);
        let (tb, tz) = exp_target(&gf, &x, 0.3, &p, None).unwrap();
        assert!((tb - p).norm() < 1e-14);
        assert!((tz - (x.dot(&p) - 0.3)).abs() < 1e-14);
    }

    #[test]
    fn point_source_e_matches_pbar_jacobian() {
        let gf = make_builtin::<f64>(&GenFunSpec::point_source(1.0)).unwrap();
        let (x, xb) = (v(&[0.0, 0.0]), v(&[0.0, 0.0]));
        let u = 2.0 / 3.0;
        let z = gf.h(&x, &xb, u).unwrap();
        let e = e_matrix(&gf, &x, &xb, z).unwrap();
        assert!(e.det.abs() > 1e-3);
        // ∂p̄ᵢ/∂x̄ʲ along the level set G = u equals E_ij.
        for j in 0..2 {
            let col = |t: f64| {
                let mut b = xb;
                b[j] += t;
                pbar_map(&gf, &x, u, &b).unwrap()
            };
            let h = 1e-6;
            let d = (col(h) - col(-h)).scale(0.5 / h);
            for i in 0..2 {
                assert!((d[i] - e.entries[(i, j)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn parallel_beam_p_against_differences() {
        let gf = make_builtin::<f64>(&GenFunSpec::parallel_beam()).unwrap();
        let (x, xb) = (v(&[0.0, 0.0]), v(&[1.0, 0.0]));
        let p = p_map(&gf, &xb, 1.0, &x).unwrap();
        let dxb = fd::finite_diff_derivatives(&gf, fd::DerivId::Dxb, &x, &xb, 1.0).unwrap().as_vector().unwrap();
        let gz = fd::finite_diff_derivatives(&gf, fd::DerivId::Gz, &x, &xb, 1.0).unwrap().as_scalar().unwrap();
        // D̄G = z(x − x̄) = (−1, 0), G_z = −½(1 + 1) = −1.
        assert!((p - dxb.scale(-1.0 / gz)).norm() < 1e-8);
        assert!((p - v(&[-1.0, 0.0])).norm() < 1e-14);
    }

    #[test]
    fn point_source_newton_budget() {
        let mut tol = crate::tol::Tolerances::default();
        tol.newton_max_iter = 6;
        let gf = make_builtin::<f64>(&GenFunSpec::point_source(1.0)).unwrap().with_tolerances(tol);
        let xb = v(&[0.2, -0.1]);
        let z = 0.8;
        let target = v(&[1e-3, 0.0]);
        let p = p_map(&gf, &xb, gf.from_physical(z), &target).unwrap();
        let x = exp_source(&gf, &xb, gf.from_physical(z), &p, Some(&v(&[0.0, 0.0]))).unwrap();
        assert!((x - target).norm() < 1e-10);
    }

    #[test]
    fn quadratic_segments_are_straight() {
        let gf = make_builtin::<f64>(&GenFunSpec::quadratic()).unwrap();
        let grid = uniform_grid(10);
        let (x0, x1) = (v(&[-0.5, 0.2]), v(&[0.4, 0.9]));
        let seg = source_segment(&gf, &v(&[0.1, 0.1]), 0.0, [x0, x1], &grid).unwrap();
        assert!(seg.well_defined);
        for smp in seg.samples.iter().map(|r| r.as_ref().unwrap()) {
            assert!((smp.point - x0.lerp(&x1, smp.s)).norm() < 1e-14);
            let vel = segment_velocity(&gf, &seg, smp.s).unwrap();
            assert!((vel.point - (x1 - x0)).norm() < 1e-14);
        }
        let u0 = 0.3;
        let tseg = target_segment(&gf, &x0, u0, [x0, x1], &grid).unwrap();
        for smp in tseg.samples.iter().map(|r| r.as_ref().unwrap()) {
            assert!((smp.point - x0.lerp(&x1, smp.s)).norm() < 1e-14);
            assert!((smp.z - (x0.dot(&smp.point) - u0)).abs() < 1e-14);
        }
    }

    #[test]
    fn csv_has_one_row_per_sample() {
        let gf = make_builtin::<f64>(&GenFunSpec::quadratic()).unwrap();
        let seg = source_segment(&gf, &v(&[0.0, 0.0]), 0.0, [v(&[0.0, 0.0]), v(&[1.0, 1.0])], &uniform_grid(4)).unwrap();
        let mut buf = Vec::new();
        seg.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("s,x0,x1,z,p0,p1"));
    }
}
