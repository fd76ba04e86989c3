//! Ray tracing of semi-discrete reflectors: exact quadric sheets per piece,
//! mirror reflection and target assignment on the target plane.
//!
//! Point source: rays leave the origin in the direction of the source chart
//! point x and meet the ellipsoid with foci 0 and x̄ at distance 1/u(x).
//! Parallel beam (Φ ≡ 0): vertical rays (0, 0, −1) through (x, ·) meet the
//! paraboloid y₃ = G(x, x̄, z), whose focus is (x̄, 0); the reflected line
//! passes through the focus behind the mirror.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GjeError, Result};
use crate::expmaps::exp_target;
use crate::gconvex::Envelope;
use crate::genfun::{GenFunSpec, PhiSpec, SourcePoint};
use crate::grid::Grid2;
use crate::linalg::Vector;

type V3 = Vector<f64>;

#[derive(Clone, Debug, PartialEq)]
pub struct Ray {
    pub origin: V3,
    pub direction: V3,
}

impl Ray {
    pub fn new(origin: V3, direction: V3) -> Result<Self> {
        let n = direction.norm();
        if !(n > 0.0) || !direction.is_finite() || direction.len() != 3 || origin.len() != 3 {
            return Err(GjeError::Config("rays need a 3-d origin and a nonzero direction".into()));
        }
        Ok(Ray { origin, direction: direction.scale(1.0 / n) })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SurfaceKind {
    PointSource { target_height: f64 },
    ParallelBeam,
}

#[derive(Clone, Debug)]
pub struct ReflectorSurface {
    pub kind: SurfaceKind,
    pub env: Envelope<f64>,
    /// Height of the aperture plane for parallel-beam rays.
    pub aperture: f64,
    pub snap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub hit: V3,
    pub reflected: Ray,
    /// Representative active piece (lowest index).
    pub piece: usize,
    pub tie: bool,
    /// Assigned target, `None` for an escape.
    pub target: Option<usize>,
    /// Chart distance from the target-plane crossing to the nearest target.
    pub miss: f64,
    /// Chart distance from the crossing to the focus of the active piece.
    pub focal_miss: f64,
    /// ||⟨r, n⟩| − |⟨r′, n⟩||.
    pub reflection_residual: f64,
    /// |det(r, n, r′)|.
    pub coplanarity: f64,
    /// Defect of the hit point in the defining equation of its quadric.
    pub quadric_residual: f64,
}

impl ReflectorSurface {
    pub fn new(env: Envelope<f64>) -> Result<Self> {
        let kind = match env.gf.spec() {
            Some(GenFunSpec::PointSource { target_height, .. }) => SurfaceKind::PointSource { target_height: *target_height },
            Some(GenFunSpec::ParallelBeam { phi: PhiSpec::Zero }) => SurfaceKind::ParallelBeam,
            Some(GenFunSpec::ParallelBeam { .. }) => {
                return Err(GjeError::Unsupported("ray tracing needs a flat target (Φ ≡ 0)".into()))
            }
            _ => return Err(GjeError::Unsupported(format!("no reflector geometry for {}", env.gf.label()))),
        };
        if env.is_empty() {
            return Err(GjeError::EmptyEnvelope("reflector without pieces".into()));
        }
        let snap = env.gf.tol().snap;
        Ok(ReflectorSurface { kind, env, aperture: 10.0, snap })
    }

    fn focus(&self, i: usize) -> V3 {
        let xb = &self.env.pieces[i].xb;
        match self.kind {
            SurfaceKind::PointSource { target_height } => Vector::from_slice(&[xb[0], xb[1], target_height]),
            SurfaceKind::ParallelBeam => Vector::from_slice(&[xb[0], xb[1], 0.0]),
        }
    }

    fn plane_height(&self) -> f64 {
        match self.kind {
            SurfaceKind::PointSource { target_height } => target_height,
            SurfaceKind::ParallelBeam => 0.0,
        }
    }

    /// Source chart point of a ray.
    pub fn chart_point(&self, ray: &Ray) -> Result<SourcePoint<f64>> {
        match self.kind {
            SurfaceKind::PointSource { .. } => {
                if ray.origin.norm() > 1e-12 {
                    return Err(GjeError::Domain("point-source rays start at the origin".into()));
                }
                self.env.gf.source_chart().lift(&ray.direction)
            }
            SurfaceKind::ParallelBeam => {
                if (ray.direction[2] + 1.0).abs() > 1e-12 {
                    return Err(GjeError::Domain("parallel-beam rays travel along (0, 0, −1)".into()));
                }
                Ok(Vector::from_slice(&[ray.origin[0], ray.origin[1]]))
            }
        }
    }

    /// The ray leaving the source at chart point x.
    pub fn source_ray(&self, x: &SourcePoint<f64>) -> Ray {
        match self.kind {
            SurfaceKind::PointSource { .. } => {
                Ray { origin: Vector::zeros(3), direction: self.env.gf.source_chart().embed(x).normalized() }
            }
            SurfaceKind::ParallelBeam => Ray {
                origin: Vector::from_slice(&[x[0], x[1], self.aperture]),
                direction: Vector::from_slice(&[0.0, 0.0, -1.0]),
            },
        }
    }

    pub fn trace_ray(&self, ray: &Ray) -> Result<Trace> {
        let x = self.chart_point(ray)?;
        let (_, active) = self.env.eval(&x)?;
        let i = active[0];
        let p = &self.env.pieces[i];
        let zp = self.env.gf.to_physical(p.z);
        let y = self.focus(i);
        let r = &ray.direction;
        let (hit, normal, quadric_residual) = match self.kind {
            SurfaceKind::PointSource { .. } => {
                // |P| + |P − Y| = 2a along P = tX, a = 1/z.
                let a = 1.0 / zp;
                let t = (4.0 * a * a - y.norm_sq()) / (4.0 * a - 2.0 * r.dot(&y));
                if !(t > 0.0) {
                    return Err(GjeError::Domain(format!("ray misses the sheet of piece {i}")));
                }
                let hit = r.scale(t);
                let d = hit.axpy(-1.0, &y);
                let n = hit.scale(1.0 / hit.norm()).axpy(1.0 / d.norm(), &d).normalized();
                (hit, n.scale(-1.0), (hit.norm() + d.norm() - 2.0 * a).abs())
            }
            SurfaceKind::ParallelBeam => {
                let dx = [x[0] - y[0], x[1] - y[1]];
                let h = 0.5 * (1.0 / zp - zp * (dx[0] * dx[0] + dx[1] * dx[1]));
                let hit = Vector::from_slice(&[x[0], x[1], h]);
                let n = Vector::from_slice(&[zp * dx[0], zp * dx[1], 1.0]).normalized();
                // Focus-directrix form: |P − Y| = 1/z − P₃.
                let v = hit.axpy(-1.0, &y).norm() - (1.0 / zp - h);
                (hit, n, v.abs())
            }
        };
        let rn = r.dot(&normal);
        let refl = r.axpy(-2.0 * rn, &normal);
        let reflection_residual = (rn.abs() - refl.dot(&normal).abs()).abs();
        let coplanarity = r.cross(&normal).dot(&refl).abs();
        let reflected = Ray { origin: hit, direction: refl };
        let height = self.plane_height();
        let (target, miss, focal_miss) = if refl[2].abs() < 1e-300 {
            (None, f64::INFINITY, f64::INFINITY)
        } else {
            let s = (height - hit[2]) / refl[2];
            let q = hit.axpy(s, &refl);
            let dist = |k: usize| {
                let f = self.focus(k);
                ((q[0] - f[0]).powi(2) + (q[1] - f[1]).powi(2)).sqrt()
            };
            let (best, miss) =
                (0..self.env.len()).map(|k| (k, dist(k))).fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
            ((miss <= self.snap).then_some(best), miss, dist(i))
        };
        Ok(Trace {
            hit,
            reflected,
            piece: i,
            tie: active.len() > 1,
            target,
            miss,
            focal_miss,
            reflection_residual,
            coplanarity,
            quadric_residual,
        })
    }
}

/// Draws chart points from a piecewise-constant density: a cell with
/// probability proportional to its mass, then a uniform point in it.
#[derive(Clone, Debug)]
pub struct SourceSampler {
    grid: Grid2,
    cumulative: Vec<f64>,
}

impl SourceSampler {
    pub fn new(grid: &Grid2, cell_mass: &[f64]) -> Result<Self> {
        if cell_mass.len() != grid.cells() || cell_mass.iter().any(|m| !(*m >= 0.0)) {
            return Err(GjeError::Config("one nonnegative mass per grid cell".into()));
        }
        let mut acc = 0.0;
        let cumulative: Vec<f64> = cell_mass
            .iter()
            .map(|m| {
                acc += m;
                acc
            })
            .collect();
        if !(acc > 0.0) {
            return Err(GjeError::Config("the source has no mass".into()));
        }
        Ok(SourceSampler { grid: grid.clone(), cumulative })
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> SourcePoint<f64> {
        let total = *self.cumulative.last().expect("nonempty");
        let u = rng.gen::<f64>() * total;
        let k = self.cumulative.partition_point(|c| *c <= u).min(self.cumulative.len() - 1);
        let c = self.grid.center(k);
        Vector::from_slice(&[
            c[0] + (rng.gen::<f64>() - 0.5) * self.grid.dx(),
            c[1] + (rng.gen::<f64>() - 0.5) * self.grid.dy(),
        ])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayRecord {
    pub ray: u64,
    pub target: Option<usize>,
    pub miss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub rays: u64,
    pub seed: u64,
    pub hits: Vec<u64>,
    pub escapes: u64,
    /// Rays that raised an error before reaching the mirror.
    pub failures: u64,
    pub ties: u64,
    /// Fraction of the source energy reaching each target.
    pub energy: Vec<f64>,
    pub expected: Vec<f64>,
    pub chi_square: f64,
    /// max over targets of |hits − N pᵢ| / √(N pᵢ(1 − pᵢ)).
    pub max_sigma: f64,
    /// Largest focal miss over rays off the tie set.
    pub max_focal_miss: f64,
    pub max_reflection_residual: f64,
    pub max_coplanarity: f64,
    pub max_quadric_residual: f64,
}

impl TraceReport {
    pub fn within_sigma(&self, k: f64) -> bool {
        self.max_sigma <= k
    }
}

/// Traces `n_rays` rays drawn from the sampler. Ray k uses stream k of a
/// ChaCha generator keyed by `seed`, so results do not depend on threads.
pub fn trace_ensemble(
    surface: &ReflectorSurface,
    sampler: &SourceSampler,
    n_rays: u64,
    seed: u64,
    expected: &[f64],
) -> Result<(TraceReport, Vec<RayRecord>)> {
    let n = surface.env.len();
    if expected.len() != n {
        return Err(GjeError::Config(format!("{} expected fractions for {n} pieces", expected.len())));
    }
    let outcomes: Vec<Option<Trace>> = (0..n_rays)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let x = sampler.sample(&mut rng);
            surface.trace_ray(&surface.source_ray(&x)).ok()
        })
        .collect();
    let mut rep = TraceReport {
        rays: n_rays,
        seed,
        hits: vec![0; n],
        escapes: 0,
        failures: 0,
        ties: 0,
        energy: vec![0.0; n],
        expected: expected.to_vec(),
        chi_square: 0.0,
        max_sigma: 0.0,
        max_focal_miss: 0.0,
        max_reflection_residual: 0.0,
        max_coplanarity: 0.0,
        max_quadric_residual: 0.0,
    };
    let mut records = Vec::with_capacity(outcomes.len());
    for (k, o) in outcomes.iter().enumerate() {
        let Some(t) = o else {
            rep.failures += 1;
            records.push(RayRecord { ray: k as u64, target: None, miss: f64::INFINITY });
            continue;
        };
        match t.target {
            Some(j) => rep.hits[j] += 1,
            None => rep.escapes += 1,
        }
        if t.tie {
            rep.ties += 1;
        } else {
            rep.max_focal_miss = rep.max_focal_miss.max(t.focal_miss);
        }
        rep.max_reflection_residual = rep.max_reflection_residual.max(t.reflection_residual);
        rep.max_coplanarity = rep.max_coplanarity.max(t.coplanarity);
        rep.max_quadric_residual = rep.max_quadric_residual.max(t.quadric_residual);
        records.push(RayRecord { ray: k as u64, target: t.target, miss: t.miss });
    }
    let nf = n_rays as f64;
    for j in 0..n {
        rep.energy[j] = rep.hits[j] as f64 / nf;
        let mean = nf * expected[j];
        let d = rep.hits[j] as f64 - mean;
        if mean > 0.0 {
            rep.chi_square += d * d / mean;
            let sd = (mean * (1.0 - expected[j])).sqrt();
            rep.max_sigma = rep.max_sigma.max(if sd > 0.0 { d.abs() / sd } else { f64::INFINITY });
        }
    }
    Ok((rep, records))
}

pub fn write_ray_csv<W: Write>(records: &[RayRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["ray", "target", "miss"])?;
    for r in records {
        w.write_record([r.ray.to_string(), r.target.map_or("escape".into(), |t| t.to_string()), r.miss.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Consistency {
    pub samples: usize,
    /// Points skipped because they sit on the tie set.
    pub skipped: usize,
    /// max |traced target − focus of the active piece|.
    pub focus_deviation: f64,
    /// max |traced target − X̄(x, u(x), Du(x))|, Du by central differences.
    pub gradient_deviation: f64,
}

/// Compares the traced target of the ray through each x with the active
/// focus and with the exponential map of the finite-difference gradient.
pub fn consistency_with_exp_target(surface: &ReflectorSurface, xs: &[SourcePoint<f64>], fd_step: f64) -> Result<Consistency> {
    let env = &surface.env;
    let rows: Vec<Option<(f64, f64)>> = xs
        .par_iter()
        .map(|x| {
            let (u, act) = env.eval(x).ok()?;
            if act.len() > 1 {
                return None;
            }
            let t = surface.trace_ray(&surface.source_ray(x)).ok()?;
            let f = &t.reflected;
            let s = (surface.plane_height() - f.origin[2]) / f.direction[2];
            let q = f.origin.axpy(s, &f.direction);
            let q = [q[0], q[1]];
            let p = &env.pieces[act[0]];
            let dev = |a: &Vector<f64>| ((q[0] - a[0]).powi(2) + (q[1] - a[1]).powi(2)).sqrt();
            let mut du = Vector::zeros(2);
            for k in 0..2 {
                let (mut a, mut b) = (*x, *x);
                a[k] += fd_step;
                b[k] -= fd_step;
                du[k] = (env.value(&a).ok()? - env.value(&b).ok()?) / (2.0 * fd_step);
            }
            let (xb, _) = exp_target(&env.gf, x, u, &du, Some((&p.xb, p.z))).ok()?;
            Some((dev(&p.xb), dev(&xb)))
        })
        .collect();
    let mut c = Consistency { samples: xs.len(), skipped: 0, focus_deviation: 0.0, gradient_deviation: 0.0 };
    for r in rows {
        match r {
            Some((a, b)) => {
                c.focus_deviation = c.focus_deviation.max(a);
                c.gradient_deviation = c.gradient_deviation.max(b);
            }
            None => c.skipped += 1,
        }
    }
    Ok(c)
}
