//! Pointwise estimates for G-convex functions: the Aleksandrov-type upper
//! bound, the sharp growth lower bound, John ellipses and the engulfing
//! diagnostic. Every check reports the constant implied by the measured
//! quantities; none asserts a particular value.

mod engulfing;
mod john;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GjeError, Result};
use crate::expmaps::p_map;
use crate::gconvex::{coord_image, gma_measure, section_from_values, Envelope, Estimator, GAffine, Section};
use crate::genfun::SourcePoint;
use crate::grid::{Grid2, Mask};
use crate::hull::{convex_hull, Hull2, P2};
use crate::linalg::Vector;

pub use engulfing::{engulfing_check, EngulfingConfig, EngulfingReport, EngulfingRow};
pub use john::{john_ellipsoid, john_ellipsoid_with, JohnEllipsoid};

/// max over the cloud of ⟨ω, p − p₀⟩.
pub fn supporting_plane_distance(cloud: &[P2], p0: P2, w: P2) -> f64 {
    cloud.iter().map(|p| w[0] * (p[0] - p0[0]) + w[1] * (p[1] - p0[1])).fold(0.0, f64::max)
}

/// Longest chord of hull(cloud) parallel to ω.
pub fn max_segment_length(cloud: &[P2], w: P2, snap: f64) -> f64 {
    convex_hull(cloud, snap).max_chord(w)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem {
    Aleksandrov,
    SharpGrowth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub theorem: Theorem,
    /// (m(x₀) − u(x₀))ⁿ, or sup_A (m − u)ⁿ.
    pub lhs: f64,
    /// dist·ℓ⁻¹·|S|·|∂u(S)|, or |A|·|∂u(A)|.
    pub rhs: f64,
    /// lhs / rhs: an upper bound for the Aleksandrov constant, a lower bound
    /// for the growth constant.
    pub constant: f64,
    pub depth: f64,
    pub section_volume: Option<f64>,
    pub section_subdiff: Option<f64>,
    pub plane_distance: Option<f64>,
    pub segment_length: Option<f64>,
    pub set_volume: Option<f64>,
    pub set_subdiff: Option<f64>,
    pub estimator: String,
    pub witness: String,
}

impl EstimateRecord {
    /// A violation is a configuration no finite (upper bound) or positive
    /// (lower bound) constant can accommodate.
    pub fn violated(&self) -> bool {
        match self.theorem {
            Theorem::Aleksandrov => !self.constant.is_finite(),
            Theorem::SharpGrowth => self.constant.is_nan() || (self.rhs > 0.0 && !(self.constant > 0.0)),
        }
    }
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        lhs / rhs
    } else if lhs > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

#[derive(Clone, Debug)]
pub struct EstimateOptions {
    /// Section diameter bound; `None` uses `epsilon_fraction` of the domain
    /// diameter.
    pub epsilon: Option<f64>,
    pub estimator: Estimator,
    /// The factor K·M of the growth estimate's dilation condition.
    pub dilation: f64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions { epsilon: None, estimator: Estimator::Grid, dilation: 2.0 }
    }
}

fn domain_diameter(grid: &Grid2) -> f64 {
    (grid.hi[0] - grid.lo[0]).hypot(grid.hi[1] - grid.lo[1])
}

fn diameter(h: &Hull2) -> f64 {
    let v = &h.vertices;
    let mut d = 0.0f64;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            d = d.max((v[i][0] - v[j][0]).hypot(v[i][1] - v[j][1]));
        }
    }
    d
}

fn unit(w: P2) -> Result<P2> {
    let n = w[0].hypot(w[1]);
    if !(n > 0.0 && n.is_finite()) {
        return Err(GjeError::Config(format!("direction {w:?} cannot be normalized")));
    }
    Ok([w[0] / n, w[1] / n])
}

/// u at the cell centers, NaN where no piece is admissible.
pub fn center_values(env: &Envelope<f64>, grid: &Grid2) -> Vec<f64> {
    (0..grid.cells()).into_par_iter().map(|k| env.value(&grid.center(k)).unwrap_or(f64::NAN)).collect()
}

fn source_diameter(sec: &Section, grid: &Grid2) -> f64 {
    let pts: Vec<P2> = sec.mask.indices().map(|k| {
        let c = grid.center(k);
        [c[0], c[1]]
    }).collect();
    diameter(&convex_hull(&pts, 1e-12))
}

pub fn aleksandrov_check(
    env: &Envelope<f64>,
    grid: &Grid2,
    m: &GAffine<f64>,
    x0: &SourcePoint<f64>,
    w: P2,
    opts: &EstimateOptions,
) -> Result<EstimateRecord> {
    let sec = section_from_values(env, grid, m, &center_values(env, grid))?;
    aleksandrov_in_section(env, grid, &sec, x0, w, opts)
}

pub fn aleksandrov_in_section(
    env: &Envelope<f64>,
    grid: &Grid2,
    sec: &Section,
    x0: &SourcePoint<f64>,
    w: P2,
    opts: &EstimateOptions,
) -> Result<EstimateRecord> {
    let gf = &env.gf;
    let w = unit(w)?;
    if sec.is_empty() {
        return Err(GjeError::Hypothesis("the section is empty".into()));
    }
    let (u0, m0) = (env.value(x0)?, sec.m.value(gf, x0)?);
    if u0 > m0 + env.tie {
        return Err(GjeError::Hypothesis(format!("x₀ = {x0:?} is outside the section")));
    }
    let eps = opts.epsilon.unwrap_or(gf.tol().epsilon_fraction * domain_diameter(grid));
    let diam = source_diameter(sec, grid);
    if diam >= eps {
        return Err(GjeError::Hypothesis(format!("section diameter {diam:.4} is not below ε = {eps:.4}")));
    }
    // [S] ⊂ B ⊂ 3B ⊂ [Ω]: B is centered at the centroid of [S]; the smallest
    // admissible radius is compared with the room left inside hull([Ω]).
    let omega = convex_hull(&coord_image(gf, &grid.centers(), &sec.m.xb, sec.m.z), gf.tol().hull_snap);
    let c = sec.hull.centroid();
    let r = sec.hull.vertices.iter().map(|v| (v[0] - c[0]).hypot(v[1] - c[1])).fold(0.0, f64::max);
    let room = -omega.signed_distance(c);
    if !(3.0 * r <= room) {
        return Err(GjeError::Hypothesis(format!(
            "no ball B with [S] ⊂ B and 3B ⊂ [Ω]: B needs radius {r:.4e}, 3B fits up to {:.4e}",
            room / 3.0
        )));
    }
    let p0 = p_map(gf, &sec.m.xb, sec.m.z, x0)?;
    let p0 = [p0[0], p0[1]];
    let dist = supporting_plane_distance(&sec.hull.vertices, p0, w);
    let ell = sec.hull.max_chord(w);
    let vol = sec.volume(grid);
    let meas = gma_measure(env, grid, &sec.mask, &opts.estimator)?;
    let depth = (m0 - u0).max(0.0);
    let lhs = depth.powi(gf.dim() as i32);
    let rhs = if ell > 0.0 { dist / ell * vol * meas.volume } else { 0.0 };
    Ok(EstimateRecord {
        theorem: Theorem::Aleksandrov,
        lhs,
        rhs,
        constant: ratio(lhs, rhs),
        depth,
        section_volume: Some(vol),
        section_subdiff: Some(meas.volume),
        plane_distance: Some(dist),
        segment_length: Some(ell),
        set_volume: None,
        set_subdiff: None,
        estimator: meas.estimator,
        witness: format!("x0={:?} omega={w:?} focus={:?} z={} ball-radius={r:.4e}", x0.as_slice(), sec.m.xb.as_slice(), sec.m.z),
    })
}

pub fn sharp_growth_check(
    env: &Envelope<f64>,
    grid: &Grid2,
    m: &GAffine<f64>,
    a: &Mask,
    opts: &EstimateOptions,
) -> Result<EstimateRecord> {
    let sec = section_from_values(env, grid, m, &center_values(env, grid))?;
    sharp_growth_in_section(env, grid, &sec, a, opts)
}

/// Dilation of [A] about its center of mass, checked against hull([S])
/// with one coordinate cell width of slack.
fn dilation_fits(env: &Envelope<f64>, grid: &Grid2, sec: &Section, a: &Mask, k: f64) -> std::result::Result<(), String> {
    let pts: Vec<SourcePoint<f64>> = a.indices().map(|i| grid.center(i)).collect();
    let cloud = coord_image(&env.gf, &pts, &sec.m.xb, sec.m.z);
    if cloud.len() != pts.len() {
        return Err("coordinates undefined on part of A".into());
    }
    let n = cloud.len() as f64;
    let cm = [cloud.iter().map(|p| p[0]).sum::<f64>() / n, cloud.iter().map(|p| p[1]).sum::<f64>() / n];
    let hull = convex_hull(&cloud, env.gf.tol().hull_snap);
    let slack = sec.coord_width.max(1e-12);
    for v in &hull.vertices {
        let q = [cm[0] + k * (v[0] - cm[0]), cm[1] + k * (v[1] - cm[1])];
        let d = sec.hull.signed_distance(q);
        if d > slack {
            return Err(format!("the dilation of [A] by {k} leaves [S] by {d:.3e}"));
        }
    }
    Ok(())
}

pub fn sharp_growth_in_section(
    env: &Envelope<f64>,
    grid: &Grid2,
    sec: &Section,
    a: &Mask,
    opts: &EstimateOptions,
) -> Result<EstimateRecord> {
    let gf = &env.gf;
    if a.len() != grid.cells() || a.is_empty() {
        return Err(GjeError::Config("A must be a nonempty mask on the grid".into()));
    }
    if !a.is_subset(&sec.mask) {
        return Err(GjeError::Hypothesis("A is not contained in the section".into()));
    }
    dilation_fits(env, grid, sec, a, opts.dilation).map_err(GjeError::Hypothesis)?;
    let mut sup_m = f64::NEG_INFINITY;
    let mut depth = 0.0f64;
    for k in a.indices() {
        let x = grid.center(k);
        let (u, m) = (env.value(&x)?, sec.m.value(gf, &x)?);
        sup_m = sup_m.max(m);
        depth = depth.max(m - u);
    }
    let top = gf.range().upper;
    if !(sup_m + depth < top) {
        return Err(GjeError::Hypothesis(format!("depth condition fails: sup m + sup (m − u) = {} ≥ {top}", sup_m + depth)));
    }
    let vol = a.count() as f64 * grid.cell_area();
    let meas = gma_measure(env, grid, a, &opts.estimator)?;
    let lhs = depth.powi(gf.dim() as i32);
    let rhs = vol * meas.volume;
    Ok(EstimateRecord {
        theorem: Theorem::SharpGrowth,
        lhs,
        rhs,
        constant: ratio(lhs, rhs),
        depth,
        section_volume: Some(sec.volume(grid)),
        section_subdiff: None,
        plane_distance: None,
        segment_length: None,
        set_volume: Some(vol),
        set_subdiff: Some(meas.volume),
        estimator: meas.estimator,
        witness: format!("set={} cells focus={:?} z={}", a.count(), sec.m.xb.as_slice(), sec.m.z),
    })
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct BatchReport {
    pub records: Vec<EstimateRecord>,
    pub attempts: usize,
    /// Rejected configurations by reason.
    pub skipped: BTreeMap<String, usize>,
    pub violations: usize,
}

impl BatchReport {
    pub fn max_constant(&self) -> f64 {
        self.records.iter().map(|r| r.constant).fold(0.0, f64::max)
    }

    fn skip(&mut self, why: &str) {
        *self.skipped.entry(why.into()).or_default() += 1;
    }
}

/// Random sections around junctions of the envelope: a grid node v where
/// several pieces meet, a focus x̄ drawn from the convex hull of their foci,
/// and m = G(·, x̄, H(v, x̄, u(v) + h)) with h halved until the section is
/// small enough.
struct SectionSampler<'a> {
    env: &'a Envelope<f64>,
    grid: &'a Grid2,
    u: Vec<f64>,
    junctions: Vec<(usize, usize, Vec<usize>)>,
    eps: f64,
    h_top: f64,
}

const MIN_SECTION_CELLS: usize = 9;

impl<'a> SectionSampler<'a> {
    fn new(env: &'a Envelope<f64>, grid: &'a Grid2, eps: f64) -> Result<Self> {
        let evals = env.eval_centers(grid);
        let u: Vec<f64> = evals.iter().map(|e| e.as_ref().map_or(f64::NAN, |e| e.0)).collect();
        let arg: Vec<Option<usize>> = evals.iter().map(|e| e.as_ref().ok().map(|e| e.1[0])).collect();
        let mut by_count: BTreeMap<usize, Vec<(usize, usize, Vec<usize>)>> = BTreeMap::new();
        for j in 1..grid.ny {
            for i in 1..grid.nx {
                let mut ps: Vec<usize> = [(i - 1, j - 1), (i, j - 1), (i - 1, j), (i, j)]
                    .iter()
                    .filter_map(|&(a, b)| arg[grid.index(a, b)])
                    .collect();
                ps.sort_unstable();
                ps.dedup();
                if ps.len() >= 2 {
                    by_count.entry(ps.len().min(3)).or_default().push((i, j, ps));
                }
            }
        }
        let junctions = by_count.into_iter().next_back().map(|e| e.1).unwrap_or_default();
        if junctions.is_empty() {
            return Err(GjeError::Degenerate("the envelope has a single cell on this grid".into()));
        }
        let (lo, hi) = u.iter().filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |a, v| (a.0.min(*v), a.1.max(*v)));
        let h_top = (hi - lo).max(1e-6) * 0.25;
        Ok(SectionSampler { env, grid, u, junctions, eps, h_top })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> std::result::Result<(Section, SourcePoint<f64>, P2), &'static str> {
        let (env, grid) = (self.env, self.grid);
        let (i, j, ps) = &self.junctions[rng.gen_range(0..self.junctions.len())];
        let v = grid.node(*i, *j);
        let wts: Vec<f64> = ps.iter().map(|_| rng.gen::<f64>() + 0.05).collect();
        let tot: f64 = wts.iter().sum();
        let mut xb = Vector::zeros(env.gf.dim());
        for (p, wt) in ps.iter().zip(&wts) {
            xb = xb.axpy(wt / tot, &env.pieces[*p].xb);
        }
        let uv = env.value(&v).map_err(|_| "envelope undefined at the junction")?;
        let mut h = self.h_top * 10f64.powf(-2.0 * rng.gen::<f64>());
        for _ in 0..24 {
            let z = env.gf.h(&v, &xb, uv + h).map_err(|_| "height undefined")?;
            let m = GAffine::new(xb, z);
            let sec = section_from_values(env, grid, &m, &self.u).map_err(|_| "m is not nice")?;
            if source_diameter(&sec, grid) >= self.eps {
                h *= 0.5;
                continue;
            }
            if sec.mask.count() < MIN_SECTION_CELLS || sec.hull.is_degenerate() {
                return Err("section below grid resolution");
            }
            let rim: std::collections::HashSet<usize> = sec.mask.boundary(grid).into_iter().collect();
            let inner: Vec<usize> = sec.mask.indices().filter(|k| !rim.contains(k)).collect();
            if inner.is_empty() {
                return Err("section has no interior cells");
            }
            let x0 = grid.center(inner[rng.gen_range(0..inner.len())]);
            let a = rng.gen::<f64>() * std::f64::consts::TAU;
            return Ok((sec, x0, [a.cos(), a.sin()]));
        }
        Err("no small section found")
    }
}

/// Aleksandrov checks on `count` random sections (up to 20·count attempts).
pub fn batch_aleksandrov(env: &Envelope<f64>, grid: &Grid2, count: usize, seed: u64, opts: &EstimateOptions) -> Result<BatchReport> {
    let eps = opts.epsilon.unwrap_or(env.gf.tol().epsilon_fraction * domain_diameter(grid));
    let sampler = SectionSampler::new(env, grid, eps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = BatchReport::default();
    while rep.records.len() < count && rep.attempts < 20 * count {
        rep.attempts += 1;
        let (sec, x0, w) = match sampler.draw(&mut rng) {
            Ok(d) => d,
            Err(why) => {
                rep.skip(why);
                continue;
            }
        };
        match aleksandrov_in_section(env, grid, &sec, &x0, w, opts) {
            Ok(r) => {
                rep.violations += r.violated() as usize;
                rep.records.push(r);
            }
            Err(GjeError::Hypothesis(m)) => rep.skip(m.split(':').next().unwrap_or("hypothesis")),
            Err(e) => return Err(e),
        }
    }
    Ok(rep)
}

/// Growth checks on random sets A: the member cells of a random section
/// within a radius of an interior point, the radius halved until the
/// dilation condition holds.
pub fn batch_sharp_growth(env: &Envelope<f64>, grid: &Grid2, count: usize, seed: u64, opts: &EstimateOptions) -> Result<BatchReport> {
    let eps = opts.epsilon.unwrap_or(env.gf.tol().epsilon_fraction * domain_diameter(grid));
    let sampler = SectionSampler::new(env, grid, eps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = BatchReport::default();
    while rep.records.len() < count && rep.attempts < 20 * count {
        rep.attempts += 1;
        let (sec, x0, _) = match sampler.draw(&mut rng) {
            Ok(d) => d,
            Err(why) => {
                rep.skip(why);
                continue;
            }
        };
        let mut rho = source_diameter(&sec, grid) * (0.05 + 0.25 * rng.gen::<f64>());
        let mut a;
        loop {
            a = Mask::from_fn(grid, |k| sec.mask.get(k) && (grid.center(k) - x0).norm() <= rho);
            if a.count() <= 1 || dilation_fits(env, grid, &sec, &a, opts.dilation).is_ok() {
                break;
            }
            rho *= 0.5;
        }
        if a.is_empty() {
            a = Mask::from_fn(grid, |k| Some(k) == grid.locate(&x0));
        }
        match sharp_growth_in_section(env, grid, &sec, &a, opts) {
            Ok(r) => {
                rep.violations += r.violated() as usize;
                rep.records.push(r);
            }
            Err(GjeError::Hypothesis(m)) => rep.skip(m.split(':').next().unwrap_or("hypothesis")),
            Err(e) => return Err(e),
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demos::paraboloid_envelope;

    fn v(a: f64, b: f64) -> Vector<f64> {
        Vector::from_slice(&[a, b])
    }

    #[test]
    fn plane_distance_and_chords_of_the_square() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert!((supporting_plane_distance(&sq, [0.5, 0.5], [1.0, 0.0]) - 0.5).abs() < 1e-15);
        let d = std::f64::consts::FRAC_1_SQRT_2;
        assert!((max_segment_length(&sq, [d, d], 1e-12) - 2f64.sqrt()).abs() < 1e-10);
        assert_eq!(supporting_plane_distance(&[[0.3, 0.3]], [0.3, 0.3], [1.0, 0.0]), 0.0);
        assert_eq!(max_segment_length(&[[0.3, 0.3]], [1.0, 0.0], 1e-12), 0.0);
    }

    fn spread(cs: &[f64]) -> f64 {
        let (lo, hi) = cs.iter().fold((f64::INFINITY, 0.0f64), |b, c| (b.0.min(*c), b.1.max(*c)));
        hi / lo - 1.0
    }

    #[test]
    fn paraboloid_aleksandrov_constant_is_scale_free() {
        // Lattice only where the sections live; [Ω] stays large enough for 3B.
        let env = paraboloid_envelope(50, 0.35);
        let grid = Grid2::square(1.0, 300);
        let u = center_values(&env, &grid);
        let opts = EstimateOptions { epsilon: Some(1.0), ..Default::default() };
        let cs: Vec<f64> = [0.01, 0.02, 0.04]
            .iter()
            .map(|&h| {
                let sec = section_from_values(&env, &grid, &GAffine::new(v(0.0, 0.0), -h), &u).unwrap();
                aleksandrov_in_section(&env, &grid, &sec, &v(0.0, 0.0), [1.0, 0.0], &opts).unwrap().constant
            })
            .collect();
        // Closed form 1/(2π²).
        let pi2 = std::f64::consts::PI.powi(2);
        assert!(cs.iter().all(|c| (c * 2.0 * pi2 - 1.0).abs() < 0.1), "{cs:?}");
        assert!(spread(&cs) <= 0.05, "{cs:?}");
    }

    #[test]
    fn paraboloid_growth_constant_is_scale_free() {
        let env = paraboloid_envelope(50, 0.35);
        let grid = Grid2::square(0.5, 240);
        let u = center_values(&env, &grid);
        let cs: Vec<f64> = [0.01, 0.02, 0.04]
            .iter()
            .map(|&h| {
                let sec = section_from_values(&env, &grid, &GAffine::new(v(0.0, 0.0), -h), &u).unwrap();
                let r = (2.0 * h).sqrt() / 2.0;
                let a = Mask::from_fn(&grid, |k| grid.center(k).norm() <= r);
                sharp_growth_in_section(&env, &grid, &sec, &a, &EstimateOptions::default()).unwrap().constant
            })
            .collect();
        // Closed form 4/π².
        let pi2 = std::f64::consts::PI.powi(2);
        assert!(cs.iter().all(|c| (c * pi2 / 4.0 - 1.0).abs() < 0.1), "{cs:?}");
        assert!(spread(&cs) <= 0.05, "{cs:?}");
    }

    #[test]
    fn vertex_on_the_rim_gives_a_vanishing_ratio() {
        let env = paraboloid_envelope(60, 1.0);
        let grid = Grid2::square(1.0, 120);
        let h = 0.02;
        let m = GAffine::new(v(0.0, 0.0), -h);
        let opts = EstimateOptions { epsilon: Some(1.0), ..Default::default() };
        let inner = aleksandrov_check(&env, &grid, &m, &v(0.0, 0.0), [0.0, 1.0], &opts).unwrap();
        // u = h where |x|²/2 = h, up to the lattice error.
        let x = v((2.0 * h).sqrt() - 0.004, 0.0);
        let rim = aleksandrov_check(&env, &grid, &m, &x, [0.0, 1.0], &opts).unwrap();
        assert!(rim.constant < 0.05 * inner.constant, "{} vs {}", rim.constant, inner.constant);
    }

    #[test]
    fn hypotheses_are_named() {
        let env = paraboloid_envelope(30, 1.0);
        let grid = Grid2::square(1.0, 60);
        let m = GAffine::new(v(0.0, 0.0), -0.1);
        let err = aleksandrov_check(&env, &grid, &m, &v(0.0, 0.0), [1.0, 0.0], &EstimateOptions::default()).unwrap_err();
        assert!(matches!(&err, GjeError::Hypothesis(s) if s.contains("diameter")), "{err}");
        let opts = EstimateOptions { epsilon: Some(5.0), ..Default::default() };
        let wide = GAffine::new(v(0.0, 0.0), -0.3);
        let err = aleksandrov_check(&env, &grid, &wide, &v(0.0, 0.0), [1.0, 0.0], &opts).unwrap_err();
        assert!(matches!(&err, GjeError::Hypothesis(s) if s.contains("3B")), "{err}");
        let far = aleksandrov_check(&env, &grid, &m, &v(0.9, 0.9), [1.0, 0.0], &opts).unwrap_err();
        assert!(matches!(far, GjeError::Hypothesis(_)));
        let big = Mask::from_fn(&grid, |k| grid.center(k).norm() <= 0.4);
        let err = sharp_growth_check(&env, &grid, &m, &big, &opts).unwrap_err();
        assert!(matches!(&err, GjeError::Hypothesis(s) if s.contains("dilation")), "{err}");
    }

    #[test]
    fn single_cell_growth_is_recorded() {
        let env = paraboloid_envelope(30, 1.0);
        let grid = Grid2::square(1.0, 60);
        let m = GAffine::new(v(0.0, 0.0), -0.05);
        let k = grid.locate(&v(0.01, 0.01)).unwrap();
        let a = Mask::from_fn(&grid, |j| j == k);
        let r = sharp_growth_check(&env, &grid, &m, &a, &EstimateOptions::default()).unwrap();
        assert_eq!(r.set_volume, Some(grid.cell_area()));
        assert!(r.lhs > 0.0 && r.constant >= 0.0);
    }

    #[test]
    fn batches_on_the_paraboloid_have_no_violations() {
        let env = paraboloid_envelope(30, 1.0);
        let grid = Grid2::square(1.0, 90);
        let opts = EstimateOptions { epsilon: Some(0.6), ..Default::default() };
        let a = batch_aleksandrov(&env, &grid, 10, 4, &opts).unwrap();
        assert_eq!(a.records.len(), 10, "{:?}", a.skipped);
        assert_eq!(a.violations, 0);
        let s = batch_sharp_growth(&env, &grid, 10, 4, &opts).unwrap();
        assert_eq!(s.records.len(), 10, "{:?}", s.skipped);
        assert_eq!(s.violations, 0);
    }
}
