//! Sections S = {u ≤ m} and their coordinate images.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Envelope, GAffine};
use crate::error::{GjeError, Result};
use crate::expmaps::p_map;
use crate::genfun::{GenFun, SourcePoint};
use crate::grid::{Grid2, Mask};
use crate::hull::{convex_hull, Hull2, P2};

#[derive(Clone, Debug)]
pub struct Section {
    pub m: GAffine<f64>,
    pub mask: Mask,
    /// [S]_{x̄,z}: p-coordinates of the member cell centers relative to the
    /// focus of m.
    pub cloud: Vec<P2>,
    pub hull: Hull2,
    /// Deepest non-member image inside the hull of the cloud, in units of
    /// the coordinate spacing between neighbouring member cells.
    pub convexity_score: f64,
    /// Largest coordinate distance between 4-neighbouring member cells.
    pub coord_width: f64,
}

impl Section {
    pub fn contains(&self, env: &Envelope<f64>, x: &SourcePoint<f64>) -> Result<bool> {
        Ok(env.value(x)? <= self.m.value(&env.gf, x)? + env.tie)
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn volume(&self, grid: &Grid2) -> f64 {
        self.mask.count() as f64 * grid.cell_area()
    }

    pub fn member_points(&self, grid: &Grid2) -> Vec<SourcePoint<f64>> {
        self.mask.indices().map(|k| grid.center(k)).collect()
    }
}

/// p-coordinates of `xs` relative to the focus (x̄, z). Points where the
/// coordinate map is undefined are dropped.
pub fn coord_image(gf: &GenFun<f64>, xs: &[SourcePoint<f64>], xb: &crate::genfun::TargetPoint<f64>, z: f64) -> Vec<P2> {
    xs.par_iter().filter_map(|x| p_map(gf, xb, z, x).ok().map(|p| [p[0], p[1]])).collect()
}

/// Checks that m stays inside the nice interval on every cell center.
pub(crate) fn check_nice(gf: &GenFun<f64>, m: &GAffine<f64>, grid: &Grid2) -> Result<Vec<f64>> {
    let r = gf.range();
    let vals: Vec<Result<f64>> = (0..grid.cells()).into_par_iter().map(|k| m.value(gf, &grid.center(k))).collect();
    let mut out = Vec::with_capacity(vals.len());
    for (k, v) in vals.into_iter().enumerate() {
        let v = v.map_err(|e| GjeError::Niceness(format!("m undefined at {:?}: {e}", grid.center(k))))?;
        if !r.is_nice(v) {
            return Err(GjeError::Niceness(format!(
                "m = {v} at {:?} is outside ({}, {})",
                grid.center(k),
                r.nice_lower,
                r.nice_upper
            )));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn section(env: &Envelope<f64>, grid: &Grid2, m: &GAffine<f64>) -> Result<Section> {
    let u: Vec<f64> = (0..grid.cells()).into_par_iter().map(|k| env.value(&grid.center(k)).unwrap_or(f64::NAN)).collect();
    section_from_values(env, grid, m, &u)
}

/// [`section`] with u already evaluated at the cell centers (NaN where
/// undefined).
pub fn section_from_values(env: &Envelope<f64>, grid: &Grid2, m: &GAffine<f64>, u: &[f64]) -> Result<Section> {
    let gf = &env.gf;
    if u.len() != grid.cells() {
        return Err(GjeError::Config(format!("{} values for {} cells", u.len(), grid.cells())));
    }
    let mv = check_nice(gf, m, grid)?;
    let inside: Vec<bool> = (0..grid.cells()).into_par_iter().map(|k| u[k] <= mv[k] + env.tie).collect();
    let mask = Mask::from_fn(grid, |k| inside[k]);
    let images: Vec<Option<P2>> = (0..grid.cells())
        .into_par_iter()
        .map(|k| if inside[k] { p_map(gf, &m.xb, m.z, &grid.center(k)).ok().map(|p| [p[0], p[1]]) } else { None })
        .collect();
    let cloud: Vec<P2> = images.iter().flatten().copied().collect();
    let hull = convex_hull(&cloud, gf.tol().hull_snap);
    let mut coord_width = 0.0f64;
    for k in mask.indices() {
        for nb in grid.neighbours(k) {
            if let (Some(a), Some(b)) = (images[k], images[nb]) {
                coord_width = coord_width.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
            }
        }
    }
    let mut convexity_score = 0.0;
    if hull.vertices.len() >= 3 && coord_width > 0.0 {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &hull.vertices {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let depth: Vec<f64> = (0..grid.cells())
            .into_par_iter()
            .filter(|&k| !inside[k])
            .filter_map(|k| {
                let p = p_map(gf, &m.xb, m.z, &grid.center(k)).ok()?;
                let p = [p[0], p[1]];
                if p[0] < lo[0] || p[0] > hi[0] || p[1] < lo[1] || p[1] > hi[1] {
                    return None;
                }
                let d = hull.signed_distance(p);
                (d < 0.0).then_some(-d)
            })
            .collect();
        convexity_score = depth.iter().copied().fold(0.0, f64::max) / coord_width;
    }
    Ok(Section { m: *m, mask, cloud, hull, convexity_score, coord_width })
}

/// Up to `count` random nice sections with at least 9 cells: a base cell
/// x, a focus between its active focus and another piece's, and
/// m = G(·, x̄, H(x, x̄, u(x) + h)) for h log-uniform between 0.4% and 40%
/// of the range of u.
/// Candidates where m is not nice are skipped; at most 20·count tries.
pub fn sample_sections(env: &Envelope<f64>, grid: &Grid2, count: usize, seed: u64) -> Vec<Section> {
    let evals = env.eval_centers(grid);
    let u: Vec<f64> = evals.iter().map(|e| e.as_ref().map_or(f64::NAN, |e| e.0)).collect();
    let live: Vec<(usize, usize)> = evals.iter().enumerate().filter_map(|(k, e)| e.as_ref().ok().map(|e| (k, e.1[0]))).collect();
    let mut out = Vec::new();
    if live.is_empty() || env.is_empty() {
        return out;
    }
    let (lo, hi) = live.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &(k, _)| (a.0.min(u[k]), a.1.max(u[k])));
    let spread = (hi - lo).max(1e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..20 * count {
        if out.len() >= count {
            break;
        }
        let (k, i) = live[rng.gen_range(0..live.len())];
        let other = &env.pieces[rng.gen_range(0..env.len())].xb;
        let xb = env.pieces[i].xb.lerp(other, rng.gen::<f64>());
        let h = 0.4 * spread * 10f64.powf(-2.0 * rng.gen::<f64>());
        let Ok(z) = env.gf.h(&grid.center(k), &xb, u[k] + h) else { continue };
        let Ok(sec) = section_from_values(env, grid, &GAffine::new(xb, z), &u) else { continue };
        if sec.mask.count() >= 9 {
            out.push(sec);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demos::paraboloid_envelope;
    use crate::genfun::GenFunSpec;
    use crate::linalg::Vector;

    fn v(a: f64, b: f64) -> Vector<f64> {
        Vector::from_slice(&[a, b])
    }

    #[test]
    fn paraboloid_section_is_a_disc() {
        let env = paraboloid_envelope(40, 1.0);
        let grid = Grid2::square(1.0, 100);
        // m ≡ h: G(x, 0, −h) = h.
        let m = GAffine::new(v(0.0, 0.0), -0.08);
        let s = section(&env, &grid, &m).unwrap();
        let r = (2.0f64 * 0.08).sqrt();
        let area = s.volume(&grid);
        assert!((area - std::f64::consts::PI * r * r).abs() < 0.05 * area, "{area}");
        assert!(s.convexity_score <= 1.0, "{}", s.convexity_score);
        assert!((s.hull.area() - std::f64::consts::PI * r * r).abs() < 0.1);
    }

    #[test]
    fn empty_section_when_m_is_below() {
        let env = paraboloid_envelope(10, 1.0);
        let grid = Grid2::square(1.0, 20);
        let s = section(&env, &grid, &GAffine::new(v(0.0, 0.0), 5.0)).unwrap();
        assert!(s.is_empty() && s.cloud.is_empty());
    }

    #[test]
    fn niceness_is_enforced() {
        let gf = GenFun::<f64>::from_spec(&GenFunSpec::point_source(-3.0)).unwrap();
        let x0 = v(0.0, 0.0);
        let env = Envelope::new(gf.clone(), vec![GAffine::through(&gf, &x0, v(0.0, 0.0), 0.5).unwrap()]);
        let grid = Grid2::square(0.3, 8);
        let gf2 = gf.clone().with_nice_interval(0.45, 0.55).unwrap();
        let env2 = Envelope::new(gf2, env.pieces.clone());
        let m = GAffine::through(&gf, &x0, v(0.5, 0.0), 0.6).unwrap();
        assert!(section(&env, &grid, &m).is_ok());
        assert!(matches!(section(&env2, &grid, &m), Err(GjeError::Niceness(_))));
    }
}
