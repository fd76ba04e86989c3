//! Engulfing diagnostic on the sections S(x, x̄, h) = {u ≤ m_h}, where
//! m_h = G(·, x̄, H(x, x̄, u(x) + h)).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GjeError, Result};
use crate::gconvex::{Envelope, GAffine};
use crate::genfun::{GenFun, SourcePoint, TargetPoint};
use crate::grid::Grid2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngulfingConfig {
    /// Number of base points x₀.
    pub samples: usize,
    pub seed: u64,
    pub h_grid: Vec<f64>,
    /// Fraction of each side of the grid excluded from the base points.
    pub margin: f64,
    /// Allowed relative spread of the fitted Λ across h_grid.
    pub stability: f64,
    /// Explicit base points; when nonempty, `samples` and `margin` are unused.
    #[serde(default)]
    pub bases: Vec<[f64; 2]>,
}

impl Default for EngulfingConfig {
    fn default() -> Self {
        EngulfingConfig { samples: 40, seed: 0, h_grid: vec![0.01, 0.005, 0.0025], margin: 0.2, stability: 0.2, bases: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngulfingRow {
    pub h: f64,
    pub lambda_max: f64,
    pub lambda_mean: f64,
    /// (x₀, x₁) pairs examined.
    pub pairs: usize,
    /// Pairs where no finite Λ works.
    pub unbounded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngulfingReport {
    pub rows: Vec<EngulfingRow>,
    pub lambda: f64,
    /// max/min − 1 of the per-h maxima.
    pub spread: f64,
    pub stable: bool,
    /// 1/Λ, the exponent bound this Λ would feed into; reported only.
    pub beta_bound: f64,
}

/// Smallest t ≥ 0 with u(x₀) ≤ G(x₀, x̄₁, H(x₁, x̄₁, u(x₁) + t)); `None`
/// when the height leaves the range first.
fn minimal_lift(gf: &GenFun<f64>, x0: &SourcePoint<f64>, u0: f64, x1: &SourcePoint<f64>, xb1: &TargetPoint<f64>, u1: f64, h: f64) -> Option<f64> {
    let f = |t: f64| -> Option<f64> { gf.value(x0, xb1, gf.h(x1, xb1, u1 + t).ok()?).ok().map(|g| g - u0) };
    if f(0.0)? >= -1e-12 * u0.abs().max(1.0) {
        return Some(0.0);
    }
    let (mut lo, mut hi) = (0.0, h);
    let mut found = false;
    for _ in 0..60 {
        if f(hi)? >= 0.0 {
            found = true;
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    if !found {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-14 * hi.max(1e-300) {
            break;
        }
        match f(mid) {
            Some(v) if v >= 0.0 => hi = mid,
            Some(_) => lo = mid,
            None => return None,
        }
    }
    Some(hi)
}

/// For base points x₀ with x̄₀ the active focus, and every x₁ in
/// S(x₀, x̄₀, h) with x̄₁ its active focus, the smallest Λ ≥ 1 with
/// x₀ ∈ S(x₁, x̄₁, Λh). Points are cell centers of `grid`.
pub fn engulfing_check(env: &Envelope<f64>, grid: &Grid2, cfg: &EngulfingConfig) -> Result<EngulfingReport> {
    let gf = &env.gf;
    let evals = env.eval_centers(grid);
    let u: Vec<f64> = evals.iter().map(|e| e.as_ref().map_or(f64::NAN, |e| e.0)).collect();
    let arg: Vec<Option<usize>> = evals.iter().map(|e| e.as_ref().ok().map(|e| e.1[0])).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mx, my) = ((cfg.margin * grid.nx as f64) as usize, (cfg.margin * grid.ny as f64) as usize);
    let mut bases: Vec<usize> = cfg.bases.iter().filter_map(|b| grid.locate(&SourcePoint::from_slice(b))).filter(|&k| arg[k].is_some()).collect();
    if !cfg.bases.is_empty() && bases.is_empty() {
        return Err(GjeError::Config("no base point lies on the grid".into()));
    }
    while cfg.bases.is_empty() && bases.len() < cfg.samples {
        let k = grid.index(rng.gen_range(mx..grid.nx - mx), rng.gen_range(my..grid.ny - my));
        if arg[k].is_some() {
            bases.push(k);
        }
    }
    let mut rows = Vec::with_capacity(cfg.h_grid.len());
    for &h in &cfg.h_grid {
        let per_base: Vec<(f64, usize, usize)> = bases
            .iter()
            .map(|&k0| {
                let x0 = grid.center(k0);
                let xb0 = env.pieces[arg[k0].expect("filtered")].xb;
                let Ok(z) = gf.h(&x0, &xb0, u[k0] + h) else { return (f64::INFINITY, 0, 1) };
                let m = GAffine::new(xb0, z);
                let lifts: Vec<Option<f64>> = (0..grid.cells())
                    .into_par_iter()
                    .filter_map(|k1| {
                        let x1 = grid.center(k1);
                        let j = arg[k1]?;
                        let mv = m.value(gf, &x1).ok()?;
                        (u[k1] <= mv + env.tie).then(|| minimal_lift(gf, &x0, u[k0], &x1, &env.pieces[j].xb, u[k1], h))
                    })
                    .collect();
                let unbounded = lifts.iter().filter(|l| l.is_none()).count();
                let lam = if unbounded > 0 { f64::INFINITY } else { lifts.iter().flatten().fold(1.0f64, |a, t| a.max(t / h)) };
                (lam, lifts.len(), unbounded)
            })
            .collect();
        let lambda_max = per_base.iter().map(|r| r.0).fold(1.0, f64::max);
        let lambda_mean = per_base.iter().map(|r| r.0).sum::<f64>() / per_base.len().max(1) as f64;
        rows.push(EngulfingRow {
            h,
            lambda_max,
            lambda_mean,
            pairs: per_base.iter().map(|r| r.1).sum(),
            unbounded: per_base.iter().map(|r| r.2).sum(),
        });
    }
    let lambda = rows.iter().map(|r| r.lambda_max).fold(1.0, f64::max);
    let low = rows.iter().map(|r| r.lambda_max).fold(f64::INFINITY, f64::min);
    let spread = if lambda.is_finite() { lambda / low - 1.0 } else { f64::INFINITY };
    Ok(EngulfingReport { rows, lambda, spread, stable: spread <= cfg.stability, beta_bound: 1.0 / lambda })
}
