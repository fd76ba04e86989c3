//! Estimates of |∂_G u(A)| for sets A given as grid masks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CellIntegrator, Envelope};
use crate::error::{GjeError, Result};
use crate::expmaps::exp_target;
use crate::genfun::{SourcePoint, TargetPoint};
use crate::grid::{Grid2, Mask};
use crate::hull::P2;
use crate::linalg::Vector;

#[derive(Clone, Debug, PartialEq)]
pub enum Estimator {
    /// Images of the grid nodes under X̄(x, u, Du), Du by forward
    /// differences; the volume is the sum of the positive image-quad areas.
    Grid,
    /// Area formula at random points of A.
    MonteCarlo { samples: usize, seed: u64 },
    /// Semi-discrete convention: Σ weights[i] over the pieces whose cell
    /// has positive mass inside A.
    HitMass { weights: Vec<f64>, cell_mass: Vec<f64> },
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Grid => "grid",
            Estimator::MonteCarlo { .. } => "monte-carlo",
            Estimator::HitMass { .. } => "hit-mass",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub set_id: String,
    pub volume: f64,
    pub estimator: String,
    pub samples: usize,
    pub std_error: Option<f64>,
}

/// FNV-1a over the run-length code of the mask.
fn mask_id(a: &Mask) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for r in a.to_rle().into_iter().chain([a.nx, a.ny]) {
        for b in (r as u64).to_le_bytes() {
            h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
        }
    }
    format!("mask-{h:016x}")
}

fn quad_area(q: [P2; 4]) -> f64 {
    let mut s = 0.0;
    for k in 0..4 {
        let (a, b) = (q[k], q[(k + 1) % 4]);
        s += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * s
}

fn p2(v: &TargetPoint<f64>) -> P2 {
    [v[0], v[1]]
}

/// X̄(x, u(x), Du(x)) with Du from one-sided differences of step ±h.
fn image_at(env: &Envelope<f64>, x: &SourcePoint<f64>, h: [f64; 2]) -> Result<TargetPoint<f64>> {
    let (u, act) = env.eval(x)?;
    let mut du = Vector::zeros(2);
    for a in 0..2 {
        let mut y = *x;
        y[a] += h[a];
        du[a] = (env.value(&y)? - u) / h[a];
    }
    let p = &env.pieces[act[0]];
    exp_target(&env.gf, x, u, &du, Some((&p.xb, p.z))).map(|r| r.0)
}

pub fn gma_measure(env: &Envelope<f64>, grid: &Grid2, a: &Mask, est: &Estimator) -> Result<MeasureReport> {
    if a.len() != grid.cells() {
        return Err(GjeError::Config(format!("mask has {} cells, grid has {}", a.len(), grid.cells())));
    }
    if env.gf.dim() != 2 {
        return Err(GjeError::Unsupported("measures are computed on two-dimensional grids".into()));
    }
    let mut rep = MeasureReport {
        set_id: mask_id(a),
        volume: 0.0,
        estimator: est.name().into(),
        samples: 0,
        std_error: matches!(est, Estimator::MonteCarlo { .. }).then_some(0.0),
    };
    if a.is_empty() {
        return Ok(rep);
    }
    match est {
        Estimator::Grid => {
            let (nx, ny) = (grid.nx, grid.ny);
            let mut used = vec![false; (nx + 1) * (ny + 1)];
            for k in a.indices() {
                let (i, j) = grid.ij(k);
                for (di, dj) in [(0, 0), (1, 0), (1, 1), (0, 1)] {
                    used[(j + dj) * (nx + 1) + i + di] = true;
                }
            }
            let images: Vec<Option<P2>> = (0..used.len())
                .into_par_iter()
                .map(|n| {
                    if !used[n] {
                        return None;
                    }
                    let (i, j) = (n % (nx + 1), n / (nx + 1));
                    let h = [if i < nx { grid.dx() } else { -grid.dx() }, if j < ny { grid.dy() } else { -grid.dy() }];
                    image_at(env, &grid.node(i, j), h).ok().map(|v| p2(&v))
                })
                .collect();
            let mut vol = 0.0;
            for k in a.indices() {
                let (i, j) = grid.ij(k);
                let c = |di: usize, dj: usize| images[(j + dj) * (nx + 1) + i + di];
                if let (Some(p), Some(q), Some(r), Some(s)) = (c(0, 0), c(1, 0), c(1, 1), c(0, 1)) {
                    vol += quad_area([p, q, r, s]).max(0.0);
                    rep.samples += 1;
                }
            }
            rep.volume = vol;
        }
        Estimator::MonteCarlo { samples, seed } => {
            let cells: Vec<usize> = a.indices().collect();
            let area = cells.len() as f64 * grid.cell_area();
            let (hx, hy) = (grid.dx(), grid.dy());
            let draws: Vec<Option<f64>> = (0..*samples)
                .into_par_iter()
                .map(|s| {
                    // Per-sample streams keep the result independent of scheduling.
                    let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                    rng.set_stream(s as u64);
                    let k = cells[rng.gen_range(0..cells.len())];
                    let c = grid.center(k);
                    let x = Vector::from_slice(&[c[0] + (rng.gen::<f64>() - 0.5) * hx, c[1] + (rng.gen::<f64>() - 0.5) * hy]);
                    let at = |dx: f64, dy: f64| {
                        let y = Vector::from_slice(&[x[0] + dx, x[1] + dy]);
                        image_at(env, &y, [hx, hy]).ok().map(|v| p2(&v))
                    };
                    let q = [at(0.0, 0.0)?, at(hx, 0.0)?, at(hx, hy)?, at(0.0, hy)?];
                    Some(quad_area(q).max(0.0) / (hx * hy))
                })
                .collect();
            let vals: Vec<f64> = draws.into_iter().flatten().collect();
            let n = vals.len();
            rep.samples = n;
            if n > 0 {
                let mean = vals.iter().sum::<f64>() / n as f64;
                let var = if n > 1 { vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
                rep.volume = area * mean;
                rep.std_error = Some(area * (var / n as f64).sqrt());
            }
        }
        Estimator::HitMass { weights, cell_mass } => {
            if weights.len() != env.len() {
                return Err(GjeError::Config(format!("{} weights for {} pieces", weights.len(), env.len())));
            }
            let ci = CellIntegrator::new(grid, cell_mass.clone());
            let vals = ci.values(&env.gf, &env.pieces);
            let m = ci.masses(&vals, Some(a));
            rep.volume = weights.iter().zip(&m).filter(|(_, m)| **m > 0.0).map(|(w, _)| *w).sum();
            rep.samples = a.count();
        }
    }
    Ok(rep)
}
