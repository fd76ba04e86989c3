//! Semi-discrete solver: coordinate sweeps on the piece heights until every
//! target receives its prescribed mass.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{GjeError, Result};
use crate::gconvex::{CellIntegrator, Envelope, GAffine, ValueTable};
use crate::genfun::{GenFun, SourcePoint, TargetPoint};
use crate::grid::Grid2;

/// Cap on the rounds of sweeping and re-normalizing.
const NORMALIZATION_ROUNDS: usize = 50;
const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct SemiDiscreteProblem {
    pub gf: GenFun<f64>,
    pub grid: Grid2,
    /// f integrated over each grid cell.
    pub cell_mass: Vec<f64>,
    pub targets: Vec<TargetPoint<f64>>,
    pub masses: Vec<f64>,
    pub anchor: SourcePoint<f64>,
    pub u0: f64,
    /// Relative to the total mass.
    pub tol_mass: f64,
}

impl SemiDiscreteProblem {
    /// Checks the data. `masses` must balance the total source mass.
    pub fn new(
        gf: GenFun<f64>,
        grid: Grid2,
        cell_mass: Vec<f64>,
        targets: Vec<TargetPoint<f64>>,
        masses: Vec<f64>,
        anchor: SourcePoint<f64>,
        u0: f64,
    ) -> Result<Self> {
        let tol_mass = gf.tol().tol_mass;
        let p = SemiDiscreteProblem { gf, grid, cell_mass, targets, masses, anchor, u0, tol_mass };
        p.validate()?;
        Ok(p)
    }

    /// Like [`SemiDiscreteProblem::new`], with target masses proportional to `weights`.
    pub fn with_weights(
        gf: GenFun<f64>,
        grid: Grid2,
        density: impl Fn(&SourcePoint<f64>) -> f64,
        targets: Vec<TargetPoint<f64>>,
        weights: &[f64],
        anchor: SourcePoint<f64>,
        u0: f64,
    ) -> Result<Self> {
        let cell_mass = grid.cell_masses(density);
        let total: f64 = cell_mass.iter().sum();
        let wsum: f64 = weights.iter().sum();
        if !(wsum > 0.0) {
            return Err(GjeError::Config("target weights must have a positive sum".into()));
        }
        let masses = weights.iter().map(|w| w / wsum * total).collect();
        Self::new(gf, grid, cell_mass, targets, masses, anchor, u0)
    }

    pub fn total_mass(&self) -> f64 {
        self.cell_mass.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GjeError::Config(m));
        if self.gf.dim() != 2 {
            return bad("the solver works on two-dimensional charts".into());
        }
        if self.cell_mass.len() != self.grid.cells() {
            return bad(format!("{} cell masses for {} cells", self.cell_mass.len(), self.grid.cells()));
        }
        if self.cell_mass.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return bad("the density must be finite and nonnegative".into());
        }
        let total = self.total_mass();
        if !(total > 0.0) {
            return bad("the source has no mass".into());
        }
        if self.targets.is_empty() || self.targets.len() != self.masses.len() {
            return bad("one mass per target, at least one target".into());
        }
        if self.masses.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return bad("target masses must be positive".into());
        }
        let g: f64 = self.masses.iter().sum();
        if (g - total).abs() > 1e-12 * total {
            return bad(format!("target mass {g} does not balance source mass {total}"));
        }
        for i in 0..self.targets.len() {
            if self.targets[i].len() != 2 {
                return bad(format!("target {i} is not a chart point"));
            }
            if self.targets[..i].iter().any(|t| *t == self.targets[i]) {
                return bad(format!("target {i} repeats an earlier target"));
            }
        }
        if !self.gf.range().is_nice(self.u0) {
            return bad(format!("u₀ = {} is outside the nice interval", self.u0));
        }
        if !(self.tol_mass > 0.0) {
            return bad("tol_mass must be positive".into());
        }
        Ok(())
    }

    pub fn integrator(&self) -> CellIntegrator {
        CellIntegrator::new(&self.grid, self.cell_mass.clone())
    }

    /// Heights putting every piece through (x₀, u₀).
    pub fn initial_heights(&self) -> Result<Vec<f64>> {
        self.targets.iter().map(|xb| self.gf.h(&self.anchor, xb, self.u0)).collect()
    }

    pub fn envelope(&self, heights: &[f64]) -> Envelope<f64> {
        Envelope::from_heights(self.gf.clone(), &self.targets, heights)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub sweep: usize,
    pub residual_inf: f64,
    /// |Σ masses − T_f| / T_f.
    pub conservation: f64,
    pub wall_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverState {
    /// Oriented heights.
    pub heights: Vec<f64>,
    pub residual: Vec<f64>,
    pub sweeps: usize,
    pub mass_evaluations: usize,
    pub normalization_rounds: usize,
    pub normalization_error: f64,
    /// Range of heights visited by each piece.
    pub brackets: Vec<[f64; 2]>,
    pub history: Vec<SweepRecord>,
}

impl SolverState {
    pub fn residual_inf(&self) -> f64 {
        self.residual.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    /// CSV with columns sweep, residual_inf, conservation, wall_time.
    pub fn write_log<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.history {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Work<'a> {
    p: &'a SemiDiscreteProblem,
    ci: CellIntegrator,
    vals: ValueTable,
    z: Vec<f64>,
    noise: f64,
    evals: usize,
    brackets: Vec<[f64; 2]>,
}

impl<'a> Work<'a> {
    fn new(p: &'a SemiDiscreteProblem, z: Vec<f64>) -> Self {
        let ci = p.integrator();
        let pieces: Vec<_> = p.targets.iter().zip(&z).map(|(xb, z)| GAffine::new(*xb, *z)).collect();
        let vals = ci.values(&p.gf, &pieces);
        let noise = p.cell_mass.iter().copied().fold(0.0, f64::max);
        let brackets = z.iter().map(|z| [*z, *z]).collect();
        Work { p, ci, vals, z, noise, evals: 0, brackets }
    }

    fn set_height(&mut self, i: usize, z: f64) {
        let col = self.ci.piece_column(&self.p.gf, &GAffine::new(self.p.targets[i], z));
        self.vals.set_column(i, &col);
        self.z[i] = z;
        let b = &mut self.brackets[i];
        b[0] = b[0].min(z);
        b[1] = b[1].max(z);
    }

    fn mass(&mut self, i: usize, rivals: &[usize]) -> f64 {
        self.evals += 1;
        self.ci.mass_with_rivals(i, &self.vals, rivals)
    }

    fn masses(&self) -> Vec<f64> {
        self.ci.masses(&self.vals, None)
    }

    /// Lowers z_i until the mass of cell i is within `tol` of `goal`.
    fn fill(&mut self, i: usize, goal: f64, tol: f64) -> Result<()> {
        let rivals = self.ci.rivals(i, &self.vals);
        let (mut z_hi, mut m_hi) = (self.z[i], self.mass(i, &rivals));
        if m_hi >= goal - tol {
            return Ok(());
        }
        let floor = self.p.gf.z_bracket(&self.p.targets[i]).0;
        let z_min = if floor.is_finite() { floor + 1e-12 * floor.abs().max(1.0) } else { f64::NEG_INFINITY };
        let mut step = 1e-3 * z_hi.abs().max(1e-3);
        let mut lo = None;
        for _ in 0..=self.p.gf.tol().bracket_doublings {
            let zt = (z_hi - step).max(z_min);
            self.set_height(i, zt);
            let m = self.mass(i, &rivals);
            if m < m_hi - self.noise {
                return Err(GjeError::Monotonicity(format!(
                    "piece {i}: mass fell from {m_hi} to {m} as z decreased from {z_hi} to {zt}"
                )));
            }
            if m >= goal - tol {
                lo = Some((zt, m));
                break;
            }
            if zt <= z_min {
                return Err(GjeError::Infeasible(format!("piece {i}: mass {m} < {goal} at the edge of the admissible heights")));
            }
            (z_hi, m_hi) = (zt, m);
            step *= 2.0;
        }
        let Some((mut z_lo, m_lo)) = lo else {
            return Err(GjeError::Infeasible(format!("piece {i}: no bracket for mass {goal} within the doubling cap")));
        };
        // Illinois on f(z) = mass − goal with f(z_lo) ≥ −tol > f(z_hi).
        let (mut f_lo, mut f_hi) = (m_lo - goal, m_hi - goal);
        let mut best = (f_lo.abs(), z_lo);
        if f_lo.abs() <= tol {
            return Ok(());
        }
        let mut side = 0i8;
        for _ in 0..self.p.gf.tol().root_max_iter {
            let mut zt = z_lo - f_lo * (z_hi - z_lo) / (f_hi - f_lo);
            if !(zt > z_lo && zt < z_hi) {
                zt = 0.5 * (z_lo + z_hi);
            }
            if zt <= z_lo || zt >= z_hi {
                break;
            }
            self.set_height(i, zt);
            let f = self.mass(i, &rivals) - goal;
            if f.abs() < best.0 {
                best = (f.abs(), zt);
            }
            if f.abs() <= tol {
                return Ok(());
            }
            if f > 0.0 {
                z_lo = zt;
                f_lo = f;
                if side == -1 {
                    f_hi *= 0.5;
                }
                side = -1;
            } else {
                z_hi = zt;
                f_hi = f;
                if side == 1 {
                    f_lo *= 0.5;
                }
                side = 1;
            }
        }
        // The mass map may be flat across the goal; keep the closest height.
        if self.z[i] != best.1 {
            self.set_height(i, best.1);
        }
        Ok(())
    }

    fn envelope_at_anchor(&self) -> Result<f64> {
        self.p.envelope(&self.z).value(&self.p.anchor)
    }

    /// Shifts every piece by the same amount in value at x₀.
    fn normalize(&mut self, delta: f64) -> Result<()> {
        let (gf, x0) = (&self.p.gf, &self.p.anchor);
        for i in 0..self.z.len() {
            let g = gf.value(x0, &self.p.targets[i], self.z[i])?;
            let z = gf.h(x0, &self.p.targets[i], g + delta)?;
            self.set_height(i, z);
        }
        Ok(())
    }
}

/// Runs sweeps, shifting the pieces after each one so that u(x₀) = u₀,
/// until the residual bound and the normalization hold together.
pub fn solve(p: &SemiDiscreteProblem) -> Result<(Envelope<f64>, SolverState)> {
    p.validate()?;
    let start = Instant::now();
    let total = p.total_mass();
    let n = p.len();
    let tol_abs = p.tol_mass * total;
    // All r_i ≥ −δ forces r_i ≤ (N−1)δ, so δ below tol/N suffices.
    let delta = 0.5 * tol_abs / n as f64;
    let mut w = Work::new(p, p.initial_heights()?);
    let mut history = Vec::new();
    let mut sweep = 0usize;
    let mut best = f64::INFINITY;
    let mut best_at = 0usize;
    let tol = p.gf.tol();
    let mut rounds = 0;
    let mut norm_err;
    let residual = loop {
        rounds += 1;
        let residual = loop {
            let m = w.masses();
            let r: Vec<f64> = m.iter().zip(&p.masses).map(|(m, g)| m - g).collect();
            let rinf = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let sum: f64 = m.iter().sum();
            history.push(SweepRecord {
                sweep,
                residual_inf: rinf,
                conservation: (sum - total).abs() / total,
                wall_time: start.elapsed().as_secs_f64(),
            });
            if r.iter().all(|v| *v >= -delta) && rinf <= tol_abs {
                break r;
            }
            if rinf < best {
                best = rinf;
                best_at = sweep;
            } else if sweep - best_at >= tol.stall_sweeps {
                return Err(GjeError::Stall(format!("no residual decrease in {} sweeps (best {best})", tol.stall_sweeps)));
            }
            if sweep >= tol.max_sweeps {
                return Err(GjeError::Stall(format!("{} sweeps without convergence (residual {rinf})", tol.max_sweeps)));
            }
            sweep += 1;
            for i in 0..n {
                w.fill(i, p.masses[i], 0.1 * delta)?;
            }
            // Re-anchoring after every sweep keeps each shift small; a single
            // shift at the end would undo most of the mass accuracy.
            let e = w.envelope_at_anchor()? - p.u0;
            if e.abs() > NORMALIZATION_TOL {
                w.normalize(-e)?;
            }
        };
        norm_err = w.envelope_at_anchor()? - p.u0;
        if norm_err.abs() <= NORMALIZATION_TOL {
            break residual;
        }
        if rounds >= NORMALIZATION_ROUNDS {
            return Err(GjeError::Convergence(format!("normalization off by {norm_err} after {rounds} rounds")));
        }
        w.normalize(-norm_err)?;
    };
    let state = SolverState {
        heights: w.z.clone(),
        residual,
        sweeps: sweep,
        mass_evaluations: w.evals,
        normalization_rounds: rounds,
        normalization_error: norm_err,
        brackets: w.brackets.clone(),
        history,
    };
    Ok((p.envelope(&w.z), state))
}

/// r_i = mass of cell i − g_i.
pub fn mass_residual(env: &Envelope<f64>, p: &SemiDiscreteProblem) -> Result<Vec<f64>> {
    if env.len() != p.len() {
        return Err(GjeError::Config(format!("{} pieces for {} targets", env.len(), p.len())));
    }
    let ci = p.integrator();
    let m = ci.masses(&ci.values(&env.gf, &env.pieces), None);
    Ok(m.iter().zip(&p.masses).map(|(m, g)| m - g).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub z: f64,
    pub mass: f64,
}

/// Mass of cell i against z_i with the other heights fixed. The mass must
/// not increase with z beyond one grid-cell mass.
pub fn monotonicity_probe(p: &SemiDiscreteProblem, heights: &[f64], i: usize, z_grid: &[f64]) -> Result<Vec<ProbeRow>> {
    if i >= p.len() || heights.len() != p.len() {
        return Err(GjeError::Config("probe index or heights out of range".into()));
    }
    let mut zs = z_grid.to_vec();
    zs.sort_by(f64::total_cmp);
    let mut w = Work::new(p, heights.to_vec());
    let rivals = w.ci.rivals(i, &w.vals);
    let mut rows: Vec<ProbeRow> = Vec::with_capacity(zs.len());
    for z in zs {
        w.set_height(i, z);
        let mass = w.mass(i, &rivals);
        if let Some(prev) = rows.last() {
            if mass > prev.mass + w.noise {
                return Err(GjeError::Monotonicity(format!(
                    "piece {i}: mass {} at z = {} but {mass} at z = {z}",
                    prev.mass, prev.z
                )));
            }
        }
        rows.push(ProbeRow { z, mass });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genfun::GenFunSpec;
    use crate::linalg::Vector;

    fn v(a: f64, b: f64) -> Vector<f64> {
        Vector::from_slice(&[a, b])
    }

    fn quad_problem(targets: Vec<Vector<f64>>, weights: &[f64]) -> SemiDiscreteProblem {
        let gf = GenFun::from_spec(&GenFunSpec::quadratic()).unwrap();
        SemiDiscreteProblem::with_weights(gf, Grid2::square(0.5, 32), |_| 1.0, targets, weights, v(0.0, 0.0), 0.0).unwrap()
    }

    #[test]
    fn one_target_only_normalizes() {
        let p = quad_problem(vec![v(0.3, 0.1)], &[1.0]);
        let (env, st) = solve(&p).unwrap();
        assert_eq!(st.residual, vec![0.0]);
        assert!((env.value(&p.anchor).unwrap() - p.u0).abs() <= 1e-9);
        assert_eq!(mass_residual(&env, &p).unwrap(), vec![0.0]);
    }

    #[test]
    fn mirror_targets_get_equal_heights() {
        let p = quad_problem(vec![v(0.25, 0.0), v(-0.25, 0.0)], &[1.0, 1.0]);
        let (_, st) = solve(&p).unwrap();
        assert!((st.heights[0] - st.heights[1]).abs() <= 1e-9, "{:?}", st.heights);
    }

    #[test]
    fn lattice_targets_reproduce_the_paraboloid() {
        // Uniform square to the centers of a 3×3 partition: the cells are the
        // partition squares and z_i = |c_i|²/2 up to a common constant.
        let c: Vec<f64> = (0..3).map(|k| -1.0 / 3.0 + k as f64 / 3.0).collect();
        let targets: Vec<_> = c.iter().flat_map(|b| c.iter().map(move |a| v(*a, *b))).collect();
        let p = quad_problem(targets.clone(), &[1.0; 9]);
        let (env, st) = solve(&p).unwrap();
        assert!(st.residual_inf() <= 1e-6 * p.total_mass());
        let off: Vec<f64> = targets.iter().zip(&st.heights).map(|(t, z)| z - 0.5 * t.norm_sq()).collect();
        for o in &off {
            assert!((o - off[4]).abs() < 1e-6, "{off:?}");
        }
        let r = mass_residual(&env, &p).unwrap();
        assert!(r.iter().sum::<f64>().abs() <= 1e-12 * p.total_mass());
        assert!(st.history.iter().all(|h| h.conservation <= 1e-12));
    }

    #[test]
    fn residual_of_equal_heights_sums_to_zero() {
        let p = quad_problem(vec![v(0.3, 0.0), v(-0.1, 0.2), v(0.0, -0.4)], &[1.0, 2.0, 3.0]);
        let env = p.envelope(&[0.0; 3]);
        let r = mass_residual(&env, &p).unwrap();
        assert!(r.iter().any(|v| v.abs() > 1e-3));
        assert!(r.iter().sum::<f64>().abs() <= 1e-12 * p.total_mass());
    }

    #[test]
    fn probe_is_a_decreasing_staircase() {
        let p = quad_problem(vec![v(0.3, 0.0), v(-0.3, 0.0)], &[1.0, 1.0]);
        let zs: Vec<f64> = (0..41).map(|k| -1.0 + 0.05 * k as f64).collect();
        let rows = monotonicity_probe(&p, &[0.0, 0.0], 0, &zs).unwrap();
        assert_eq!(rows[0].mass, p.total_mass());
        assert_eq!(rows.last().unwrap().mass, 0.0);
        assert!(rows.windows(2).all(|w| w[1].mass <= w[0].mass));
        assert!(rows.windows(2).any(|w| w[1].mass < w[0].mass));
    }

    #[test]
    fn unbalanced_masses_are_rejected() {
        let gf = GenFun::from_spec(&GenFunSpec::quadratic()).unwrap();
        let g = Grid2::square(0.5, 4);
        let cm = g.cell_masses(|_| 1.0);
        let r = SemiDiscreteProblem::new(gf, g, cm, vec![v(0.0, 0.0)], vec![0.5], v(0.0, 0.0), 0.0);
        assert!(matches!(r, Err(GjeError::Config(_))));
    }
}
