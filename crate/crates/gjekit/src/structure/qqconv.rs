//! Fitting the constant M of the primal and dual quasiconvexity inequalities
//! along sampled G-segments.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{witness_of, CheckSetup, ConditionReport, Witness};
use crate::expmaps::{source_segment, target_segment};
use crate::genfun::GenFun;
use crate::linalg::Vector;
use crate::sampling::Halton;

/// Grid of s values (left factor) and s' values (right factor, capped at 0.9).
fn grids() -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let s: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let sp: Vec<f64> = (0..=10).map(|i| 0.09 * i as f64).collect();
    let mut all: Vec<f64> = s.iter().chain(&sp).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    (s, sp, all)
}

fn index_of(all: &[f64], v: f64) -> usize {
    all.iter().position(|a| (a - v).abs() < 1e-14).expect("grid value")
}

/// Running fit over the (s, s') grid of one configuration.
#[derive(Clone, Debug)]
struct Bounds {
    lower: f64,
    upper: f64,
    /// LHS excess of the worst pair whose right factor vanished.
    unbounded: f64,
}

impl Bounds {
    fn new() -> Self {
        Bounds { lower: 1.0, upper: f64::INFINITY, unbounded: 0.0 }
    }

    /// Folds in `lhs(s) ≤ M s/(1−s') · r(s')`.
    fn add(&mut self, s: f64, sp: f64, lhs: f64, r: f64, zeta: f64) {
        if s == 0.0 {
            return;
        }
        let l = lhs * (1.0 - sp) / s;
        if l > zeta {
            if r > zeta {
                self.lower = self.lower.max(l / r);
            } else {
                self.unbounded = self.unbounded.max(l);
            }
        } else if r < -zeta {
            self.upper = self.upper.min(l / r);
        }
    }

    fn m(&self) -> f64 {
        if self.unbounded > 0.0 {
            f64::INFINITY
        } else {
            self.lower
        }
    }
}

enum Outcome {
    Filtered,
    Skipped,
    Tested { bounds: Bounds, witness: Witness },
}

struct Candidate {
    x0: Vector<f64>,
    x1: Vector<f64>,
    xb0: Vector<f64>,
    xb1: Vector<f64>,
    u0: f64,
}

impl Candidate {
    fn witness(&self) -> Witness {
        witness_of(&[
            ("x0", self.x0.to_f64()),
            ("x1", self.x1.to_f64()),
            ("xbar0", self.xb0.to_f64()),
            ("xbar1", self.xb1.to_f64()),
            ("u0", vec![self.u0]),
        ])
    }
}

fn primal(gf: &GenFun<f64>, setup: &CheckSetup, interval: [f64; 2], c: &Candidate) -> Outcome {
    let (s_grid, sp_grid, all) = grids();
    let Ok(z0) = gf.h(&c.x0, &c.xb0, c.u0) else { return Outcome::Skipped };
    let Ok(seg) = source_segment(gf, &c.xb0, z0, [c.x0, c.x1], &all) else { return Outcome::Skipped };
    if !seg.well_defined {
        return Outcome::Skipped;
    }
    let xs: Vec<Vector<f64>> = seg.samples.iter().map(|r| r.as_ref().map(|p| p.point).unwrap()).collect();
    let mut g0 = Vec::with_capacity(xs.len());
    for x in &xs {
        let Ok(v) = gf.value(x, &c.xb0, z0) else { return Outcome::Skipped };
        g0.push(v);
    }
    if xs.iter().any(|x| !setup.source.contains(x)) || g0.iter().any(|v| *v < interval[0] || *v > interval[1]) {
        return Outcome::Filtered;
    }
    let Ok(z1) = gf.h(&c.x0, &c.xb1, c.u0) else { return Outcome::Skipped };
    let Ok(base) = gf.value(&c.x1, &c.xb0, z0) else { return Outcome::Skipped };
    let mut lhs = Vec::with_capacity(s_grid.len());
    for &s in &s_grid {
        let k = index_of(&all, s);
        let Ok(v) = gf.value(&xs[k], &c.xb1, z1) else { return Outcome::Skipped };
        lhs.push(v - g0[k]);
    }
    let mut r = Vec::with_capacity(sp_grid.len());
    for &sp in &sp_grid {
        let k = index_of(&all, sp);
        let Ok(zk) = gf.h(&xs[k], &c.xb1, g0[k]) else { return Outcome::Skipped };
        let Ok(v) = gf.value(&c.x1, &c.xb1, zk) else { return Outcome::Skipped };
        r.push(v - base);
    }
    let zeta = gf.tol().qq_zero * c.u0.abs().max(1.0);
    let mut b = Bounds::new();
    for (i, &s) in s_grid.iter().enumerate() {
        for (j, &sp) in sp_grid.iter().enumerate() {
            b.add(s, sp, lhs[i], r[j], zeta);
        }
    }
    Outcome::Tested { bounds: b, witness: c.witness() }
}

fn dual(gf: &GenFun<f64>, setup: &CheckSetup, interval: [f64; 2], c: &Candidate) -> Outcome {
    let (s_grid, sp_grid, all) = grids();
    if c.u0 < interval[0] || c.u0 > interval[1] {
        return Outcome::Filtered;
    }
    let Ok(seg) = target_segment(gf, &c.x0, c.u0, [c.xb0, c.xb1], &all) else { return Outcome::Skipped };
    if !seg.well_defined {
        return Outcome::Skipped;
    }
    let pts: Vec<_> = seg.samples.iter().map(|r| *r.as_ref().unwrap()).collect();
    if pts.iter().any(|p| !setup.target.contains(&p.point)) {
        return Outcome::Filtered;
    }
    let mut f = Vec::with_capacity(pts.len());
    for p in &pts {
        // (x₁, x̄(t), z(t)) must stay admissible along the whole segment.
        let Ok(v) = gf.value(&c.x1, &p.point, p.z) else { return Outcome::Skipped };
        f.push(v);
    }
    let (f0, f1) = (f[index_of(&all, 0.0)], f[index_of(&all, 1.0)]);
    let zeta = gf.tol().qq_zero * c.u0.abs().max(1.0);
    let mut b = Bounds::new();
    for &t in &s_grid {
        let lhs = f[index_of(&all, t)] - f0;
        for &tp in &sp_grid {
            let r = (f1 - f[index_of(&all, tp)]).max(0.0);
            b.add(t, tp, lhs, r, zeta);
        }
    }
    Outcome::Tested { bounds: b, witness: c.witness() }
}

/// Result of fitting M on one side.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SideFit {
    pub m: f64,
    pub tested: usize,
    pub skipped: usize,
    pub filtered: usize,
    /// Configurations whose upper bound on M (from negative right factors)
    /// falls below the fitted lower bound.
    pub conflicts: usize,
    pub witness: Option<Witness>,
    /// Excess LHS at the worst unbounded configuration.
    pub unbounded_excess: f64,
}

fn reduce(outcomes: Vec<Outcome>) -> SideFit {
    let mut fit = SideFit { m: 1.0, ..Default::default() };
    let mut worst_key = (0.0f64, 1.0f64);
    for o in outcomes {
        match o {
            Outcome::Filtered => fit.filtered += 1,
            Outcome::Skipped => fit.skipped += 1,
            Outcome::Tested { bounds, witness } => {
                fit.tested += 1;
                let key = (bounds.unbounded, bounds.lower);
                if key > worst_key {
                    worst_key = key;
                    fit.witness = Some(witness);
                }
                fit.m = fit.m.max(bounds.m());
                fit.unbounded_excess = fit.unbounded_excess.max(bounds.unbounded);
                if bounds.upper < bounds.lower * (1.0 - 1e-6) {
                    fit.conflicts += 1;
                }
            }
        }
    }
    fit
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QqFit {
    pub primal: SideFit,
    pub dual: SideFit,
}

impl QqFit {
    pub fn m(&self) -> f64 {
        self.primal.m.max(self.dual.m)
    }
}

/// Evaluates a fixed stream of `candidates` configurations (x₀, x₁, x̄₀, x̄₁, u₀)
/// with u₀ drawn from the setup interval. `interval` is the constraint
/// interval: it only filters, so nested intervals see nested sample sets.
pub fn fit_qqconv(gf: &GenFun<f64>, setup: &CheckSetup, interval: [f64; 2], candidates: usize) -> QqFit {
    let n = gf.dim();
    let cands: Vec<Candidate> = Halton::new(4 * n + 1, setup.seed ^ 0x5151_0000)
        .take(candidates)
        .map(|q| Candidate {
            x0: setup.source.at(&q[..n]),
            x1: setup.source.at(&q[n..2 * n]),
            xb0: setup.target.at(&q[2 * n..3 * n]),
            xb1: setup.target.at(&q[3 * n..4 * n]),
            u0: setup.u_at(q[4 * n]),
        })
        .collect();
    let p: Vec<Outcome> = cands.par_iter().map(|c| primal(gf, setup, interval, c)).collect();
    let d: Vec<Outcome> = cands.par_iter().map(|c| dual(gf, setup, interval, c)).collect();
    QqFit { primal: reduce(p), dual: reduce(d) }
}

pub fn check_qqconv(gf: &GenFun<f64>, setup: &CheckSetup, interval: [f64; 2], candidates: usize) -> ConditionReport {
    let fit = fit_qqconv(gf, setup, interval, candidates);
    let tested = fit.primal.tested + fit.dual.tested;
    let skipped = fit.primal.skipped + fit.dual.skipped;
    let excess = fit.primal.unbounded_excess.max(fit.dual.unbounded_excess);
    let witness = if fit.primal.m >= fit.dual.m { fit.primal.witness.clone() } else { fit.dual.witness.clone() };
    let mut rep = ConditionReport::new("QQConv", tested, skipped, -excess, gf.tol().qq_zero)
        .with_constant("m", fit.m())
        .with_constant("m_primal", fit.primal.m)
        .with_constant("m_dual", fit.dual.m)
        .with_witness(witness);
    if excess > 0.0 {
        rep.pass = false;
        rep = rep.with_note("a positive left side met a vanishing right factor: no finite M");
    }
    if fit.primal.conflicts > 0 {
        rep = rep.with_note(format!(
            "{} primal configurations also bound M from above below the fitted value",
            fit.primal.conflicts
        ));
    }
    if fit.primal.filtered + fit.dual.filtered > 0 {
        rep = rep.with_note(format!(
            "{} primal and {} dual configurations fell outside the constraint set",
            fit.primal.filtered, fit.dual.filtered
        ));
    }
    if tested == 0 {
        rep.pass = false;
        rep = rep.with_note("no configuration satisfied the constraints");
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genfun::GenFunSpec;

    fn setup_for(spec: &GenFunSpec) -> (GenFun<f64>, CheckSetup) {
        let gf = GenFun::from_spec(spec).unwrap();
        let s = CheckSetup::for_builtin(&gf);
        (gf, s)
    }

    #[test]
    fn quadratic_fits_one() {
        let (gf, s) = setup_for(&GenFunSpec::quadratic());
        let fit = fit_qqconv(&gf, &s, s.interval, 300);
        assert!(fit.primal.tested > 50 && fit.dual.tested > 50, "{fit:?}");
        assert!((fit.primal.m - 1.0).abs() <= 1e-9, "{}", fit.primal.m);
        assert!((fit.dual.m - 1.0).abs() <= 1e-9, "{}", fit.dual.m);
        assert_eq!(fit.primal.conflicts, 0);
    }

    #[test]
    fn bounds_fold() {
        let mut b = Bounds::new();
        b.add(0.5, 0.0, 1.0, 1.0, 1e-9);
        assert_eq!(b.m(), 2.0);
        b.add(1.0, 0.9, 1.0, 0.0, 1e-9);
        assert_eq!(b.m(), f64::INFINITY);
        let mut c = Bounds::new();
        c.add(1.0, 0.0, -1.0, -2.0, 1e-9);
        assert_eq!(c.upper, 0.5);
    }

    #[test]
    fn shrinking_the_interval_never_raises_m() {
        let (gf, s) = setup_for(&GenFunSpec::cubic(3.0));
        let wide = fit_qqconv(&gf, &s, [-1.0, 1.0], 200);
        let narrow = fit_qqconv(&gf, &s, [-0.4, 0.4], 200);
        assert!(narrow.primal.m <= wide.primal.m && narrow.dual.m <= wide.dual.m);
        assert!(narrow.primal.tested <= wide.primal.tested);
    }
}
