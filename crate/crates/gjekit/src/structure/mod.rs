//! Sampled verification of the structural conditions on G. Every check is a
//! falsifier: a pass means no violation was found at the sampled density.

pub mod checks;
pub mod qqconv;
pub mod tensor;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::genfun::{Chart, GenFun, Kernel};
use crate::linalg::Vector;
use crate::sampling::{BoxDomain, Halton};

pub use checks::{check_domconv, check_nondeg, check_twist, check_unif_lip};
pub use qqconv::{check_qqconv, fit_qqconv, QqFit, SideFit};
pub use tensor::{a_matrix, a_star_matrix, axis_pairs, g3w_dual_form, g3w_form, random_pair, DualBase, PrimalBase};

pub type Witness = BTreeMap<String, Vec<f64>>;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: String,
    pub samples: usize,
    /// Samples that could not be evaluated (stencil outside the image set,
    /// ill-defined segments). They are counted, not judged.
    pub skipped: usize,
    pub worst_margin: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub witness: Option<Witness>,
    pub constants: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl ConditionReport {
    pub(crate) fn new(condition: &str, samples: usize, skipped: usize, worst_margin: f64, tolerance: f64) -> Self {
        ConditionReport {
            condition: condition.to_string(),
            samples,
            skipped,
            worst_margin,
            tolerance,
            pass: worst_margin >= -tolerance,
            witness: None,
            constants: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub(crate) fn with_constant(mut self, k: &str, v: f64) -> Self {
        self.constants.insert(k.to_string(), v);
        self
    }

    pub(crate) fn with_witness(mut self, w: Option<Witness>) -> Self {
        self.witness = w;
        self
    }

    pub(crate) fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn constant(&self, k: &str) -> Option<f64> {
        self.constants.get(k).copied()
    }
}

/// Domains, scalar interval and sampling parameters shared by the checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSetup {
    pub source: BoxDomain,
    pub target: BoxDomain,
    /// Scalar values u are drawn from this interval.
    pub interval: [f64; 2],
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_samples() -> usize {
    1000
}

impl CheckSetup {
    /// Domains and interval on which the built-in is known to be well
    /// behaved; used by the demos and as config defaults.
    pub fn for_builtin(gf: &GenFun<f64>) -> Self {
        let n = gf.dim();
        let sq = BoxDomain::square;
        let (source, target, interval) = match (gf.kernel(), gf.source_chart()) {
            (Some(Kernel::PointSource), _) => (sq(0.4, 2), sq(1.0, 2), [0.3, 0.8]),
            (Some(Kernel::ParallelBeam(_)), _) => (sq(0.5, 2), sq(0.5, 2), [0.5, 2.0]),
            (Some(Kernel::Minkowski), _) => (sq(0.4, 2), sq(0.4, 2), [0.5, 2.0]),
            (_, Chart::Sphere { .. }) => (sq(0.4, 2), sq(0.4, 2), [-1.0, 1.0]),
            _ => (sq(0.5, n), sq(0.5, n), [-1.0, 1.0]),
        };
        CheckSetup { source, target, interval, samples: default_samples(), seed: 0 }
    }

    pub(crate) fn u_at(&self, t: f64) -> f64 {
        self.interval[0] + (self.interval[1] - self.interval[0]) * t
    }

    /// Sampled (x, x̄, u) configurations.
    pub fn configs(&self, count: usize, stream: u64) -> Vec<(Vector<f64>, Vector<f64>, f64)> {
        let n = self.source.dim();
        Halton::new(2 * n + 1, self.seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
            .take(count)
            .map(|q| (self.source.at(&q[..n]), self.target.at(&q[n..2 * n]), self.u_at(q[2 * n])))
            .collect()
    }
}

pub(crate) fn witness_of(entries: &[(&str, Vec<f64>)]) -> Witness {
    entries.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// Which tensor a sweep evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TensorKind {
    Primal,
    Dual,
}

/// Samples the G3w (or G3*w) form at `count` (base, V, η) combinations:
/// 32 random Gram–Schmidt pairs plus the axis pairs per base point.
pub fn g3w_sweep(gf: &GenFun<f64>, setup: &CheckSetup, count: usize, kind: TensorKind) -> ConditionReport {
    let n = gf.dim();
    let axis = axis_pairs::<f64>(n);
    let per_base = 32 + axis.len();
    let bases = count.div_ceil(per_base);
    let stream = match kind {
        TensorKind::Primal => 31,
        TensorKind::Dual => 37,
    };
    let configs = setup.configs(bases, stream);
    let tol = gf.tol().g3w_negative;
    let per: Vec<(Vec<(f64, Witness)>, usize)> = configs
        .par_iter()
        .enumerate()
        .map(|(k, (x, xb, u))| {
            let mut rng = ChaCha8Rng::seed_from_u64(setup.seed.wrapping_add(k as u64).wrapping_mul(0x2545_F491_4F6C_DD1D) ^ stream);
            let mut pairs: Vec<_> = (0..32).map(|_| random_pair(n, &mut rng)).collect();
            pairs.extend(axis.iter().copied());
            let mut vals = Vec::new();
            let mut skipped = 0;
            let z = match gf.h(x, xb, *u) {
                Ok(z) => z,
                Err(_) => return (vals, per_base),
            };
            let eval: Box<dyn Fn(&Vector<f64>, &Vector<f64>) -> crate::Result<f64> + '_> = match kind {
                TensorKind::Primal => match PrimalBase::at_triple(gf, x, xb, z) {
                    Ok(b) => Box::new(move |v, e| g3w_form(gf, &b, v, e)),
                    Err(_) => return (vals, per_base),
                },
                TensorKind::Dual => match DualBase::at_triple(gf, x, xb, z) {
                    Ok(b) => Box::new(move |v, e| g3w_dual_form(gf, &b, v, e)),
                    Err(_) => return (vals, per_base),
                },
            };
            for (v, e) in &pairs {
                match eval(v, e) {
                    Ok(val) if val.is_finite() => vals.push((
                        val,
                        witness_of(&[
                            ("x", x.to_f64()),
                            ("xbar", xb.to_f64()),
                            ("u", vec![*u]),
                            ("V", v.to_f64()),
                            ("eta", e.to_f64()),
                        ]),
                    )),
                    _ => skipped += 1,
                }
            }
            (vals, skipped)
        })
        .collect();
    let skipped: usize = per.iter().map(|p| p.1).sum();
    let all: Vec<(f64, Witness)> = per.into_iter().flat_map(|p| p.0).take(count).collect();
    let (mut min, mut max_abs, mut wit) = (f64::INFINITY, 0.0f64, None);
    for (v, w) in &all {
        max_abs = max_abs.max(v.abs());
        if *v < min {
            min = *v;
            wit = Some(w.clone());
        }
    }
    let name = match kind {
        TensorKind::Primal => "G3w",
        TensorKind::Dual => "G3*w",
    };
    if all.is_empty() {
        return ConditionReport::new(name, 0, skipped, f64::NEG_INFINITY, tol).with_note("no evaluable samples");
    }
    ConditionReport::new(name, all.len(), skipped, min, tol)
        .with_constant("min", min)
        .with_constant("max_abs", max_abs)
        .with_witness(wit)
}

/// Side-by-side G3w minima and QQConv fits: the implication
/// "G3w ≥ −tol ⇒ finite M" is what gets judged.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CrossCheck {
    pub g3w_min: f64,
    pub g3w_dual_min: f64,
    pub m_primal: Option<f64>,
    pub m_dual: Option<f64>,
    /// False only when G3w holds on the samples but some fit diverged.
    pub implication_holds: bool,
    pub g3w: ConditionReport,
    pub g3w_dual: ConditionReport,
    pub qqconv: ConditionReport,
}

pub fn crosscheck_g3w_implies_qqconv(gf: &GenFun<f64>, setup: &CheckSetup, tensor_samples: usize) -> CrossCheck {
    let g3w = g3w_sweep(gf, setup, tensor_samples, TensorKind::Primal);
    let g3w_dual = g3w_sweep(gf, setup, tensor_samples, TensorKind::Dual);
    let qq = check_qqconv(gf, setup, setup.interval, setup.samples);
    let finite = |k: &str| qq.constant(k).filter(|m| m.is_finite());
    let (mp, md) = (finite("m_primal"), finite("m_dual"));
    let tol = gf.tol().g3w_negative;
    let g3w_min = g3w.constant("min").unwrap_or(f64::NEG_INFINITY);
    let g3w_dual_min = g3w_dual.constant("min").unwrap_or(f64::NEG_INFINITY);
    let holds = g3w_min < -tol || (mp.is_some() && md.is_some());
    CrossCheck { g3w_min, g3w_dual_min, m_primal: mp, m_dual: md, implication_holds: holds, g3w, g3w_dual, qqconv: qq }
}
