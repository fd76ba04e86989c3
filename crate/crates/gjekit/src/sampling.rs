//! Low-discrepancy sampling: randomly shifted Halton sequences over boxes,
//! and admissible-triple generators for the built-in generating functions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GjeError, Result};
use crate::genfun::{Chart, GenFun, Kernel};
use crate::linalg::Vector;
use crate::scalar::Real;

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Halton points in [0, 1)^d with a Cranley–Patterson rotation drawn from
/// the seed. Index 0 is skipped so the unshifted origin never appears.
#[derive(Clone, Debug)]
pub struct Halton {
    shift: Vec<f64>,
    next: u64,
}

impl Halton {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim <= PRIMES.len(), "Halton dimension {dim} exceeds {}", PRIMES.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Halton { shift: (0..dim).map(|_| rng.gen::<f64>()).collect(), next: 1 }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn point(&self, index: u64) -> Vec<f64> {
        self.shift
            .iter()
            .zip(PRIMES)
            .map(|(s, b)| {
                let v = radical_inverse(index + 1, b) + s;
                v - v.floor()
            })
            .collect()
    }
}

impl Iterator for Halton {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let p = self.point(self.next - 1);
        self.next += 1;
        Some(p)
    }
}

/// Axis-aligned box in chart coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() || lo.iter().zip(hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(GjeError::Config(format!("invalid box {lo:?} .. {hi:?}")));
        }
        Ok(BoxDomain { lo: lo.to_vec(), hi: hi.to_vec() })
    }

    pub fn square(half: f64, dim: usize) -> Self {
        BoxDomain { lo: vec![-half; dim], hi: vec![half; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center<T: Real>(&self) -> Vector<T> {
        Vector::from_fn(self.dim(), |i| T::lit(0.5 * (self.lo[i] + self.hi[i])))
    }

    pub fn diameter(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    /// Maps unit-cube coordinates into the box.
    pub fn at<T: Real>(&self, unit: &[f64]) -> Vector<T> {
        Vector::from_fn(self.dim(), |i| T::lit(self.lo[i] + (self.hi[i] - self.lo[i]) * unit[i]))
    }

    pub fn contains<T: Real>(&self, p: &Vector<T>) -> bool {
        p.len() == self.dim() && (0..self.dim()).all(|i| p[i].as_f64() >= self.lo[i] && p[i].as_f64() <= self.hi[i])
    }

    /// Distance from `p` to the complement (negative outside).
    pub fn margin<T: Real>(&self, p: &Vector<T>) -> f64 {
        (0..self.dim())
            .map(|i| (p[i].as_f64() - self.lo[i]).min(self.hi[i] - p[i].as_f64()))
            .fold(f64::INFINITY, f64::min)
    }
}

/// An admissible triple in oriented coordinates.
#[derive(Clone, Copy, Debug)]
pub struct Triple<T> {
    pub x: Vector<T>,
    pub xb: Vector<T>,
    pub z: T,
}

/// Default sampling boxes for a built-in: chart boxes that stay well inside
/// the admissible set.
pub fn default_boxes<T: Real>(gf: &GenFun<T>) -> (BoxDomain, BoxDomain) {
    let n = gf.dim();
    match (gf.source_chart(), gf.kernel()) {
        (Chart::Sphere { .. }, Some(Kernel::PointSource)) => (BoxDomain::square(0.5, 2), BoxDomain::square(1.0, 2)),
        (Chart::Sphere { .. }, _) => (BoxDomain::square(0.4, 2), BoxDomain::square(0.4, 2)),
        _ => (BoxDomain::square(1.0, n), BoxDomain::square(1.0, n)),
    }
}

/// `count` admissible triples from a shifted Halton stream over
/// source box × target box × a scalar interval adapted to the built-in.
/// Candidates outside 𝔤 or with G outside (u̲, ū) are skipped.
pub fn sample_triples<T: Real>(
    gf: &GenFun<T>,
    source: &BoxDomain,
    target: &BoxDomain,
    count: usize,
    seed: u64,
) -> Vec<Triple<T>> {
    let n = gf.dim();
    let mut h = Halton::new(2 * n + 1, seed);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0usize;
    while out.len() < count && tries < 50 * count + 100 {
        tries += 1;
        let q = h.next().unwrap_or_default();
        let x = source.at::<T>(&q[..n]);
        let xb = target.at::<T>(&q[n..2 * n]);
        let s = q[2 * n];
        let z = match gf.kernel() {
            Some(Kernel::PointSource) => {
                let r = gf.target_chart().embed(&xb).norm().as_f64();
                T::lit((0.05 + 0.9 * s) * 2.0 / r)
            }
            // u > 0 on the whole source box, where x ↦ p is injective:
            // z·max|x − x̄| < 1.
            Some(Kernel::ParallelBeam(_)) => {
                let far = (0..n)
                    .map(|i| {
                        let c = xb[i].as_f64();
                        (c - source.lo[i]).abs().max((source.hi[i] - c).abs()).powi(2)
                    })
                    .sum::<f64>()
                    .sqrt();
                T::lit((0.05 + 0.9 * s) * (1.0 / far.max(1e-3)).min(3.0))
            }
            Some(Kernel::Minkowski) => T::lit(0.25 + 2.75 * s),
            _ => T::lit(-2.0 + 4.0 * s),
        };
        let z = gf.from_physical(z);
        if gf.admissible(&x, &xb, z) && gf.range().contains(gf.value_unchecked(&x, &xb, z)) {
            out.push(Triple { x, xb, z });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genfun::{make_builtin, GenFunSpec};

    #[test]
    fn halton_is_deterministic_and_in_range() {
        let a: Vec<_> = Halton::new(3, 7).take(100).collect();
        let b: Vec<_> = Halton::new(3, 7).take(100).collect();
        assert_eq!(a, b);
        assert!(a.iter().flatten().all(|v| (0.0..1.0).contains(v)));
        assert_ne!(a, Halton::new(3, 8).take(100).collect::<Vec<_>>());
    }

    #[test]
    fn halton_is_evenly_spread() {
        let n = 4096;
        let inside = Halton::new(2, 1).take(n).filter(|p| p[0] < 0.5 && p[1] < 0.5).count();
        assert!((inside as f64 / n as f64 - 0.25).abs() < 0.01);
    }

    #[test]
    fn triples_are_admissible() {
        for spec in [GenFunSpec::quadratic(), GenFunSpec::point_source(-3.0), GenFunSpec::minkowski()] {
            let gf = make_builtin::<f64>(&spec).unwrap();
            let (s, t) = default_boxes(&gf);
            let ts = sample_triples(&gf, &s, &t, 200, 3);
            assert_eq!(ts.len(), 200);
            assert!(ts.iter().all(|t| gf.admissible(&t.x, &t.xb, t.z)));
        }
    }
}
