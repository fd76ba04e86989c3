//! Ambient formulas of the built-in generating functions.
//!
//! A kernel is a scalar function g(X, Y, z) of the embedded source point X,
//! the embedded target point Y and the physical scalar parameter z. Its
//! full second-order jet in w = (X, Y, z) is what the chart layer composes
//! into chart-coordinate derivatives.

use crate::linalg::Vector;
use crate::scalar::Real;

use super::bicubic::Bicubic;

pub const JET_MAX: usize = 7;

/// Value, gradient and Hessian in w = (X, Y, z).
#[derive(Clone, Copy, Debug)]
pub struct Jet<T> {
    pub na: usize,
    pub nb: usize,
    pub v: T,
    pub g: [T; JET_MAX],
    pub h: [[T; JET_MAX]; JET_MAX],
}

impl<T: Real> Jet<T> {
    pub fn zero(na: usize, nb: usize) -> Self {
        assert!(na + nb < JET_MAX);
        Jet { na, nb, v: T::zero(), g: [T::zero(); JET_MAX], h: [[T::zero(); JET_MAX]; JET_MAX] }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.na + self.nb + 1
    }

    #[inline]
    pub fn zi(&self) -> usize {
        self.na + self.nb
    }

    fn set_h(&mut self, i: usize, j: usize, v: T) {
        self.h[i][j] = v;
        self.h[j][i] = v;
    }

    /// Jet of `self / d`.
    pub fn quotient(&self, d: &Jet<T>) -> Jet<T> {
        let n = self.len();
        let mut q = Jet::zero(self.na, self.nb);
        let (nv, dv) = (self.v, d.v);
        q.v = nv / dv;
        for a in 0..n {
            q.g[a] = self.g[a] / dv - nv * d.g[a] / (dv * dv);
        }
        let d2 = dv * dv;
        let d3 = d2 * dv;
        for a in 0..n {
            for b in a..n {
                let v = self.h[a][b] / dv - (self.g[a] * d.g[b] + self.g[b] * d.g[a]) / d2 - nv * d.h[a][b] / d2
                    + T::lit(2.0) * nv * d.g[a] * d.g[b] / d3;
                q.set_h(a, b, v);
            }
        }
        q
    }

    pub fn is_finite(&self) -> bool {
        let n = self.len();
        self.v.is_finite()
            && self.g[..n].iter().all(|x| x.is_finite())
            && self.h[..n].iter().all(|r| r[..n].iter().all(|x| x.is_finite()))
    }
}

/// Costs c(X, Y) of the quasilinear family G = −c − z.
#[derive(Clone, Debug, PartialEq)]
pub enum Cost<T> {
    /// c = −⟨X, Y⟩.
    NegInner,
    Zero,
    /// c = |X − Y|²/2.
    HalfSqDist,
    /// c = −log(1 − ⟨X, Y⟩) on the sphere.
    FarFieldLog,
    /// c = −⟨X, Y⟩ − ε⟨X, Y⟩³.
    Cubic(T),
    /// c = −⟨X, φ(Y)⟩ with φ(Y) = (Y₁², Y₂, …): a folded target chart.
    Folded,
}

/// Height function Φ of the parallel-beam target.
#[derive(Clone, Debug, PartialEq)]
pub enum Phi<T> {
    Zero,
    Tabulated(Bicubic<T>),
}

impl<T: Real> Phi<T> {
    pub fn is_flat(&self) -> bool {
        matches!(self, Phi::Zero)
    }

    fn value(&self, y: &Vector<T>) -> T {
        match self {
            Phi::Zero => T::zero(),
            Phi::Tabulated(b) => b.eval(y).0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Kernel<T> {
    Quasilinear(Cost<T>),
    /// g = z(1 − z⟨X,Y⟩/2)/(1 − z²|Y|²/4), the reciprocal of the ellipsoid
    /// polar radius with foci 0 and Y and major semi-axis 1/z.
    PointSource,
    /// g = ½(1/z − z|X − Y|²) + Φ(Y).
    ParallelBeam(Phi<T>),
    /// g = z⟨X, Y⟩.
    Minkowski,
}

impl<T: Real> Kernel<T> {
    /// Whether (X, Y, z) belongs to the admissible set, z physical.
    pub fn admissible(&self, x: &Vector<T>, y: &Vector<T>, z: T) -> bool {
        if !z.is_finite() {
            return false;
        }
        match self {
            Kernel::Quasilinear(Cost::FarFieldLog) => x.dot(y) < T::one(),
            Kernel::Quasilinear(_) => true,
            Kernel::PointSource => z > T::zero() && T::lit(0.5) * z * y.norm() < T::one(),
            Kernel::ParallelBeam(_) => z > T::zero(),
            Kernel::Minkowski => z > T::zero() && x.dot(y) > T::zero(),
        }
    }

    pub fn value(&self, x: &Vector<T>, y: &Vector<T>, z: T) -> T {
        match self {
            Kernel::Quasilinear(c) => -cost_value(c, x, y) - z,
            Kernel::PointSource => {
                let t = x.dot(y);
                let b = y.norm_sq();
                z * (T::one() - T::lit(0.5) * z * t) / (T::one() - T::lit(0.25) * z * z * b)
            }
            Kernel::ParallelBeam(phi) => {
                let d2 = (*x - *y).norm_sq();
                T::lit(0.5) * (T::one() / z - z * d2) + phi.value(y)
            }
            Kernel::Minkowski => z * x.dot(y),
        }
    }

    /// Closed-form inverse in z of g(X, Y, ·) = u, when it exists.
    pub fn inverse(&self, x: &Vector<T>, y: &Vector<T>, u: T) -> Option<T> {
        let z = match self {
            Kernel::Quasilinear(c) => -cost_value(c, x, y) - u,
            Kernel::PointSource => {
                // z²(u|Y|²/4 − ⟨X,Y⟩/2) + z − u = 0, root continuous at a = 0.
                let a = T::lit(0.25) * u * y.norm_sq() - T::lit(0.5) * x.dot(y);
                let disc = T::one() + T::lit(4.0) * a * u;
                if disc < T::zero() {
                    return None;
                }
                T::lit(2.0) * u / (T::one() + disc.sqrt())
            }
            Kernel::ParallelBeam(phi) => {
                // d²z² + 2wz − 1 = 0 with w = u − Φ, positive root.
                let w = u - phi.value(y);
                let d2 = (*x - *y).norm_sq();
                let den = w + (w * w + d2).sqrt();
                if den <= T::zero() {
                    return None;
                }
                T::one() / den
            }
            Kernel::Minkowski => u / x.dot(y),
        };
        z.is_finite().then_some(z)
    }

    pub fn jet(&self, x: &Vector<T>, y: &Vector<T>, z: T) -> Jet<T> {
        let (na, nb) = (x.len(), y.len());
        match self {
            Kernel::Quasilinear(c) => {
                let mut j = cost_jet(c, x, y);
                // g = −c − z
                j.v = -j.v - z;
                for a in 0..na + nb {
                    j.g[a] = -j.g[a];
                    for b in 0..na + nb {
                        j.h[a][b] = -j.h[a][b];
                    }
                }
                j.g[na + nb] = -T::one();
                j
            }
            Kernel::PointSource => {
                let t = x.dot(y);
                let b = y.norm_sq();
                let zi = na + nb;
                let half = T::lit(0.5);
                let mut num = Jet::zero(na, nb);
                num.v = z - half * z * z * t;
                for i in 0..na {
                    num.g[i] = -half * z * z * y[i];
                    num.set_h(i, na + i, -half * z * z);
                    num.set_h(i, zi, -z * y[i]);
                }
                for k in 0..nb {
                    num.g[na + k] = -half * z * z * x[k];
                    num.set_h(na + k, zi, -z * x[k]);
                }
                num.g[zi] = T::one() - z * t;
                num.h[zi][zi] = -t;
                let mut den = Jet::zero(na, nb);
                den.v = T::one() - T::lit(0.25) * z * z * b;
                for k in 0..nb {
                    den.g[na + k] = -half * z * z * y[k];
                    den.set_h(na + k, na + k, -half * z * z);
                    den.set_h(na + k, zi, -z * y[k]);
                }
                den.g[zi] = -half * z * b;
                den.h[zi][zi] = -half * b;
                num.quotient(&den)
            }
            Kernel::ParallelBeam(phi) => {
                let zi = na + nb;
                let d = *x - *y;
                let half = T::lit(0.5);
                let mut j = Jet::zero(na, nb);
                j.v = half * (T::one() / z - z * d.norm_sq());
                for i in 0..na {
                    j.g[i] = -z * d[i];
                    j.g[na + i] = z * d[i];
                    j.set_h(i, i, -z);
                    j.set_h(na + i, na + i, -z);
                    j.set_h(i, na + i, z);
                    j.set_h(i, zi, -d[i]);
                    j.set_h(na + i, zi, d[i]);
                }
                j.g[zi] = -half * (T::one() / (z * z) + d.norm_sq());
                j.h[zi][zi] = T::one() / (z * z * z);
                if let Phi::Tabulated(b) = phi {
                    let (pv, pg, ph) = b.eval(y);
                    j.v += pv;
                    for k in 0..nb {
                        j.g[na + k] += pg[k];
                        for l in 0..nb {
                            j.h[na + k][na + l] += ph[(k, l)];
                        }
                    }
                }
                j
            }
            Kernel::Minkowski => {
                let zi = na + nb;
                let mut j = Jet::zero(na, nb);
                j.v = z * x.dot(y);
                for i in 0..na {
                    j.g[i] = z * y[i];
                    j.g[na + i] = z * x[i];
                    j.set_h(i, na + i, z);
                    j.set_h(i, zi, y[i]);
                    j.set_h(na + i, zi, x[i]);
                }
                j.g[zi] = x.dot(y);
                j
            }
        }
    }
}

fn folded<T: Real>(y: &Vector<T>) -> Vector<T> {
    let mut f = *y;
    f[0] = y[0] * y[0];
    f
}

pub(crate) fn cost_value<T: Real>(c: &Cost<T>, x: &Vector<T>, y: &Vector<T>) -> T {
    match c {
        Cost::NegInner => -x.dot(y),
        Cost::Zero => T::zero(),
        Cost::HalfSqDist => T::lit(0.5) * (*x - *y).norm_sq(),
        Cost::FarFieldLog => -(T::one() - x.dot(y)).ln(),
        Cost::Cubic(eps) => {
            let t = x.dot(y);
            -t - *eps * t * t * t
        }
        Cost::Folded => -x.dot(&folded(y)),
    }
}

/// Jet of the cost itself (the z-slot is left zero).
fn cost_jet<T: Real>(c: &Cost<T>, x: &Vector<T>, y: &Vector<T>) -> Jet<T> {
    let (na, nb) = (x.len(), y.len());
    let mut j = Jet::zero(na, nb);
    j.v = cost_value(c, x, y);
    match c {
        Cost::Zero => {}
        Cost::NegInner => {
            for i in 0..na {
                j.g[i] = -y[i];
                j.g[na + i] = -x[i];
                j.set_h(i, na + i, -T::one());
            }
        }
        Cost::HalfSqDist => {
            for i in 0..na {
                let d = x[i] - y[i];
                j.g[i] = d;
                j.g[na + i] = -d;
                j.set_h(i, i, T::one());
                j.set_h(na + i, na + i, T::one());
                j.set_h(i, na + i, -T::one());
            }
        }
        Cost::FarFieldLog => {
            // c = −log(1 − t): c_t = 1/(1−t), c_tt = 1/(1−t)².
            let s = T::one() - x.dot(y);
            let (ct, ctt) = (T::one() / s, T::one() / (s * s));
            fill_inner_jet(&mut j, x, y, ct, ctt);
        }
        Cost::Cubic(eps) => {
            // c = −t − εt³
            let t = x.dot(y);
            let ct = -T::one() - T::lit(3.0) * *eps * t * t;
            let ctt = -T::lit(6.0) * *eps * t;
            fill_inner_jet(&mut j, x, y, ct, ctt);
        }
        Cost::Folded => {
            let f = folded(y);
            for i in 0..na {
                j.g[i] = -f[i];
            }
            j.g[na] = -T::lit(2.0) * y[0] * x[0];
            for k in 1..nb {
                j.g[na + k] = -x[k];
            }
            j.set_h(0, na, -T::lit(2.0) * y[0]);
            for k in 1..nb.min(na) {
                j.set_h(k, na + k, -T::one());
            }
            j.set_h(na, na, -T::lit(2.0) * x[0]);
        }
    }
    j
}

/// Jet of c(X, Y) = ψ(⟨X, Y⟩) given ψ′ and ψ″ at t = ⟨X, Y⟩.
fn fill_inner_jet<T: Real>(j: &mut Jet<T>, x: &Vector<T>, y: &Vector<T>, ct: T, ctt: T) {
    let na = x.len();
    for i in 0..na {
        j.g[i] = ct * y[i];
        j.g[na + i] = ct * x[i];
    }
    for i in 0..na {
        for k in 0..na {
            j.h[i][k] = ctt * y[i] * y[k];
            j.h[na + i][na + k] = ctt * x[i] * x[k];
            let d = if i == k { ct } else { T::zero() };
            j.h[i][na + k] = ctt * y[i] * x[k] + d;
            j.h[na + k][i] = j.h[i][na + k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_jet(k: &Kernel<f64>, x: &[f64], y: &[f64], z: f64) {
        let xv = Vector::from_slice(x);
        let yv = Vector::from_slice(y);
        let jet = k.jet(&xv, &yv, z);
        let (na, nb) = (x.len(), y.len());
        let n = na + nb + 1;
        let f = |w: &[f64]| k.value(&Vector::from_slice(&w[..na]), &Vector::from_slice(&w[na..na + nb]), w[n - 1]);
        let mut w0: Vec<f64> = x.iter().chain(y).copied().collect();
        w0.push(z);
        assert!((f(&w0) - jet.v).abs() < 1e-14);
        let h = 1e-5;
        for a in 0..n {
            let mut wp = w0.clone();
            let mut wm = w0.clone();
            wp[a] += h;
            wm[a] -= h;
            let d = (f(&wp) - f(&wm)) / (2.0 * h);
            assert!((d - jet.g[a]).abs() < 1e-7 * (1.0 + d.abs()), "grad {a}: {d} vs {}", jet.g[a]);
            for b in 0..n {
                let mut s = [0.0; 4];
                for (idx, (sa, sb)) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)].iter().enumerate() {
                    let mut w = w0.clone();
                    w[a] += sa * 1e-4;
                    w[b] += sb * 1e-4;
                    s[idx] = f(&w);
                }
                let d2 = (s[0] - s[1] - s[2] + s[3]) / 4e-8;
                assert!((d2 - jet.h[a][b]).abs() < 1e-5 * (1.0 + d2.abs()), "hess {a}{b}: {d2} vs {}", jet.h[a][b]);
            }
        }
    }

    #[test]
    fn point_source_jet_matches_differences() {
        check_jet(&Kernel::PointSource, &[0.1, -0.2, 0.9746794344808963], &[0.3, 0.5, -2.0], 0.6);
    }

    #[test]
    fn parallel_beam_jet_matches_differences() {
        check_jet(&Kernel::ParallelBeam(Phi::Zero), &[0.1, -0.2], &[0.3, 0.5], 1.7);
    }

    #[test]
    fn minkowski_jet_matches_differences() {
        check_jet(&Kernel::Minkowski, &[0.6, 0.0, 0.8], &[0.0, 0.6, 0.8], 1.3);
    }

    #[test]
    fn cost_jets_match_differences() {
        for c in [Cost::NegInner, Cost::HalfSqDist, Cost::Cubic(3.0), Cost::Folded] {
            check_jet(&Kernel::Quasilinear(c), &[0.4, -0.3], &[0.2, 0.7], 0.1);
        }
        check_jet(&Kernel::Quasilinear(Cost::FarFieldLog), &[0.6, 0.0, 0.8], &[0.0, 0.6, -0.8], 0.0);
    }

    #[test]
    fn closed_form_inverses() {
        let x = Vector::from_slice(&[0.0, 0.0, 1.0]);
        let y = Vector::from_slice(&[0.0, 0.0, 1.0]);
        let k = Kernel::<f64>::PointSource;
        assert!((k.value(&x, &y, 1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((k.inverse(&x, &y, 2.0 / 3.0).unwrap() - 1.0).abs() < 1e-15);
        let pb = Kernel::<f64>::ParallelBeam(Phi::Zero);
        let a = Vector::from_slice(&[0.0, 0.0]);
        let b = Vector::from_slice(&[1.0, 0.0]);
        assert!((pb.inverse(&a, &b, 0.0).unwrap() - 1.0).abs() < 1e-15);
    }
}
