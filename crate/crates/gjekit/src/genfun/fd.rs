//! Finite-difference derivatives of G: the fallback engine for user-supplied
//! generating functions and the oracle against which analytic derivatives
//! of the built-ins are checked.
//!
//! Central differences with one Richardson level. First derivatives use
//! h = ∛ε·max(1, |c|); second derivatives use h = ε^¼·max(1, |c|), which
//! balances round-off (ε/h²) against the Richardson-reduced truncation error.

use super::{Derivs, GenFun, SourcePoint, TargetPoint};
use crate::error::Result;
use crate::linalg::{Matrix, Vector};
use crate::scalar::Real;

/// Which derivative of G to difference.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivId {
    G,
    Dx,
    Dxb,
    Gz,
    Gzz,
    DxDxb,
    DxGz,
    DxbGz,
    Dxx,
    DxbDxb,
}

#[derive(Clone, Copy, Debug)]
pub enum Tensor<T> {
    Scalar(T),
    Vector(Vector<T>),
    Matrix(Matrix<T>),
}

impl<T: Real> Tensor<T> {
    pub fn as_scalar(&self) -> Option<T> {
        match self {
            Tensor::Scalar(s) => Some(*s),
            _ => None,
        }
    }

    pub fn as_vector(&self) -> Option<Vector<T>> {
        match self {
            Tensor::Vector(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_matrix(&self) -> Option<Matrix<T>> {
        match self {
            Tensor::Matrix(m) => Some(*m),
            _ => None,
        }
    }

    /// Entries in row-major order.
    pub fn entries(&self) -> Vec<T> {
        match self {
            Tensor::Scalar(s) => vec![*s],
            Tensor::Vector(v) => v.as_slice().to_vec(),
            Tensor::Matrix(m) => (0..m.rows()).flat_map(|i| (0..m.cols()).map(move |j| m[(i, j)])).collect(),
        }
    }
}

pub(crate) fn step1<T: Real>(c: T) -> T {
    T::epsilon().cbrt() * T::one().max(c.abs())
}

pub(crate) fn step2<T: Real>(c: T) -> T {
    T::epsilon().sqrt().sqrt() * T::one().max(c.abs())
}

/// f′(c) by central differences and one Richardson level.
pub fn d1<T: Real>(f: impl Fn(T) -> Result<T>, c: T) -> Result<T> {
    d1_with(f, c, step1(c))
}

pub fn d1_with<T: Real>(f: impl Fn(T) -> Result<T>, c: T, h: T) -> Result<T> {
    let central = |h: T| -> Result<T> {
        let (p, m) = (c + h, c - h);
        Ok((f(p)? - f(m)?) / (p - m))
    };
    let (a, b) = (central(h)?, central(h * T::lit(0.5))?);
    Ok((T::lit(4.0) * b - a) / T::lit(3.0))
}

/// f″(c) by the three-point stencil and one Richardson level.
pub fn d2<T: Real>(f: impl Fn(T) -> Result<T>, c: T) -> Result<T> {
    let f0 = f(c)?;
    let h = step2(c);
    let central = |h: T| -> Result<T> {
        let h = (c + h) - c;
        Ok((f(c + h)? - f0 - f0 + f(c - h)?) / (h * h))
    };
    let (a, b) = (central(h)?, central(h * T::lit(0.5))?);
    Ok((T::lit(4.0) * b - a) / T::lit(3.0))
}

struct Stencil<'a, T: Real> {
    gf: &'a GenFun<T>,
    n: usize,
    w: [T; 7],
}

impl<'a, T: Real> Stencil<'a, T> {
    fn new(gf: &'a GenFun<T>, x: &SourcePoint<T>, xb: &TargetPoint<T>, z: T) -> Self {
        let n = gf.dim();
        let mut w = [T::zero(); 7];
        w[..n].copy_from_slice(x.as_slice());
        w[n..2 * n].copy_from_slice(xb.as_slice());
        w[2 * n] = z;
        Stencil { gf, n, w }
    }

    fn eval(&self, w: &[T; 7]) -> Result<T> {
        let n = self.n;
        self.gf.value(&Vector::from_slice(&w[..n]), &Vector::from_slice(&w[n..2 * n]), w[2 * n])
    }

    fn at(&self, moves: &[(usize, T)]) -> Result<T> {
        let mut w = self.w;
        for &(k, h) in moves {
            w[k] += h;
        }
        self.eval(&w)
    }

    fn first(&self, k: usize) -> Result<T> {
        let c = self.w[k];
        d1(|t| self.at(&[(k, t - c)]), c)
    }

    fn second(&self, i: usize, j: usize, f0: T) -> Result<T> {
        if i == j {
            let c = self.w[i];
            let central = |h: T| -> Result<T> {
                let h = (c + h) - c;
                Ok((self.at(&[(i, h)])? - f0 - f0 + self.at(&[(i, -h)])?) / (h * h))
            };
            let h = step2(c);
            let (a, b) = (central(h)?, central(h * T::lit(0.5))?);
            return Ok((T::lit(4.0) * b - a) / T::lit(3.0));
        }
        let (ci, cj) = (self.w[i], self.w[j]);
        let mixed = |hi: T, hj: T| -> Result<T> {
            let hi = (ci + hi) - ci;
            let hj = (cj + hj) - cj;
            let pp = self.at(&[(i, hi), (j, hj)])?;
            let pm = self.at(&[(i, hi), (j, -hj)])?;
            let mp = self.at(&[(i, -hi), (j, hj)])?;
            let mm = self.at(&[(i, -hi), (j, -hj)])?;
            Ok(((pp - pm) - (mp - mm)) / (T::lit(4.0) * hi * hj))
        };
        let (hi, hj) = (step2(ci), step2(cj));
        let half = T::lit(0.5);
        let (a, b) = (mixed(hi, hj)?, mixed(hi * half, hj * half)?);
        Ok((T::lit(4.0) * b - a) / T::lit(3.0))
    }
}

/// One derivative of G at an admissible triple (oriented scalar).
pub fn finite_diff_derivatives<T: Real>(
    gf: &GenFun<T>,
    which: DerivId,
    x: &SourcePoint<T>,
    xb: &TargetPoint<T>,
    z: T,
) -> Result<Tensor<T>> {
    let s = Stencil::new(gf, x, xb, z);
    let n = s.n;
    let zi = 2 * n;
    let f0 = s.eval(&s.w)?;
    let vec_of = |off: usize| -> Result<Vector<T>> {
        let mut v = Vector::zeros(n);
        for i in 0..n {
            v[i] = s.first(off + i)?;
        }
        Ok(v)
    };
    let mat_of = |ro: usize, co: usize| -> Result<Matrix<T>> {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = if ro == co && j < i { m[(j, i)] } else { s.second(ro + i, co + j, f0)? };
            }
        }
        Ok(m)
    };
    let z_col = |off: usize| -> Result<Vector<T>> {
        let mut v = Vector::zeros(n);
        for i in 0..n {
            v[i] = s.second(off + i, zi, f0)?;
        }
        Ok(v)
    };
    Ok(match which {
        DerivId::G => Tensor::Scalar(f0),
        DerivId::Dx => Tensor::Vector(vec_of(0)?),
        DerivId::Dxb => Tensor::Vector(vec_of(n)?),
        DerivId::Gz => Tensor::Scalar(s.first(zi)?),
        DerivId::Gzz => Tensor::Scalar(s.second(zi, zi, f0)?),
        DerivId::DxDxb => Tensor::Matrix(mat_of(0, n)?),
        DerivId::DxGz => Tensor::Vector(z_col(0)?),
        DerivId::DxbGz => Tensor::Vector(z_col(n)?),
        DerivId::Dxx => Tensor::Matrix(mat_of(0, 0)?),
        DerivId::DxbDxb => Tensor::Matrix(mat_of(n, n)?),
    })
}

pub(crate) fn all_derivs<T: Real>(gf: &GenFun<T>, x: &SourcePoint<T>, xb: &TargetPoint<T>, z: T) -> Result<Derivs<T>> {
    let get = |id| finite_diff_derivatives(gf, id, x, xb, z);
    let sc = |t: Tensor<T>| t.as_scalar().unwrap_or_else(T::nan);
    let ve = |t: Tensor<T>| t.as_vector().unwrap_or_else(|| Vector::zeros(0));
    let ma = |t: Tensor<T>| t.as_matrix().unwrap_or_else(|| Matrix::zeros(0, 0));
    Ok(Derivs {
        g: sc(get(DerivId::G)?),
        dx: ve(get(DerivId::Dx)?),
        dxb: ve(get(DerivId::Dxb)?),
        gz: sc(get(DerivId::Gz)?),
        gzz: sc(get(DerivId::Gzz)?),
        dxdxb: ma(get(DerivId::DxDxb)?),
        dxgz: ve(get(DerivId::DxGz)?),
        dxbgz: ve(get(DerivId::DxbGz)?),
        dxx: ma(get(DerivId::Dxx)?),
        dxbxb: ma(get(DerivId::DxbDxb)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genfun::{make_builtin, GenFunSpec};

    #[test]
    fn quadratic_mixed_block_is_identity() {
        let gf = make_builtin::<f64>(&GenFunSpec::quadratic()).unwrap();
        let x = Vector::from_slice(&[0.3, -0.2]);
        let xb = Vector::from_slice(&[1.1, 0.4]);
        let m = finite_diff_derivatives(&gf, DerivId::DxDxb, &x, &xb, 0.7).unwrap().as_matrix().unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((m[(i, j)] - want).abs() < 1e-7, "{m:?}");
            }
        }
        let gzz = finite_diff_derivatives(&gf, DerivId::Gzz, &x, &xb, 0.7).unwrap().as_scalar().unwrap();
        assert!(gzz.abs() < 1e-7);
    }

    #[test]
    fn parallel_beam_gz_by_hand() {
        let gf = make_builtin::<f64>(&GenFunSpec::parallel_beam()).unwrap();
        let x = Vector::from_slice(&[0.0, 0.0]);
        let xb = Vector::from_slice(&[1.0, 0.0]);
        let gz = finite_diff_derivatives(&gf, DerivId::Gz, &x, &xb, 2.0).unwrap().as_scalar().unwrap();
        assert!((gz + 0.625).abs() < 1e-9);
    }

    #[test]
    fn stencil_leaving_the_domain_is_an_error() {
        let gf = make_builtin::<f64>(&GenFunSpec::parallel_beam()).unwrap();
        let x = Vector::from_slice(&[0.0, 0.0]);
        assert!(finite_diff_derivatives(&gf, DerivId::Gz, &x, &x, 1e-9).is_err());
    }

    #[test]
    fn scalar_helpers() {
        let d = d1(|t: f64| Ok(t.sin()), 0.4).unwrap();
        assert!((d - 0.4f64.cos()).abs() < 1e-10);
        let dd = d2(|t: f64| Ok(t.exp()), 0.3).unwrap();
        assert!((dd - 0.3f64.exp()).abs() < 1e-7);
    }
}
