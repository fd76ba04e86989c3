//! A_ij = G_{xⁱxʲ} along the exponential maps, its dual A*, and the
//! sampled G3w / G3*w quadratic forms.

use crate::error::{GjeError, Result};
use crate::expmaps::{exp_source, exp_target};
use crate::genfun::{Derivs, GenFun, SourcePoint, TargetPoint};
use crate::linalg::{Matrix, Vector};
use crate::scalar::Real;

/// Base point of a primal tensor sample. `guess` warm-starts the (X̄, Z)
/// Newton solves; supplying the true focus makes every solve a few steps.
#[derive(Clone, Copy, Debug)]
pub struct PrimalBase<T> {
    pub x: SourcePoint<T>,
    pub pbar: Vector<T>,
    pub u: T,
    pub guess: Option<(TargetPoint<T>, T)>,
}

impl<T: Real> PrimalBase<T> {
    /// The base sitting over an admissible triple.
    pub fn at_triple(gf: &GenFun<T>, x: &SourcePoint<T>, xb: &TargetPoint<T>, z: T) -> Result<Self> {
        let d = gf.derivs(x, xb, z)?;
        Ok(PrimalBase { x: *x, pbar: d.dx, u: d.g, guess: Some((*xb, z)) })
    }
}

/// Base point of a dual tensor sample.
#[derive(Clone, Copy, Debug)]
pub struct DualBase<T> {
    pub p: Vector<T>,
    pub xb: TargetPoint<T>,
    pub z: T,
    pub guess: Option<SourcePoint<T>>,
}

impl<T: Real> DualBase<T> {
    pub fn at_triple(gf: &GenFun<T>, x: &SourcePoint<T>, xb: &TargetPoint<T>, z: T) -> Result<Self> {
        let d = gf.derivs(x, xb, z)?;
        Ok(DualBase { p: d.dxb.scale(-T::one() / d.gz), xb: *xb, z, guess: Some(*x) })
    }
}

/// A(x, p̄, u) = Dₓ²G(x, X̄(x, u, p̄), Z(x, p̄, u)).
pub fn a_matrix<T: Real>(
    gf: &GenFun<T>,
    x: &SourcePoint<T>,
    pbar: &Vector<T>,
    u: T,
    guess: Option<(&TargetPoint<T>, T)>,
) -> Result<Matrix<T>> {
    let (xb, z) = exp_target(gf, x, u, pbar, guess)?;
    Ok(gf.derivs(x, &xb, z)?.dxx.symmetrized())
}

/// A*_kl = H_{x̄ᵏx̄ˡ} at fixed (x, u), from the derivatives of G at
/// (x, x̄, z = H): −[∂_k(G_l/G_z) + ∂_z(G_l/G_z)·p_k] with p = −D̄G/G_z.
pub fn a_star_from_derivs<T: Real>(d: &Derivs<T>) -> Matrix<T> {
    let n = d.dxb.len();
    let gz2 = d.gz * d.gz;
    let p = d.dxb.scale(-T::one() / d.gz);
    let m = Matrix::from_fn(n, n, |k, l| {
        let dk = (d.dxbxb[(l, k)] * d.gz - d.dxb[l] * d.dxbgz[k]) / gz2;
        let dz = (d.dxbgz[l] * d.gz - d.dxb[l] * d.gzz) / gz2;
        -(dk + dz * p[k])
    });
    m.symmetrized()
}

/// A*(p, x̄, z) evaluated at x = X(x̄, z, p).
pub fn a_star_matrix<T: Real>(
    gf: &GenFun<T>,
    p: &Vector<T>,
    xb: &TargetPoint<T>,
    z: T,
    guess: Option<&SourcePoint<T>>,
) -> Result<Matrix<T>> {
    let x = exp_source(gf, xb, z, p, guess)?;
    Ok(a_star_from_derivs(&gf.derivs(&x, xb, z)?))
}

fn check_orthogonal<T: Real>(v: &Vector<T>, eta: &Vector<T>) -> Result<()> {
    let tol = T::lit(1e-10).max(T::lit(16.0) * T::epsilon()) * v.norm() * eta.norm();
    if v.dot(eta).abs() > tol || eta.norm() == T::zero() {
        return Err(GjeError::Config(format!("directions must be orthogonal and η ≠ 0: V = {v:?}, η = {eta:?}")));
    }
    Ok(())
}

/// Second derivative at 0 of s ↦ f(s η) by the five-point stencil
/// {0, ±h, ±h/2} with one Richardson level. The step along η is
/// `step / |η|`, so stencil nodes are independent of |η| and the result is
/// exactly homogeneous of degree 2 in η.
fn second_along<T: Real>(step: T, eta: &Vector<T>, f: impl Fn(T) -> Result<T>) -> Result<T> {
    let h = step / eta.norm();
    let f0 = f(T::zero())?;
    let d2 = |h: T| -> Result<T> { Ok(((f(h)? + f(-h)?) - (f0 + f0)) / (h * h)) };
    let (a, b) = (d2(h)?, d2(h * T::lit(0.5))?);
    Ok((T::lit(4.0) * b - a) / T::lit(3.0))
}

fn stencil_error(e: GjeError) -> GjeError {
    match e {
        GjeError::Domain(m) | GjeError::Convergence(m) | GjeError::Range(m) => {
            GjeError::Domain(format!("tensor stencil leaves the image set: {m}"))
        }
        other => other,
    }
}

/// D²_{p̄ₖp̄ₗ}A_ij VⁱVʲηₖηₗ at `base`, by a second difference of
/// s ↦ ⟨A(x, p̄ + sη, u)V, V⟩.
pub fn g3w_form<T: Real>(gf: &GenFun<T>, base: &PrimalBase<T>, v: &Vector<T>, eta: &Vector<T>) -> Result<T> {
    check_orthogonal(v, eta)?;
    let step = T::lit(gf.tol().tensor_step);
    let guess = base.guess;
    second_along(step, eta, |s| {
        let a = a_matrix(gf, &base.x, &base.pbar.axpy(s, eta), base.u, guess.as_ref().map(|(b, z)| (b, *z)))
            .map_err(stencil_error)?;
        Ok(a.bilinear(v, v))
    })
}

/// The dual form D²_{pₖpₗ}A*_ij V̄ⁱV̄ʲη̄ₖη̄ₗ at `base`.
pub fn g3w_dual_form<T: Real>(gf: &GenFun<T>, base: &DualBase<T>, v: &Vector<T>, eta: &Vector<T>) -> Result<T> {
    check_orthogonal(v, eta)?;
    let step = T::lit(gf.tol().tensor_step);
    second_along(step, eta, |s| {
        let a = a_star_matrix(gf, &base.p.axpy(s, eta), &base.xb, base.z, base.guess.as_ref()).map_err(stencil_error)?;
        Ok(a.bilinear(v, v))
    })
}

/// The 2n(n−1) axis-aligned orthogonal pairs: (eᵢ, eⱼ) and (eᵢ + eⱼ, eᵢ − eⱼ)
/// for ordered i ≠ j.
pub fn axis_pairs<T: Real>(n: usize) -> Vec<(Vector<T>, Vector<T>)> {
    let mut out = Vec::with_capacity(2 * n * (n - 1));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let (ei, ej) = (Vector::unit(n, i), Vector::unit(n, j));
                out.push((ei, ej));
                out.push((ei + ej, ei - ej));
            }
        }
    }
    out
}

/// Random unit pair with η Gram–Schmidt-orthogonalized against V.
pub fn random_pair<R: rand::Rng>(n: usize, rng: &mut R) -> (Vector<f64>, Vector<f64>) {
    loop {
        let draws: Vec<f64> = (0..2 * n).map(|_| standard_normal(rng)).collect();
        let v = Vector::from_slice(&draws[..n]);
        let e = Vector::from_slice(&draws[n..]);
        let vn = v.norm();
        if vn < 1e-6 {
            continue;
        }
        let v = v.scale(1.0 / vn);
        let e = e.axpy(-e.dot(&v), &v);
        let en = e.norm();
        if en < 1e-6 {
            continue;
        }
        let e = e.scale(1.0 / en);
        let e = e.axpy(-e.dot(&v), &v).normalized();
        return (v, e);
    }
}

/// Standard normal by Box–Muller.
pub(crate) fn standard_normal<R: rand::Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genfun::{make_builtin, GenFunSpec};
    use rand::SeedableRng;

    fn v(s: &[f64]) -> Vector<f64> {
        Vector::from_slice(s)
    }

    #[test]
    fn quadratic_tensors_vanish() {
        let gf = make_builtin::<f64>(&GenFunSpec::quadratic()).unwrap();
        let base = PrimalBase::at_triple(&gf, &v(&[0.2, 0.1]), &v(&[-0.3, 0.4]), 0.5).unwrap();
        assert_eq!(a_matrix(&gf, &base.x, &base.pbar, base.u, None).unwrap(), Matrix::zeros(2, 2));
        assert_eq!(g3w_form(&gf, &base, &v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        let dual = DualBase::at_triple(&gf, &v(&[0.2, 0.1]), &v(&[-0.3, 0.4]), 0.5).unwrap();
        assert_eq!(g3w_dual_form(&gf, &dual, &v(&[1.0, 1.0]), &v(&[1.0, -1.0])).unwrap(), 0.0);
    }

    #[test]
    fn parallel_beam_a_is_minus_z() {
        let gf = make_builtin::<f64>(&GenFunSpec::parallel_beam()).unwrap();
        let (x, xb, z) = (v(&[0.1, 0.0]), v(&[0.3, -0.2]), 1.2);
        let base = PrimalBase::at_triple(&gf, &x, &xb, z).unwrap();
        let a = a_matrix(&gf, &x, &base.pbar, base.u, None).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { -z } else { 0.0 };
                assert!((a[(i, j)] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn non_orthogonal_directions_are_rejected() {
        let gf = make_builtin::<f64>(&GenFunSpec::quadratic()).unwrap();
        let base = PrimalBase::at_triple(&gf, &v(&[0.0, 0.0]), &v(&[0.0, 0.0]), 0.0).unwrap();
        assert!(g3w_form(&gf, &base, &v(&[1.0, 0.0]), &v(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn a_star_matches_second_differences_of_h() {
        let gf = make_builtin::<f64>(&GenFunSpec::point_source(-3.0)).unwrap();
        let (x, xb) = (v(&[0.1, -0.2]), v(&[0.3, 0.5]));
        let z = gf.from_physical(0.4);
        let u = gf.value(&x, &xb, z).unwrap();
        let a = a_star_from_derivs(&gf.derivs(&x, &xb, z).unwrap());
        let h = 1e-4;
        let hh = |b: Vector<f64>| gf.h(&x, &b, u).unwrap();
        for k in 0..2 {
            for l in 0..2 {
                let (ek, el) = (Vector::unit(2, k).scale(h), Vector::unit(2, l).scale(h));
                let fd = (hh(xb + ek + el) - hh(xb + ek - el) - hh(xb - ek + el) + hh(xb - ek - el)) / (4.0 * h * h);
                assert!((fd - a[(k, l)]).abs() < 1e-6 * a.norm_max().max(1.0), "{k}{l}: {fd} vs {}", a[(k, l)]);
            }
        }
    }

    #[test]
    fn random_pairs_are_orthonormal() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let (a, b) = random_pair(3, &mut rng);
            assert!(a.dot(&b).abs() < 1e-14);
            assert!((a.norm() - 1.0).abs() < 1e-14 && (b.norm() - 1.0).abs() < 1e-14);
        }
        assert_eq!(axis_pairs::<f64>(2).len(), 4);
        assert_eq!(axis_pairs::<f64>(3).len(), 12);
    }
}
