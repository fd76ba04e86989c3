//! Generating functions G(x, x̄, z): evaluation, chart derivatives, the
//! admissible set, the dual function H and the built-in instances.
//!
//! Every method of [`GenFun`] works with the *oriented* scalar parameter,
//! for which G is strictly decreasing. It coincides with the physical
//! parameter unless [`GenFun::orientation`] is [`Orientation::Flipped`], in
//! which case the oriented value is the negated physical one. The free
//! functions [`eval_g`] and [`eval_h`] take and return physical values.

pub mod bicubic;
pub mod chart;
pub mod fd;
pub mod kernel;
pub mod spec;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{GjeError, Result};
use crate::linalg::{Matrix, Vector};
use crate::scalar::Real;
use crate::tol::Tolerances;

pub use bicubic::Bicubic;
pub use chart::Chart;
pub use fd::{finite_diff_derivatives, DerivId, Tensor};
pub use kernel::{Cost, Kernel, Phi};
pub use spec::{CostSpec, GenFunSpec, PhiSpec};

/// Chart coordinates of a source point.
pub type SourcePoint<T> = Vector<T>;
/// Chart coordinates of a target point.
pub type TargetPoint<T> = Vector<T>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Standard,
    /// The physical G increases in z; the toolkit works with z ↦ −z.
    Flipped,
}

impl Orientation {
    #[inline]
    pub fn sign<T: Real>(self) -> T {
        match self {
            Orientation::Standard => T::one(),
            Orientation::Flipped => -T::one(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMode {
    Analytic,
    FiniteDifference,
}

/// (u̲, ū) with the nice subinterval (u_N̲, u_N̄).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarRange<T> {
    pub lower: T,
    pub upper: T,
    pub nice_lower: T,
    pub nice_upper: T,
}

impl<T: Real> ScalarRange<T> {
    pub fn new(lower: T, upper: T, nice_lower: T, nice_upper: T) -> Result<Self> {
        if !(lower < nice_lower && nice_lower < nice_upper && nice_upper < upper) {
            return Err(GjeError::Config(format!(
                "scalar range must satisfy u̲ < u_N̲ < u_N̄ < ū, got {lower} {nice_lower} {nice_upper} {upper}"
            )));
        }
        Ok(ScalarRange { lower, upper, nice_lower, nice_upper })
    }

    pub fn contains(&self, u: T) -> bool {
        u > self.lower && u < self.upper
    }

    pub fn is_nice(&self, u: T) -> bool {
        u > self.nice_lower && u < self.nice_upper
    }
}

/// All first and second derivatives used by the toolkit, in chart
/// coordinates, at one admissible triple (oriented scalar).
#[derive(Clone, Copy, Debug)]
pub struct Derivs<T> {
    pub g: T,
    /// DₓG
    pub dx: Vector<T>,
    /// D̄G
    pub dxb: Vector<T>,
    pub gz: T,
    pub gzz: T,
    /// `dxdxb[(i, j)] = G_{xⁱx̄ʲ}`
    pub dxdxb: Matrix<T>,
    pub dxgz: Vector<T>,
    pub dxbgz: Vector<T>,
    pub dxx: Matrix<T>,
    pub dxbxb: Matrix<T>,
}

pub type CustomFn<T> = Arc<dyn Fn(&[T], &[T], T) -> T + Send + Sync>;
pub type CustomDomain<T> = Arc<dyn Fn(&[T], &[T], T) -> bool + Send + Sync>;

#[derive(Clone)]
enum Body<T> {
    Builtin(Kernel<T>),
    Custom { g: CustomFn<T>, domain: CustomDomain<T>, z_hint: T },
}

#[derive(Clone)]
pub struct GenFun<T: Real> {
    body: Body<T>,
    source: Chart<T>,
    target: Chart<T>,
    orientation: Orientation,
    range: ScalarRange<T>,
    mode: DerivativeMode,
    spec: Option<GenFunSpec>,
    tol: Tolerances,
}

impl<T: Real> fmt::Debug for GenFun<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GenFun")
            .field("label", &self.label())
            .field("dim", &self.dim())
            .field("orientation", &self.orientation)
            .field("mode", &self.mode)
            .field("range", &self.range)
            .finish()
    }
}

impl<T: Real> GenFun<T> {
    pub fn from_spec(spec: &GenFunSpec) -> Result<Self> {
        Self::from_spec_with(spec, Tolerances::default())
    }

    pub fn from_spec_with(spec: &GenFunSpec, tol: Tolerances) -> Result<Self> {
        let inf = T::infinity();
        let positive = ScalarRange::new(T::zero(), inf, T::lit(1e-6), T::lit(1e6))?;
        let sphere = |p: [f64; 3]| Chart::<T>::sphere(p, tol.cap_angle_deg);
        let (kernel, source, target, orientation, range) = match spec {
            GenFunSpec::Quasilinear { cost, dim, source_pole, target_pole } => {
                let kernel_cost = match cost {
                    CostSpec::NegInner => Cost::NegInner,
                    CostSpec::Zero => Cost::Zero,
                    CostSpec::HalfSqDist => Cost::HalfSqDist,
                    CostSpec::FarFieldLog => Cost::FarFieldLog,
                    CostSpec::Cubic { epsilon } => {
                        if !epsilon.is_finite() {
                            return Err(GjeError::Config("cubic cost needs a finite epsilon".into()));
                        }
                        Cost::Cubic(T::lit(*epsilon))
                    }
                    CostSpec::Folded => Cost::Folded,
                };
                let range = ScalarRange::new(-inf, inf, T::lit(-1e6), T::lit(1e6))?;
                let (s, t) = if matches!(cost, CostSpec::FarFieldLog) {
                    (
                        sphere(source_pole.unwrap_or([0.0, 0.0, 1.0]))?,
                        sphere(target_pole.unwrap_or([0.0, 0.0, -1.0]))?,
                    )
                } else {
                    if source_pole.is_some() || target_pole.is_some() {
                        return Err(GjeError::Config("poles apply only to sphere-chart costs".into()));
                    }
                    if !(1..=3).contains(dim) {
                        return Err(GjeError::Config(format!("dimension {dim} outside 1..=3")));
                    }
                    (Chart::Euclidean { dim: *dim }, Chart::Euclidean { dim: *dim })
                };
                (Kernel::Quasilinear(kernel_cost), s, t, Orientation::Standard, range)
            }
            GenFunSpec::PointSource { pole, target_height } => {
                if !target_height.is_finite() || *target_height == 0.0 {
                    return Err(GjeError::Config("target plane must be at a finite nonzero height".into()));
                }
                (
                    Kernel::PointSource,
                    sphere(*pole)?,
                    Chart::Plane { height: T::lit(*target_height) },
                    Orientation::Flipped,
                    positive,
                )
            }
            GenFunSpec::ParallelBeam { phi } => {
                let phi = match phi {
                    PhiSpec::Zero => Phi::Zero,
                    PhiSpec::Tabulated { lo, hi, nx, ny, values } => {
                        Phi::Tabulated(Bicubic::new(*lo, *hi, *nx, *ny, values)?)
                    }
                };
                (
                    Kernel::ParallelBeam(phi),
                    Chart::Euclidean { dim: 2 },
                    Chart::Euclidean { dim: 2 },
                    Orientation::Standard,
                    positive,
                )
            }
            GenFunSpec::Minkowski { source_pole, target_pole } => (
                Kernel::Minkowski,
                sphere(*source_pole)?,
                sphere(*target_pole)?,
                Orientation::Flipped,
                positive,
            ),
        };
        Ok(GenFun {
            body: Body::Builtin(kernel),
            source,
            target,
            orientation,
            range,
            mode: DerivativeMode::Analytic,
            spec: Some(spec.clone()),
            tol,
        })
    }

    /// A user-supplied G in Euclidean charts of dimension `dim`, with the
    /// oriented convention G_z < 0 already in place. Derivatives come from
    /// the finite-difference engine and H from the safeguarded root finder
    /// started at `z_hint`.
    pub fn custom(
        dim: usize,
        g: impl Fn(&[T], &[T], T) -> T + Send + Sync + 'static,
        domain: impl Fn(&[T], &[T], T) -> bool + Send + Sync + 'static,
        z_hint: T,
    ) -> Self {
        let inf = T::infinity();
        GenFun {
            body: Body::Custom { g: Arc::new(g), domain: Arc::new(domain), z_hint },
            source: Chart::Euclidean { dim },
            target: Chart::Euclidean { dim },
            orientation: Orientation::Standard,
            range: ScalarRange { lower: -inf, upper: inf, nice_lower: T::lit(-1e6), nice_upper: T::lit(1e6) },
            mode: DerivativeMode::FiniteDifference,
            spec: None,
            tol: Tolerances::default(),
        }
    }

    pub fn with_mode(mut self, mode: DerivativeMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_range(mut self, range: ScalarRange<T>) -> Self {
        self.range = range;
        self
    }

    pub fn with_nice_interval(mut self, lo: T, hi: T) -> Result<Self> {
        self.range = ScalarRange::new(self.range.lower, self.range.upper, lo, hi)?;
        Ok(self)
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.source.dim()
    }

    pub fn source_chart(&self) -> &Chart<T> {
        &self.source
    }

    pub fn target_chart(&self) -> &Chart<T> {
        &self.target
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn range(&self) -> &ScalarRange<T> {
        &self.range
    }

    pub fn mode(&self) -> DerivativeMode {
        self.mode
    }

    pub fn spec(&self) -> Option<&GenFunSpec> {
        self.spec.as_ref()
    }

    pub fn tol(&self) -> &Tolerances {
        &self.tol
    }

    pub fn kernel(&self) -> Option<&Kernel<T>> {
        match &self.body {
            Body::Builtin(k) => Some(k),
            Body::Custom { .. } => None,
        }
    }

    pub fn label(&self) -> String {
        self.spec.as_ref().map_or_else(|| "custom".to_string(), GenFunSpec::label)
    }

    /// Converts between oriented and physical scalar parameters (an involution).
    #[inline]
    pub fn to_physical(&self, z: T) -> T {
        self.orientation.sign::<T>() * z
    }

    #[inline]
    pub fn from_physical(&self, z: T) -> T {
        self.orientation.sign::<T>() * z
    }

    /// The set 𝔤: both points inside their charts and z ∈ I_G(x, x̄).
    pub fn admissible(&self, x: &SourcePoint<T>, xb: &TargetPoint<T>, z: T) -> bool {
        if !self.source.contains(x) || !self.target.contains(xb) || !z.is_finite() {
            return false;
        }
        match &self.body {
            Body::Builtin(k) => k.admissible(&self.source.embed(x), &self.target.embed(xb), self.to_physical(z)),
            Body::Custom { domain, .. } => domain(x.as_slice(), xb.as_slice(), z),
        }
    }

    /// G without the admissibility check; callers must know the triple is in 𝔤.
    #[inline]
    pub fn value_unchecked(&self, x: &SourcePoint<T>, xb: &TargetPoint<T>, z: T) -> T {
        match &self.body {
            Body::Builtin(k) => k.value(&self.source.embed(x), &self.target.embed(xb), self.to_physical(z)),
            Body::Custom { g, .. } => g(x.as_slice(), xb.as_slice(), z),
        }
    }

    /// G when the triple is admissible, embedding each point once.
    pub fn try_value(&self, x: &SourcePoint<T>, xb: &TargetPoint<T>, z: T) -> Option<T> {
        if !self.source.contains(x) || !self.target.contains(xb) || !z.is_finite() {
            return None;
        }
        match &self.body {
            Body::Builtin(k) => {
                let (ex, ey, zp) = (self.source.embed(x), self.target.embed(xb), self.to_physical(z));
                k.admissible(&ex, &ey, zp).then(|| k.value(&ex, &ey, zp))
            }
            Body::Custom { g, domain, .. } => domain(x.as_slice(), xb.as_slice(), z).then(|| g(x.as_slice(), xb.as_slice(), z)),
        }
    }

    pub fn value(&self, x: &SourcePoint<T>, xb: &TargetPoint<T>, z: T) -> Result<T> {
        if !self.admissible(x, xb, z) {
            return Err(self.domain_error(x, xb, z));
        }
        Ok(self.value_unchecked(x, xb, z))
    }

    pub(crate) fn domain_error(&self, x: &SourcePoint<T>, xb: &TargetPoint<T>, z: T) -> GjeError {
        GjeError::Domain(format!("{}: x = {x:?}, x̄ = {xb:?}, z = {z}", self.label()))
    }

    pub fn derivs(&self, x: &SourcePoint<T>, xb: &TargetPoint<T>, z: T) -> Result<Derivs<T>> {
        if !self.admissible(x, xb, z) {
            return Err(self.domain_error(x, xb, z));
        }
        match (&self.body, self.mode) {
            (Body::Builtin(k), DerivativeMode::Analytic) => Ok(self.compose(k, x, xb, z)),
            _ => fd::all_derivs(self, x, xb, z),
        }
    }

    fn compose(&self, k: &Kernel<T>, x: &SourcePoint<T>, xb: &TargetPoint<T>, z: T) -> Derivs<T> {
        let sg = self.orientation.sign::<T>();
        let xa = self.source.embed(x);
        let ya = self.target.embed(xb);
        let jet = k.jet(&xa, &ya, sg * z);
        let (na, nb) = (jet.na, jet.nb);
        let zi = jet.zi();
        let jx = self.source.jacobian(x);
        let jy = self.target.jacobian(xb);
        let jxt = jx.transpose();
        let jyt = jy.transpose();
        let gx = Vector::from_fn(na, |i| jet.g[i]);
        let gy = Vector::from_fn(nb, |i| jet.g[na + i]);
        let hxy = Matrix::from_fn(na, nb, |i, j| jet.h[i][na + j]);
        let hxx = Matrix::from_fn(na, na, |i, j| jet.h[i][j]);
        let hyy = Matrix::from_fn(nb, nb, |i, j| jet.h[na + i][na + j]);
        let hxz = Vector::from_fn(na, |i| jet.h[i][zi]);
        let hyz = Vector::from_fn(nb, |i| jet.h[na + i][zi]);
        Derivs {
            g: jet.v,
            dx: jxt.matvec(&gx),
            dxb: jyt.matvec(&gy),
            gz: sg * jet.g[zi],
            gzz: jet.h[zi][zi],
            dxdxb: jxt.matmul(&hxy).matmul(&jy),
            dxgz: jxt.matvec(&hxz).scale(sg),
            dxbgz: jyt.matvec(&hyz).scale(sg),
            dxx: jxt.matmul(&hxx).matmul(&jx).add(&self.source.curvature_term(x, &gx)),
            dxbxb: jyt.matmul(&hyy).matmul(&jy).add(&self.target.curvature_term(xb, &gy)),
        }
    }

    /// Oriented scalar interval on which every (·, x̄, z) is admissible as far
    /// as the z-constraint is concerned (chart and x-dependent constraints
    /// are not included).
    pub fn z_bracket(&self, xb: &TargetPoint<T>) -> (T, T) {
        let inf = T::infinity();
        let phys = match &self.body {
            Body::Builtin(Kernel::PointSource) => (T::zero(), T::lit(2.0) / self.target.embed(xb).norm()),
            Body::Builtin(Kernel::ParallelBeam(_)) | Body::Builtin(Kernel::Minkowski) => (T::zero(), inf),
            _ => (-inf, inf),
        };
        match self.orientation {
            Orientation::Standard => phys,
            Orientation::Flipped => (-phys.1, -phys.0),
        }
    }

    /// The dual function H: the oriented z with G(x, x̄, z) = u. Any u
    /// attained on the fiber G(x, x̄, ·) is accepted, not only u ∈ (u̲, ū).
    pub fn h(&self, x: &SourcePoint<T>, xb: &TargetPoint<T>, u: T) -> Result<T> {
        if !u.is_finite() {
            return Err(GjeError::Range(format!("{}: u = {u} is not finite", self.label())));
        }
        if !self.source.contains(x) || !self.target.contains(xb) {
            return Err(GjeError::Domain(format!("{}: x = {x:?}, x̄ = {xb:?} outside the charts", self.label())));
        }
        match &self.body {
            Body::Builtin(k) => {
                let zp = k
                    .inverse(&self.source.embed(x), &self.target.embed(xb), u)
                    .ok_or_else(|| self.range_error(x, xb, u))?;
                let z = self.from_physical(zp);
                if !self.admissible(x, xb, z) {
                    return Err(self.range_error(x, xb, u));
                }
                Ok(z)
            }
            Body::Custom { z_hint, .. } => self.h_by_root_finding(x, xb, u, *z_hint),
        }
    }

    fn range_error(&self, x: &SourcePoint<T>, xb: &TargetPoint<T>, u: T) -> GjeError {
        GjeError::Range(format!("{}: u = {u} is not attained at x = {x:?}, x̄ = {xb:?}", self.label()))
    }

    /// H by bracket expansion and safeguarded Newton on the monotone map
    /// z ↦ G(x, x̄, z). Used for user-supplied G and as an independent check
    /// of the closed-form inverses.
    pub fn h_by_root_finding(&self, x: &SourcePoint<T>, xb: &TargetPoint<T>, u: T, z_hint: T) -> Result<T> {
        let tol = T::lit(self.tol.h_inverse) * T::one().max(u.abs());
        let f = |z: T| -> Option<T> { self.admissible(x, xb, z).then(|| self.value_unchecked(x, xb, z) - u) };
        let f0 = f(z_hint).ok_or_else(|| self.domain_error(x, xb, z_hint))?;
        if f0.abs() <= tol {
            return Ok(z_hint);
        }
        // G is decreasing: f0 > 0 means the root lies above z_hint.
        let dir = if f0 > T::zero() { T::one() } else { -T::one() };
        let mut step = T::lit(0.1) * T::one().max(z_hint.abs());
        let (mut a, mut fa) = (z_hint, f0);
        let mut bracket = None;
        let mut tries = 0;
        while bracket.is_none() {
            if tries >= self.tol.bracket_doublings {
                return Err(self.range_error(x, xb, u));
            }
            tries += 1;
            let trial = a + dir * step;
            match f(trial) {
                Some(ft) if ft.abs() <= tol => return Ok(trial),
                Some(ft) if (ft > T::zero()) != (fa > T::zero()) => bracket = Some((a, fa, trial, ft)),
                Some(ft) => {
                    a = trial;
                    fa = ft;
                    step = step * T::lit(2.0);
                }
                // Left the admissible set: approach its boundary more carefully.
                None => step = step * T::lit(0.5),
            }
            if step < T::epsilon() * T::one().max(a.abs()) {
                return Err(self.range_error(x, xb, u));
            }
        }
        let (mut lo, mut flo, mut hi, _) = bracket.unwrap_or((a, fa, a, fa));
        let mut z = (lo + hi) * T::lit(0.5);
        for _ in 0..self.tol.root_max_iter {
            let fz = f(z).ok_or_else(|| self.domain_error(x, xb, z))?;
            if fz.abs() <= tol {
                return Ok(z);
            }
            if (fz > T::zero()) == (flo > T::zero()) {
                lo = z;
                flo = fz;
            } else {
                hi = z;
            }
            let h = T::epsilon().cbrt() * T::one().max(z.abs());
            let slope = match (f(z + h), f(z - h)) {
                (Some(p), Some(m)) => (p - m) / (h + h),
                _ => T::nan(),
            };
            let newton = z - fz / slope;
            let (l, r) = if lo < hi { (lo, hi) } else { (hi, lo) };
            z = if newton.is_finite() && newton > l && newton < r { newton } else { (lo + hi) * T::lit(0.5) };
            if (r - l).abs() <= T::lit(4.0) * T::epsilon() * T::one().max(z.abs()) {
                return Ok(z);
            }
        }
        Err(GjeError::Convergence(format!("{}: H root finder exceeded its budget at u = {u}", self.label())))
    }
}

/// Builds one of the four built-in families from its descriptor.
pub fn make_builtin<T: Real>(spec: &GenFunSpec) -> Result<GenFun<T>> {
    GenFun::from_spec(spec)
}

/// G at a physical scalar parameter.
pub fn eval_g<T: Real>(gf: &GenFun<T>, x: &SourcePoint<T>, xb: &TargetPoint<T>, z: T) -> Result<T> {
    gf.value(x, xb, gf.from_physical(z))
}

/// H as a physical scalar parameter.
pub fn eval_h<T: Real>(gf: &GenFun<T>, x: &SourcePoint<T>, xb: &TargetPoint<T>, u: T) -> Result<T> {
    gf.h(x, xb, u).map(|z| gf.to_physical(z))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &[f64]) -> Vector<f64> {
        Vector::from_slice(s)
    }

    #[test]
    fn parallel_beam_value_at_coincident_points() {
        let gf = make_builtin::<f64>(&GenFunSpec::parallel_beam()).unwrap();
        let x = v(&[0.3, -0.7]);
        assert!((eval_g(&gf, &x, &x, 2.0).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn zero_cost_is_minus_z() {
        let spec = GenFunSpec::Quasilinear { cost: CostSpec::Zero, dim: 2, source_pole: None, target_pole: None };
        let gf = make_builtin::<f64>(&spec).unwrap();
        let (x, xb) = (v(&[0.1, 0.2]), v(&[5.0, -1.0]));
        assert_eq!(eval_g(&gf, &x, &xb, 3.0).unwrap(), -3.0);
        assert_eq!(eval_h(&gf, &x, &xb, 5.0).unwrap(), -5.0);
    }

    #[test]
    fn point_source_example_values() {
        let gf = make_builtin::<f64>(&GenFunSpec::point_source(1.0)).unwrap();
        let x = gf.source_chart().lift(&v(&[0.0, 0.0, 1.0])).unwrap();
        let xb = gf.target_chart().lift(&v(&[0.0, 0.0, 1.0])).unwrap();
        assert!((eval_g(&gf, &x, &xb, 1.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((eval_h(&gf, &x, &xb, 2.0 / 3.0).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(gf.orientation(), Orientation::Flipped);
    }

    #[test]
    fn point_source_rejects_far_foci() {
        let gf = make_builtin::<f64>(&GenFunSpec::point_source(1.0)).unwrap();
        let x = v(&[0.0, 0.0]);
        let xb = v(&[0.0, 0.0]);
        // ½ z |x̄| < 1 with |x̄| = 1 means z < 2.
        assert!(eval_g(&gf, &x, &xb, 1.999).is_ok());
        assert!(matches!(eval_g(&gf, &x, &xb, 2.0), Err(GjeError::Domain(_))));
        assert!(eval_g(&gf, &x, &xb, -0.1).is_err());
    }

    #[test]
    fn parallel_beam_inverse_matches_root_finder() {
        let gf = make_builtin::<f64>(&GenFunSpec::parallel_beam()).unwrap();
        let (x, xb) = (v(&[0.0, 0.0]), v(&[1.0, 0.0]));
        assert!((eval_h(&gf, &x, &xb, 0.0).unwrap() - 1.0).abs() < 1e-15);
        let z = gf.h_by_root_finding(&x, &xb, 0.0, 3.0).unwrap();
        assert!((z - 1.0).abs() < 1e-9);
    }

    #[test]
    fn minkowski_is_flipped_and_invertible() {
        let gf = make_builtin::<f64>(&GenFunSpec::minkowski()).unwrap();
        let x = v(&[0.1, 0.2]);
        let xb = v(&[-0.2, 0.3]);
        let t = gf.source_chart().embed(&x).dot(&gf.target_chart().embed(&xb));
        assert!((eval_g(&gf, &x, &xb, 1.5).unwrap() - 1.5 * t).abs() < 1e-15);
        let d = gf.derivs(&x, &xb, gf.from_physical(1.5)).unwrap();
        assert!((d.gz + t).abs() < 1e-15);
        assert!((eval_h(&gf, &x, &xb, 0.7).unwrap() - 0.7 / t).abs() < 1e-14);
    }

    #[test]
    fn custom_inverse_uses_root_finder() {
        let gf = GenFun::<f64>::custom(1, |x, xb, z| x[0] * xb[0] - z.powi(3) - z, |_, _, _| true, 0.0);
        let (x, xb) = (v(&[0.5]), v(&[2.0]));
        let z = gf.h(&x, &xb, -9.0).unwrap();
        assert!((gf.value(&x, &xb, z).unwrap() + 9.0).abs() < 1e-9);
    }

    #[test]
    fn nice_interval_must_be_ordered() {
        let gf = make_builtin::<f64>(&GenFunSpec::minkowski()).unwrap();
        assert!(gf.clone().with_nice_interval(0.5, 2.0).is_ok());
        assert!(gf.clone().with_nice_interval(-1.0, 2.0).is_err());
        assert!(gf.with_nice_interval(2.0, 1.0).is_err());
    }

    #[test]
    fn generic_over_f32() {
        let gf = make_builtin::<f32>(&GenFunSpec::parallel_beam()).unwrap();
        let x = Vector::<f32>::from_slice(&[0.0, 0.0]);
        assert!((eval_g(&gf, &x, &x, 2.0f32).unwrap() - 0.25).abs() < 1e-7);
    }
}
