//! Semi-discrete G-convex functions: finite maxima of G-affine pieces, their
//! subdifferentials, cells, sections and the comparison sets built on them.

pub mod cells;
pub mod dual;
pub mod measure;
pub mod section;

use rayon::prelude::*;

use crate::error::{GjeError, Result};
use crate::genfun::{GenFun, SourcePoint, TargetPoint};
use crate::grid::Grid2;
use crate::linalg::Vector;
use crate::scalar::Real;

pub use cells::{CellIntegrator, ValueTable};
pub use dual::{g_cone_subdiff, g_dual, polar_dual, target_net};
pub use measure::{gma_measure, Estimator, MeasureReport};
pub use section::{coord_image, sample_sections, section, section_from_values, Section};

/// The function x ↦ G(x, x̄, z).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GAffine<T> {
    pub xb: TargetPoint<T>,
    pub z: T,
}

impl<T: Real> GAffine<T> {
    pub fn new(xb: TargetPoint<T>, z: T) -> Self {
        GAffine { xb, z }
    }

    /// The piece with focus x̄ passing through (x₀, u₀).
    pub fn through(gf: &GenFun<T>, x0: &SourcePoint<T>, xb: TargetPoint<T>, u0: T) -> Result<Self> {
        Ok(GAffine { xb, z: gf.h(x0, &xb, u0)? })
    }

    pub fn value(&self, gf: &GenFun<T>, x: &SourcePoint<T>) -> Result<T> {
        gf.value(x, &self.xb, self.z)
    }

    /// The piece with the same focus whose value at x is raised by `lift`.
    pub fn lifted(&self, gf: &GenFun<T>, x: &SourcePoint<T>, lift: T) -> Result<Self> {
        let u = self.value(gf, x)?;
        Ok(GAffine { xb: self.xb, z: gf.h(x, &self.xb, u + lift)? })
    }
}

/// u(x) = max over admissible pieces of G(x, x̄ᵢ, zᵢ).
#[derive(Clone, Debug)]
pub struct Envelope<T: Real> {
    pub gf: GenFun<T>,
    pub pieces: Vec<GAffine<T>>,
    pub tie: T,
}

impl<T: Real> Envelope<T> {
    pub fn new(gf: GenFun<T>, pieces: Vec<GAffine<T>>) -> Self {
        let tie = T::lit(gf.tol().tie);
        Envelope { gf, pieces, tie }
    }

    pub fn from_heights(gf: GenFun<T>, targets: &[TargetPoint<T>], heights: &[T]) -> Self {
        let pieces = targets.iter().zip(heights).map(|(xb, z)| GAffine::new(*xb, *z)).collect();
        Envelope::new(gf, pieces)
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn heights(&self) -> Vec<T> {
        self.pieces.iter().map(|p| p.z).collect()
    }

    pub fn targets(&self) -> Vec<TargetPoint<T>> {
        self.pieces.iter().map(|p| p.xb).collect()
    }

    /// u(x) and the indices within the tie tolerance of the maximum.
    pub fn eval(&self, x: &SourcePoint<T>) -> Result<(T, Vec<usize>)> {
        let mut best: Option<T> = None;
        let mut near: Vec<(usize, T)> = Vec::new();
        for (i, p) in self.pieces.iter().enumerate() {
            let Some(v) = self.gf.try_value(x, &p.xb, p.z) else { continue };
            match best {
                Some(b) if v <= b => {
                    if b - v <= self.tie {
                        near.push((i, v));
                    }
                }
                _ => {
                    best = Some(v);
                    near.retain(|(_, w)| v - *w <= self.tie);
                    near.push((i, v));
                }
            }
        }
        let u = best.ok_or_else(|| GjeError::EmptyEnvelope(format!("{x:?}")))?;
        Ok((u, near.into_iter().map(|(i, _)| i).collect()))
    }

    pub fn value(&self, x: &SourcePoint<T>) -> Result<T> {
        self.pieces
            .iter()
            .filter_map(|p| self.gf.try_value(x, &p.xb, p.z))
            .reduce(|a, b| a.max(b))
            .ok_or_else(|| GjeError::EmptyEnvelope(format!("{x:?}")))
    }

    /// Lowest active index: the representative used for cells and ray tracing.
    pub fn argmax(&self, x: &SourcePoint<T>) -> Result<usize> {
        self.eval(x).map(|(_, a)| a[0])
    }

    /// ∂_G u(x) = the foci of the active pieces.
    pub fn subdiff(&self, x: &SourcePoint<T>) -> Result<Vec<TargetPoint<T>>> {
        Ok(self.eval(x)?.1.into_iter().map(|i| self.pieces[i].xb).collect())
    }
}

impl Envelope<f64> {
    /// Subdifferential with boundary points replaced by the nearest cell
    /// center, standing in for the limit definition at ∂Ω.
    pub fn subdiff_on_grid(&self, grid: &Grid2, x: &SourcePoint<f64>) -> Result<Vec<TargetPoint<f64>>> {
        let inner = grid.lo.iter().zip(&grid.hi).enumerate().all(|(k, (a, b))| x[k] > *a && x[k] < *b);
        if inner {
            return self.subdiff(x);
        }
        let clamp = Vector::from_fn(2, |k| x[k].clamp(grid.lo[k], grid.hi[k]));
        let cell = grid.locate(&clamp).ok_or_else(|| GjeError::Domain(format!("{x:?} is far outside the grid")))?;
        self.subdiff(&grid.center(cell))
    }

    /// u at every cell center.
    pub fn eval_centers(&self, grid: &Grid2) -> Vec<Result<(f64, Vec<usize>)>> {
        (0..grid.cells()).into_par_iter().map(|k| self.eval(&grid.center(k))).collect()
    }

    /// Fraction of cell centers where the subdifferential is a singleton.
    pub fn singleton_fraction(&self, grid: &Grid2) -> f64 {
        let evals = self.eval_centers(grid);
        evals.iter().filter(|e| matches!(e, Ok((_, a)) if a.len() == 1)).count() as f64 / evals.len().max(1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genfun::GenFunSpec;

    fn v(a: f64, b: f64) -> Vector<f64> {
        Vector::from_slice(&[a, b])
    }

    #[test]
    fn single_piece() {
        let gf = GenFun::<f64>::from_spec(&GenFunSpec::quadratic()).unwrap();
        let env = Envelope::new(gf.clone(), vec![GAffine::new(v(0.3, -0.2), 0.1)]);
        let x = v(0.5, 0.5);
        let (u, a) = env.eval(&x).unwrap();
        assert_eq!(u, gf.value(&x, &v(0.3, -0.2), 0.1).unwrap());
        assert_eq!(a, vec![0]);
        assert_eq!(env.subdiff(&x).unwrap(), vec![v(0.3, -0.2)]);
    }

    #[test]
    fn quadratic_envelope_is_max_of_planes() {
        let gf = GenFun::<f64>::from_spec(&GenFunSpec::quadratic()).unwrap();
        let pieces = vec![GAffine::new(v(1.0, 0.0), 0.0), GAffine::new(v(-1.0, 0.0), 0.0), GAffine::new(v(0.0, 1.0), 0.5)];
        let env = Envelope::new(gf, pieces);
        for x in [v(0.3, 0.1), v(-0.7, 0.9), v(0.0, 2.0)] {
            let want = (x[0]).max(-x[0]).max(x[1] - 0.5);
            assert_eq!(env.value(&x).unwrap(), want);
        }
        // Ridge x₁ = 0 between the first two pieces.
        let (_, a) = env.eval(&v(0.0, 0.2)).unwrap();
        assert_eq!(a, vec![0, 1]);
        assert_eq!(env.argmax(&v(0.0, 0.2)).unwrap(), 0);
    }

    #[test]
    fn empty_envelope_is_an_error() {
        let gf = GenFun::<f64>::from_spec(&GenFunSpec::far_field_log()).unwrap();
        let env = Envelope::new(gf, vec![]);
        assert!(matches!(env.eval(&v(0.0, 0.0)), Err(GjeError::EmptyEnvelope(_))));
    }

    #[test]
    fn lifted_piece_raises_value() {
        let gf = GenFun::<f64>::from_spec(&GenFunSpec::point_source(-3.0)).unwrap();
        let x = v(0.1, 0.1);
        let p = GAffine::through(&gf, &x, v(0.2, 0.3), 0.5).unwrap();
        let q = p.lifted(&gf, &x, 0.1).unwrap();
        assert!((q.value(&gf, &x).unwrap() - 0.6).abs() < 1e-12);
    }
}
