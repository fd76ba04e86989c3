//! Shipped demo configurations and synthetic counterexamples.

use crate::gconvex::{Envelope, GAffine};
use crate::genfun::{GenFun, GenFunSpec};
use crate::grid::Grid2;
use crate::linalg::Vector;
use crate::sampling::Halton;
use crate::solver::SemiDiscreteProblem;
use crate::structure::CheckSetup;

/// ε of the shipped cubic cost c = −⟨x,x̄⟩ − ε⟨x,x̄⟩³, large enough that
/// G3w fails on the default boxes.
pub const VIOLATOR_EPSILON: f64 = 3.0;

/// G3w- and QQConv-violating generating function.
pub fn synthetic_violator() -> GenFunSpec {
    GenFunSpec::cubic(VIOLATOR_EPSILON)
}

/// Twist-violating generating function (folded target chart).
pub fn twist_violator() -> GenFunSpec {
    GenFunSpec::folded()
}

/// The built-ins covered by the structure cross-check.
pub fn builtin_specs() -> Vec<GenFunSpec> {
    vec![
        GenFunSpec::quadratic(),
        GenFunSpec::far_field_log(),
        GenFunSpec::point_source(-3.0),
        GenFunSpec::parallel_beam(),
        GenFunSpec::minkowski(),
    ]
}

/// `count` pieces through the center of the built-in's check box with foci
/// on a Halton net of its target box, each dropped by a random amount of up
/// to 15% of the scalar interval, together with a 96² grid on the source box.
pub fn random_envelope(gf: &GenFun<f64>, count: usize, seed: u64) -> crate::Result<(Envelope<f64>, Grid2)> {
    let setup = CheckSetup::for_builtin(gf);
    let [a, b] = setup.interval;
    let x0 = setup.source.center();
    let mut pieces = Vec::with_capacity(count);
    for q in Halton::new(3, seed).take(count) {
        let xb = setup.target.at(&q[..2]);
        pieces.push(GAffine::through(gf, &x0, xb, 0.5 * (a + b) - 0.15 * (b - a) * q[2])?);
    }
    Ok((Envelope::new(gf.clone(), pieces), Grid2::from_box(&setup.source, 96, 96)?))
}

/// u = max of the tangent planes of |x|²/2 at the centers of a k × k lattice
/// on [−half, half]²: a semi-discrete classical Monge–Ampère solution.
pub fn paraboloid_envelope(k: usize, half: f64) -> Envelope<f64> {
    let gf = GenFun::<f64>::from_spec(&GenFunSpec::quadratic()).expect("built-in");
    let mut pieces = Vec::with_capacity(k * k);
    for j in 0..k {
        for i in 0..k {
            let c = |t: usize| -half + 2.0 * half * (t as f64 + 0.5) / k as f64;
            let a = Vector::from_slice(&[c(i), c(j)]);
            pieces.push(GAffine::new(a, 0.5 * a.norm_sq()));
        }
    }
    Envelope::new(gf, pieces)
}

/// Pieces along the G-segment from x̄₀ to x̄₁ with respect to (x*, u*), the
/// piece at parameter t raised by lift·t(1 − t) at x*. Under G3w the middle
/// pieces only round off the ridge between the two ends; without it they
/// also overtake both ends far from x*, and their cells split in two.
pub fn ridge_envelope(
    gf: &GenFun<f64>,
    x_star: &Vector<f64>,
    u_star: f64,
    ends: [Vector<f64>; 2],
    count: usize,
    lift: f64,
) -> crate::Result<Envelope<f64>> {
    let seg = crate::expmaps::target_segment(gf, x_star, u_star, ends, &crate::expmaps::uniform_grid(count.max(1)))?;
    let mut pieces = Vec::with_capacity(seg.samples.len());
    for smp in &seg.samples {
        let smp = smp.as_ref().map_err(|e| e.clone())?;
        let t = smp.s;
        pieces.push(GAffine::through(gf, x_star, smp.point, u_star + lift * t * (1.0 - t))?);
    }
    Ok(Envelope::new(gf.clone(), pieces))
}

const RIDGE_BASE: [f64; 2] = [-0.1, -0.15];
const RIDGE_ENDS: [[f64; 2]; 2] = [[0.15, -0.5], [0.45, -0.15]];
pub const RIDGE_LIFT: f64 = 0.05;

fn ridge_on(spec: &GenFunSpec, count: usize) -> Envelope<f64> {
    let gf = GenFun::<f64>::from_spec(spec).expect("built-in");
    let ends = RIDGE_ENDS.map(|e| Vector::from_slice(&e));
    ridge_envelope(&gf, &Vector::from_slice(&RIDGE_BASE), 0.0, ends, count, RIDGE_LIFT).expect("valid ridge")
}

/// [`ridge_envelope`] on the shipped violator, at a configuration where the
/// middle pieces overtake both ends near the corner (1, −1) of [−1, 1]².
pub fn violator_ridge(count: usize) -> Envelope<f64> {
    ridge_on(&synthetic_violator(), count)
}

/// The same construction for the quadratic cost.
pub fn quadratic_ridge(count: usize) -> Envelope<f64> {
    ridge_on(&GenFunSpec::quadratic(), count)
}

/// Cell centers within `radius` of the origin where a middle piece of a
/// ridge envelope is active: the part of the domain where the envelope is
/// curved rather than flat. Every `stride`-th such center is kept.
pub fn ridge_base_points(env: &Envelope<f64>, grid: &Grid2, radius: f64, stride: usize) -> Vec<[f64; 2]> {
    let last = env.len() - 1;
    env.eval_centers(grid)
        .iter()
        .enumerate()
        .filter_map(|(k, e)| {
            let a = e.as_ref().ok()?.1[0];
            let x = grid.center(k);
            (a > 0 && a < last && x.norm() < radius).then_some([x[0], x[1]])
        })
        .step_by(stride.max(1))
        .collect()
}

/// Targets on a jittered ring, in generic position.
fn ring(count: usize, radius: f64) -> Vec<Vector<f64>> {
    (0..count)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / count as f64 + 0.05 * (k % 3) as f64;
            let r = radius * (1.0 + 0.08 * ((k * 7 % 5) as f64 - 2.0) / 2.0);
            Vector::from_slice(&[r * a.cos(), r * a.sin()])
        })
        .collect()
}

/// Eight targets on the plane x̄₃ = −3 lit by a point source through the
/// directions of a 0.4-box on the north cap, on a 256² grid.
pub fn point_source_8() -> SemiDiscreteProblem {
    point_source_8_on(256)
}

pub fn point_source_8_on(cells: usize) -> SemiDiscreteProblem {
    let gf = GenFun::<f64>::from_spec(&GenFunSpec::point_source(-3.0)).expect("built-in");
    let grid = Grid2::square(0.4, cells);
    let weights = [1.0, 1.2, 0.9, 1.1, 1.0, 0.8, 1.3, 1.05];
    SemiDiscreteProblem::with_weights(
        gf,
        grid,
        |x| 1.0 + 0.5 * x[0] - 0.25 * x[1] * x[1],
        ring(8, 0.6),
        &weights,
        Vector::zeros(2),
        0.5,
    )
    .expect("valid demo")
}

/// Five targets for the parallel-beam reflector (Φ ≡ 0) over a 0.5-box.
pub fn parallel_beam_5() -> SemiDiscreteProblem {
    let gf = GenFun::<f64>::from_spec(&GenFunSpec::parallel_beam()).expect("built-in");
    let grid = Grid2::square(0.5, 128);
    let mut targets = ring(4, 0.3);
    targets.push(Vector::from_slice(&[0.02, -0.01]));
    SemiDiscreteProblem::with_weights(gf, grid, |x| 1.0 + 0.3 * x[1], targets, &[1.0, 1.0, 1.2, 0.8, 1.5], Vector::zeros(2), 1.0)
        .expect("valid demo")
}

/// Uniform density on [−½, ½]² sent to the centers of a k × k partition
/// with equal masses; the exact heights are |c_i|²/2 up to a constant, so
/// the solution is [`paraboloid_envelope`]`(k, 0.5)` shifted.
pub fn classical_ma(k: usize, cells: usize) -> SemiDiscreteProblem {
    let gf = GenFun::<f64>::from_spec(&GenFunSpec::quadratic()).expect("built-in");
    let env = paraboloid_envelope(k, 0.5);
    SemiDiscreteProblem::with_weights(gf, Grid2::square(0.5, cells), |_| 1.0, env.targets(), &vec![1.0; k * k], Vector::zeros(2), 0.0)
        .expect("valid demo")
}
