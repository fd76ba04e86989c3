//! Nondeg, Twist, Unif/Lip and DomConv checks.

use rayon::prelude::*;

use super::{witness_of, CheckSetup, ConditionReport, Witness};
use crate::expmaps::{e_matrix, p_map, source_segment, target_segment, uniform_grid};
use crate::genfun::GenFun;
use crate::linalg::Vector;
use crate::sampling::BoxDomain;

/// min |det E| over sampled configurations.
pub fn check_nondeg(gf: &GenFun<f64>, setup: &CheckSetup) -> ConditionReport {
    let configs = setup.configs(setup.samples, 1);
    let dets: Vec<Option<f64>> = configs
        .par_iter()
        .map(|(x, xb, u)| {
            let z = gf.h(x, xb, *u).ok()?;
            e_matrix(gf, x, xb, z).ok().map(|e| e.det.abs())
        })
        .collect();
    let mut min = f64::INFINITY;
    let mut wit = None;
    let mut skipped = 0;
    for (d, (x, xb, u)) in dets.iter().zip(&configs) {
        match d {
            Some(d) if *d < min => {
                min = *d;
                wit = Some(witness_of(&[("x", x.to_f64()), ("xbar", xb.to_f64()), ("u", vec![*u])]));
            }
            Some(_) => {}
            None => skipped += 1,
        }
    }
    let floor = gf.tol().det_floor;
    ConditionReport::new("Nondeg", configs.len() - skipped, skipped, min - floor, 0.0)
        .with_constant("min_det", min)
        .with_witness(wit)
}

/// Symmetric net over a box: `k` cell midpoints per axis.
fn net(b: &BoxDomain, k: usize) -> Vec<Vector<f64>> {
    let n = b.dim();
    let total = k.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            let mut unit = vec![0.0; n];
            for u in unit.iter_mut() {
                *u = ((idx % k) as f64 + 0.5) / k as f64;
                idx /= k;
            }
            b.at(&unit)
        })
        .collect()
}

/// Smallest |Δout|/|Δin| over all pairs, with the achieving pair.
fn min_ratio(inputs: &[Vec<f64>], outputs: &[Vec<f64>]) -> (f64, usize, usize) {
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    (0..inputs.len())
        .into_par_iter()
        .map(|i| {
            let mut best = (f64::INFINITY, i, i);
            for j in i + 1..inputs.len() {
                let din = dist(&inputs[i], &inputs[j]);
                if din == 0.0 {
                    continue;
                }
                let r = dist(&outputs[i], &outputs[j]) / din;
                if r < best.0 {
                    best = (r, i, j);
                }
            }
            best
        })
        .reduce(|| (f64::INFINITY, 0, 0), |a, b| if b.0 < a.0 { b } else { a })
}

fn per_axis(n: usize, budget: usize) -> usize {
    ((budget as f64).powf(1.0 / n as f64).floor() as usize).max(2)
}

/// Injectivity of (x̄, z) ↦ (DₓG, G) over a net, at a few base points x, and
/// of x ↦ −D̄G/G_z over an x-net, at a few foci. A collision (ratio 0)
/// between distinct net points is a failure.
pub fn check_twist(gf: &GenFun<f64>, setup: &CheckSetup) -> ConditionReport {
    let n = gf.dim();
    let bases = setup.configs(4, 2);
    let levels = 9;
    let tnet = net(&setup.target, per_axis(n, 2000 / levels));
    let snet = net(&setup.source, per_axis(n, 2000));
    let floor = gf.tol().twist_floor;
    let mut worst = (f64::INFINITY, None::<Witness>);
    let mut skipped = 0;
    let mut tested = 0;
    for (x, xb, u) in &bases {
        // Primal: fixed x, net over (x̄, u).
        let (mut ins, mut outs) = (Vec::new(), Vec::new());
        for yb in &tnet {
            for l in 0..levels {
                let ul = setup.u_at((l as f64 + 0.5) / levels as f64);
                let Ok(z) = gf.h(x, yb, ul) else {
                    skipped += 1;
                    continue;
                };
                let Ok(d) = gf.derivs(x, yb, z) else {
                    skipped += 1;
                    continue;
                };
                let mut i = yb.to_f64();
                i.push(z);
                let mut o = d.dx.to_f64();
                o.push(d.g);
                ins.push(i);
                outs.push(o);
            }
        }
        tested += ins.len();
        let (r, i, j) = min_ratio(&ins, &outs);
        if r < worst.0 {
            worst = (
                r,
                Some(witness_of(&[
                    ("x", x.to_f64()),
                    ("xbar_z_a", ins[i].clone()),
                    ("xbar_z_b", ins[j].clone()),
                    ("output_a", outs[i].clone()),
                    ("output_b", outs[j].clone()),
                ])),
            );
        }
        // Dual: fixed focus, net over x.
        let Ok(z) = gf.h(x, xb, *u) else {
            skipped += 1;
            continue;
        };
        let (mut ins, mut outs) = (Vec::new(), Vec::new());
        for y in &snet {
            match p_map(gf, xb, z, y) {
                Ok(p) => {
                    ins.push(y.to_f64());
                    outs.push(p.to_f64());
                }
                Err(_) => skipped += 1,
            }
        }
        tested += ins.len();
        let (r, i, j) = min_ratio(&ins, &outs);
        if r < worst.0 {
            worst = (
                r,
                Some(witness_of(&[
                    ("xbar", xb.to_f64()),
                    ("z", vec![z]),
                    ("x_a", ins[i].clone()),
                    ("x_b", ins[j].clone()),
                    ("p_a", outs[i].clone()),
                    ("p_b", outs[j].clone()),
                ])),
            );
        }
    }
    ConditionReport::new("Twist", tested, skipped, worst.0 - floor, 0.0)
        .with_constant("min_ratio", worst.0)
        .with_witness(worst.1)
}

fn corners(b: &BoxDomain) -> Vec<Vector<f64>> {
    let n = b.dim();
    (0..1usize << n)
        .map(|m| Vector::from_fn(n, |i| if m >> i & 1 == 1 { b.hi[i] } else { b.lo[i] }))
        .collect()
}

/// (x, x̄, H(x, x̄, u)) ∈ 𝔤 on samples and on all box corners × interval
/// endpoints; K₀ = max |DₓG| over the same set.
pub fn check_unif_lip(gf: &GenFun<f64>, setup: &CheckSetup) -> ConditionReport {
    let mut configs = setup.configs(setup.samples, 3);
    for x in corners(&setup.source) {
        for xb in corners(&setup.target) {
            for u in setup.interval {
                configs.push((x, xb, u));
            }
        }
    }
    let res: Vec<Option<f64>> = configs
        .par_iter()
        .map(|(x, xb, u)| {
            let z = gf.h(x, xb, *u).ok()?;
            gf.derivs(x, xb, z).ok().map(|d| d.dx.norm())
        })
        .collect();
    let mut k0 = 0.0f64;
    let mut failures = 0;
    let mut wit = None;
    for (r, (x, xb, u)) in res.iter().zip(&configs) {
        match r {
            Some(k) => k0 = k0.max(*k),
            None => {
                failures += 1;
                wit.get_or_insert_with(|| witness_of(&[("x", x.to_f64()), ("xbar", xb.to_f64()), ("u", vec![*u])]));
            }
        }
    }
    let margin = if failures == 0 { 0.0 } else { -(failures as f64) };
    let mut rep = ConditionReport::new("Unif/Lip", configs.len(), 0, margin, 0.0)
        .with_constant("k0", k0)
        .with_witness(wit);
    if failures > 0 {
        rep = rep.with_note(format!("{failures} configurations have no admissible H"));
    }
    rep
}

/// Source segments (relative to sampled foci) and target segments (relative
/// to sampled (x, u)) between sampled endpoints must stay in the closed
/// boxes. The margin is the smallest box margin met along any segment.
pub fn check_domconv(gf: &GenFun<f64>, setup: &CheckSetup) -> ConditionReport {
    let configs = setup.configs(setup.samples, 4);
    let ends = setup.configs(setup.samples, 5);
    let grid: Vec<f64> = uniform_grid(10);
    let res: Vec<(Option<f64>, Witness)> = configs
        .par_iter()
        .zip(&ends)
        .map(|((x0, xb0, u), (x1, xb1, _))| {
            let wit = witness_of(&[
                ("x0", x0.to_f64()),
                ("x1", x1.to_f64()),
                ("xbar0", xb0.to_f64()),
                ("xbar1", xb1.to_f64()),
                ("u", vec![*u]),
            ]);
            let m = (|| {
                let z = gf.h(x0, xb0, *u).ok()?;
                let a = source_segment(gf, xb0, z, [*x0, *x1], &grid).ok()?;
                let b = target_segment(gf, x0, *u, [*xb0, *xb1], &grid).ok()?;
                if !a.well_defined || !b.well_defined {
                    return None;
                }
                let ma = a.samples.iter().flatten().map(|p| setup.source.margin(&p.point)).fold(f64::INFINITY, f64::min);
                let mb = b.samples.iter().flatten().map(|p| setup.target.margin(&p.point)).fold(f64::INFINITY, f64::min);
                Some(ma.min(mb))
            })();
            (m, wit)
        })
        .collect();
    let tol = 1e-8;
    let mut worst = f64::INFINITY;
    let mut wit = None;
    let (mut inside, mut undefined) = (0usize, 0usize);
    for (m, w) in res.iter() {
        match m {
            Some(m) => {
                if *m >= -tol {
                    inside += 1;
                }
                if *m < worst {
                    worst = *m;
                    wit = Some(w.clone());
                }
            }
            None => {
                undefined += 1;
                if wit.is_none() || worst > f64::NEG_INFINITY {
                    wit = Some(w.clone());
                }
                worst = f64::NEG_INFINITY;
            }
        }
    }
    let total = res.len();
    let mut rep = ConditionReport::new("DomConv", total, 0, worst.max(-1e300), tol)
        .with_constant("fraction_inside", inside as f64 / total.max(1) as f64)
        .with_witness(wit);
    if undefined > 0 {
        rep = rep.with_note(format!("{undefined} segment pairs left the image of the coordinate maps"));
    }
    rep
}
