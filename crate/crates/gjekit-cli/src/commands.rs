//! The subcommands. Each returns whether its checks passed; configuration
//! problems surface as `CliError::Config`.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use gjekit::demos;
use gjekit::estimates::{batch_aleksandrov, batch_sharp_growth, EstimateOptions};
use gjekit::gconvex::{Envelope, Estimator};
use gjekit::io::EnvelopeFile;
use gjekit::optics::{trace_ensemble, write_ray_csv, ReflectorSurface, SourceSampler};
use gjekit::solver::solve;
use gjekit::structure::{
    check_domconv, check_nondeg, check_qqconv, check_twist, check_unif_lip, crosscheck_g3w_implies_qqconv, g3w_sweep,
    TensorKind,
};
use gjekit::GjeError;
use serde::Serialize;
use serde_json::json;

use crate::config::{DensitySpec, DomainConfig, EstimatorSpec, RunConfig, SolverConfig};
use crate::CliError;

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config_hash: String,
    seed: Option<u64>,
    pass: bool,
    result: T,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}

fn out_path(cfg: &RunConfig, name: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&cfg.output).map_err(|e| io_err(&cfg.output, e))?;
    Ok(cfg.output.join(name))
}

fn write_report<T: Serialize>(cfg: &RunConfig, name: &str, command: &str, seed: Option<u64>, pass: bool, result: T) -> Result<PathBuf, CliError> {
    let r = Report { tool: "gjekit", version: env!("CARGO_PKG_VERSION"), command, config_hash: cfg.hash(), seed, pass, result };
    let path = out_path(cfg, name)?;
    let mut text = serde_json::to_string_pretty(&r).map_err(|e| io_err(&path, e))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

fn numeric(e: GjeError) -> CliError {
    match e {
        GjeError::Config(m) | GjeError::Io(m) | GjeError::Unsupported(m) => CliError::Config(m),
        e => CliError::Failed(e.to_string()),
    }
}

pub fn check(cfg: &RunConfig) -> Result<bool, CliError> {
    let gf = cfg.genfun()?;
    let setup = cfg.check_setup(&gf);
    let n = setup.samples;
    let reports = vec![
        check_unif_lip(&gf, &setup),
        check_twist(&gf, &setup),
        check_nondeg(&gf, &setup),
        check_domconv(&gf, &setup),
        g3w_sweep(&gf, &setup, n, TensorKind::Primal),
        g3w_sweep(&gf, &setup, n, TensorKind::Dual),
        check_qqconv(&gf, &setup, setup.interval, n),
    ];
    let cross = crosscheck_g3w_implies_qqconv(&gf, &setup, n);
    let pass = reports.iter().all(|r| r.pass) && cross.implication_holds;
    let summary: Vec<_> = reports.iter().map(|r| json!({"condition": r.condition, "pass": r.pass, "worst_margin": r.worst_margin})).collect();
    let result = json!({
        "genfun": gf.label(),
        "setup": setup,
        "summary": summary,
        "reports": reports,
        "crosscheck": {
            "g3w_min": cross.g3w_min,
            "g3w_dual_min": cross.g3w_dual_min,
            "m_primal": cross.m_primal,
            "m_dual": cross.m_dual,
            "implication_holds": cross.implication_holds,
        },
    });
    write_report(cfg, "check.json", "check", Some(setup.seed), pass, result)?;
    Ok(pass)
}

pub fn solve_cmd(cfg: &RunConfig) -> Result<bool, CliError> {
    let p = cfg.problem()?;
    let total = p.total_mass();
    let (env, st) = match solve(&p) {
        Ok(r) => r,
        Err(e) => {
            let e = numeric(e);
            if let CliError::Failed(m) = &e {
                write_report(cfg, "solve.json", "solve", None, false, json!({ "error": m }))?;
            }
            return Err(e);
        }
    };
    let file = EnvelopeFile::from_envelope(&env, Some(&p.masses)).map_err(numeric)?;
    let env_path = out_path(cfg, "envelope.json")?;
    file.save(&env_path).map_err(|e| io_err(&env_path, e))?;
    // Wall times would break byte-identical reruns, so they stay out.
    let csv_path = out_path(cfg, "convergence.csv")?;
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| io_err(&csv_path, e))?;
    w.write_record(["sweep", "residual_inf", "conservation"]).map_err(|e| io_err(&csv_path, e))?;
    for h in &st.history {
        w.write_record([h.sweep.to_string(), h.residual_inf.to_string(), h.conservation.to_string()])
            .map_err(|e| io_err(&csv_path, e))?;
    }
    w.flush().map_err(|e| io_err(&csv_path, e))?;
    let rinf = st.residual_inf();
    let conservation = st.history.iter().map(|h| h.conservation).fold(0.0, f64::max);
    let pass = rinf <= p.tol_mass * total;
    let result = json!({
        "genfun": p.gf.label(),
        "targets": p.len(),
        "cells": [p.grid.nx, p.grid.ny],
        "total_mass": total,
        "sweeps": st.sweeps,
        "mass_evaluations": st.mass_evaluations,
        "residual_inf": rinf,
        "residual_relative": rinf / total,
        "max_conservation_error": conservation,
        "normalization_error": st.normalization_error,
        "heights": file.pieces.iter().map(|r| r.z).collect::<Vec<_>>(),
        "envelope": "envelope.json",
        "convergence": "convergence.csv",
    });
    write_report(cfg, "solve.json", "solve", None, pass, result)?;
    Ok(pass)
}

fn load_envelope(cfg: &RunConfig) -> Result<(Envelope<f64>, Option<Vec<f64>>), CliError> {
    let path = cfg.envelope.as_ref().ok_or_else(|| CliError::Config("this command needs an envelope file".into()))?;
    let file = EnvelopeFile::load(path).map_err(|e| io_err(path, e))?;
    if file.genfun != cfg.genfun {
        return Err(CliError::Config("the envelope file was built for a different generating function".into()));
    }
    let env = file.to_envelope(cfg.tolerances.clone()).map_err(|e| io_err(path, e))?;
    Ok((env, file.masses()))
}

pub fn raytrace(cfg: &RunConfig) -> Result<bool, CliError> {
    let (env, masses) = load_envelope(cfg)?;
    let masses = masses.ok_or_else(|| CliError::Config("the envelope file carries no target masses".into()))?;
    let grid = cfg.grid()?;
    let cell_mass = cfg.cell_mass(&grid);
    let surface = ReflectorSurface::new(env).map_err(numeric)?;
    let sampler = SourceSampler::new(&grid, &cell_mass).map_err(numeric)?;
    let total: f64 = masses.iter().sum();
    let expected: Vec<f64> = masses.iter().map(|m| m / total).collect();
    let rt = &cfg.raytrace;
    let (rep, records) = trace_ensemble(&surface, &sampler, rt.rays, rt.seed, &expected).map_err(numeric)?;
    let csv_path = out_path(cfg, "rays.csv")?;
    let f = File::create(&csv_path).map_err(|e| io_err(&csv_path, e))?;
    write_ray_csv(&records, BufWriter::new(f)).map_err(|e| io_err(&csv_path, e))?;
    let pass = rep.within_sigma(rt.sigma)
        && rep.failures == 0
        && rep.max_focal_miss <= 1e-9
        && rep.max_reflection_residual <= 1e-12;
    write_report(cfg, "raytrace.json", "raytrace", Some(rt.seed), pass, &rep)?;
    Ok(pass)
}

pub fn estimate(cfg: &RunConfig) -> Result<bool, CliError> {
    let (env, masses) = load_envelope(cfg)?;
    let grid = cfg.grid()?;
    let e = &cfg.estimate;
    let estimator = match &e.estimator {
        EstimatorSpec::Grid => Estimator::Grid,
        EstimatorSpec::MonteCarlo { samples } => Estimator::MonteCarlo { samples: *samples, seed: e.seed },
        EstimatorSpec::HitMass => Estimator::HitMass {
            weights: masses.ok_or_else(|| CliError::Config("hit-mass needs target masses in the envelope file".into()))?,
            cell_mass: cfg.cell_mass(&grid),
        },
    };
    let opts = EstimateOptions { epsilon: e.epsilon, estimator, dilation: e.dilation };
    let a = batch_aleksandrov(&env, &grid, e.sections, e.seed, &opts).map_err(numeric)?;
    let g = batch_sharp_growth(&env, &grid, e.sections, e.seed, &opts).map_err(numeric)?;
    let csv_path = out_path(cfg, "estimates.csv")?;
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| io_err(&csv_path, e))?;
    for r in a.records.iter().chain(&g.records) {
        w.serialize(r).map_err(|e| io_err(&csv_path, e))?;
    }
    w.flush().map_err(|e| io_err(&csv_path, e))?;
    let pass = a.violations + g.violations == 0;
    let result = json!({
        "aleksandrov": { "records": a.records.len(), "attempts": a.attempts, "skipped": a.skipped, "violations": a.violations, "max_constant": a.max_constant() },
        "sharp_growth": { "records": g.records.len(), "attempts": g.attempts, "skipped": g.skipped, "violations": g.violations, "max_constant": g.max_constant() },
        "ledger": "estimates.csv",
    });
    write_report(cfg, "estimates.json", "estimate", Some(e.seed), pass, result)?;
    Ok(pass)
}

pub const DEMOS: [&str; 3] = ["classical-MA", "point-source-8", "parallel-beam-5"];

/// The run config of a named demo, writing into `output`.
pub fn demo_config(name: &str, output: &Path) -> Result<RunConfig, CliError> {
    let quadratic = |c: f64, b: [f64; 2], a: [[f64; 2]; 2]| DensitySpec::Quadratic { c, b, a };
    let (p, density, estimator) = match name {
        "classical-MA" => (demos::classical_ma(4, 64), DensitySpec::Uniform, EstimatorSpec::HitMass),
        "point-source-8" => (demos::point_source_8(), quadratic(1.0, [0.5, 0.0], [[0.0, 0.0], [0.0, -0.25]]), EstimatorSpec::HitMass),
        "parallel-beam-5" => (demos::parallel_beam_5(), quadratic(1.0, [0.0, 0.3], [[0.0; 2]; 2]), EstimatorSpec::HitMass),
        _ => return Err(CliError::Config(format!("unknown demo {name:?}; expected one of {}", DEMOS.join(", ")))),
    };
    let mut cfg = RunConfig::parse(r#"{"genfun": {"kind": "minkowski"}}"#, Path::new(".")).expect("base config");
    cfg.genfun = p.gf.spec().expect("built-in").clone();
    cfg.domain = Some(DomainConfig { lo: p.grid.lo, hi: p.grid.hi, cells: [p.grid.nx, p.grid.ny], density });
    cfg.solver = Some(SolverConfig {
        targets: p.targets.iter().map(|t| [t[0], t[1]]).collect(),
        weights: p.masses.clone(),
        anchor: [p.anchor[0], p.anchor[1]],
        u0: p.u0,
    });
    cfg.estimate.estimator = estimator;
    cfg.output = output.to_path_buf();
    Ok(cfg)
}

/// solve → raytrace (reflectors only) → estimate.
pub fn demo(name: &str, output: &Path, verbose: bool) -> Result<bool, CliError> {
    let mut cfg = demo_config(name, output)?;
    let path = out_path(&cfg, "config.json")?;
    let mut text = serde_json::to_string_pretty(&cfg).map_err(|e| io_err(&path, e))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    let mut pass = solve_cmd(&cfg)?;
    if verbose {
        eprintln!("{name}: solve {}", if pass { "converged" } else { "did not converge" });
    }
    cfg.envelope = Some(cfg.output.join("envelope.json"));
    if matches!(cfg.genfun, gjekit::genfun::GenFunSpec::PointSource { .. } | gjekit::genfun::GenFunSpec::ParallelBeam { .. }) {
        let ok = raytrace(&cfg)?;
        if verbose {
            eprintln!("{name}: raytrace {}", if ok { "passed" } else { "failed" });
        }
        pass &= ok;
    }
    let ok = estimate(&cfg)?;
    if verbose {
        eprintln!("{name}: estimate {}", if ok { "passed" } else { "failed" });
    }
    Ok(pass && ok)
}
