//! Run configuration: one JSON file per run, validated on load.

use std::path::{Path, PathBuf};

use gjekit::genfun::{GenFun, GenFunSpec};
use gjekit::grid::Grid2;
use gjekit::linalg::Vector;
use gjekit::solver::SemiDiscreteProblem;
use gjekit::structure::CheckSetup;
use gjekit::Tolerances;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const SCHEMA: &str = include_str!("../schema/run-config.schema.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub genfun: GenFunSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainConfig>,
    /// Sampling boxes and interval of the structure checks; defaults to the
    /// built-in's own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckSetup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    /// Envelope file read by `raytrace` and `estimate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<PathBuf>,
    #[serde(default)]
    pub raytrace: RaytraceConfig,
    #[serde(default)]
    pub estimate: EstimateConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub cells: [usize; 2],
    #[serde(default)]
    pub density: DensitySpec,
}

/// Source density f(x) = c + ⟨b, x⟩ + xᵀ A x.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    #[default]
    Uniform,
    Quadratic { c: f64, b: [f64; 2], a: [[f64; 2]; 2] },
}

impl DensitySpec {
    pub fn at(&self, x: &Vector<f64>) -> f64 {
        match self {
            DensitySpec::Uniform => 1.0,
            DensitySpec::Quadratic { c, b, a } => {
                let (p, q) = (x[0], x[1]);
                c + b[0] * p + b[1] * q + a[0][0] * p * p + (a[0][1] + a[1][0]) * p * q + a[1][1] * q * q
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub targets: Vec<[f64; 2]>,
    /// Relative target masses, rescaled to the total source mass.
    pub weights: Vec<f64>,
    pub anchor: [f64; 2],
    pub u0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaytraceConfig {
    pub rays: u64,
    pub seed: u64,
    /// Allowed deviation of the per-target counts, in binomial σ.
    pub sigma: f64,
}

impl Default for RaytraceConfig {
    fn default() -> Self {
        RaytraceConfig { rays: 100_000, seed: 0, sigma: 3.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EstimatorSpec {
    Grid,
    HitMass,
    MonteCarlo { samples: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    /// Random sections per theorem.
    pub sections: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub dilation: f64,
    pub estimator: EstimatorSpec,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig { sections: 100, seed: 0, epsilon: None, dilation: 2.0, estimator: EstimatorSpec::Grid }
    }
}

impl RunConfig {
    /// Parses and validates `text`; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(p) = cfg.envelope.as_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
            if !p.is_file() {
                return Err(CliError::Config(format!("envelope file {} does not exist", p.display())));
            }
        }
        if cfg.output.is_relative() {
            cfg.output = base.join(&cfg.output);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        self.genfun()?;
        if let Some(d) = &self.domain {
            if !(0..2).all(|a| d.lo[a] < d.hi[a]) || d.cells.contains(&0) {
                return bad("domain needs lo < hi and at least one cell per axis".into());
            }
        }
        if let Some(s) = &self.solver {
            if s.targets.is_empty() || s.targets.len() != s.weights.len() {
                return bad("solver needs one weight per target".into());
            }
            if s.weights.iter().any(|w| !(*w > 0.0)) {
                return bad("solver weights must be positive".into());
            }
            if self.domain.is_none() {
                return bad("solver needs a domain".into());
            }
        }
        if self.raytrace.rays == 0 || !(self.raytrace.sigma > 0.0) {
            return bad("raytrace needs rays > 0 and sigma > 0".into());
        }
        if self.estimate.epsilon.is_some_and(|e| !(e > 0.0)) || !(self.estimate.dilation > 0.0) {
            return bad("estimate epsilon and dilation must be positive".into());
        }
        Ok(())
    }

    pub fn genfun(&self) -> Result<GenFun<f64>, CliError> {
        GenFun::from_spec_with(&self.genfun, self.tolerances.clone()).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn check_setup(&self, gf: &GenFun<f64>) -> CheckSetup {
        self.check.clone().unwrap_or_else(|| CheckSetup::for_builtin(gf))
    }

    pub fn grid(&self) -> Result<Grid2, CliError> {
        let d = self.domain.as_ref().ok_or_else(|| CliError::Config("this command needs a domain".into()))?;
        Grid2::new(d.lo, d.hi, d.cells[0], d.cells[1]).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn cell_mass(&self, grid: &Grid2) -> Vec<f64> {
        let density = self.domain.as_ref().map(|d| d.density.clone()).unwrap_or_default();
        grid.cell_masses(|x| density.at(x))
    }

    pub fn problem(&self) -> Result<SemiDiscreteProblem, CliError> {
        let s = self.solver.as_ref().ok_or_else(|| CliError::Config("the solve command needs a solver block".into()))?;
        let grid = self.grid()?;
        let cell_mass = self.cell_mass(&grid);
        let total: f64 = cell_mass.iter().sum();
        let wsum: f64 = s.weights.iter().sum();
        let masses = s.weights.iter().map(|w| w / wsum * total).collect();
        let targets = s.targets.iter().map(|t| Vector::from_slice(t)).collect();
        SemiDiscreteProblem::new(self.genfun()?, grid, cell_mass, targets, masses, Vector::from_slice(&s.anchor), s.u0)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    /// SHA-256 of the canonical JSON form, so formatting does not matter.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&canon).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, CliError> {
        RunConfig::parse(text, Path::new("."))
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse(r#"{"genfun": {"kind": "quasilinear", "cost": {"kind": "neg_inner"}}}"#).unwrap();
        assert_eq!(c.raytrace, RaytraceConfig::default());
        assert_eq!(c.estimate.sections, 100);
        assert_eq!(c.tolerances, Tolerances::default());
    }

    #[test]
    fn hash_ignores_formatting() {
        let a = parse(r#"{"genfun": {"kind": "minkowski"}}"#).unwrap();
        let b = parse("{\n  \"genfun\" : { \"kind\" : \"minkowski\" }\n}\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = parse(r#"{"genfun": {"kind": "minkowski"}, "raytrace": {"rays": 10, "seed": 1, "sigma": 3}}"#).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn rejections() {
        for text in [
            "{",
            r#"{"genfun": {"kind": "nope"}}"#,
            r#"{"genfun": {"kind": "minkowski"}, "extra": 1}"#,
            r#"{"genfun": {"kind": "minkowski"}, "envelope": "/no/such/file.json"}"#,
            r#"{"genfun": {"kind": "minkowski"}, "raytrace": {"rays": 10, "seed": -1, "sigma": 3}}"#,
            r#"{"genfun": {"kind": "minkowski"}, "solver": {"targets": [[0, 0]], "weights": [1], "anchor": [0, 0], "u0": 1}}"#,
        ] {
            assert!(matches!(parse(text), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn schema_lists_every_field() {
        let schema: serde_json::Value = serde_json::from_str(SCHEMA).unwrap();
        let props: Vec<&String> = schema["properties"].as_object().unwrap().keys().collect();
        let full = RunConfig {
            domain: Some(DomainConfig { lo: [0.0; 2], hi: [1.0; 2], cells: [1, 1], density: DensitySpec::Uniform }),
            check: Some(CheckSetup::for_builtin(&GenFun::from_spec(&GenFunSpec::quadratic()).unwrap())),
            solver: Some(SolverConfig { targets: vec![[0.0; 2]], weights: vec![1.0], anchor: [0.0; 2], u0: 0.0 }),
            envelope: Some("e.json".into()),
            ..parse(r#"{"genfun": {"kind": "minkowski"}}"#).unwrap()
        };
        let v = serde_json::to_value(&full).unwrap();
        let mut keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        keys.sort();
        let mut props = props;
        props.sort();
        assert_eq!(keys, props);
        let tol = serde_json::to_value(Tolerances::default()).unwrap();
        for k in tol.as_object().unwrap().keys() {
            assert!(schema["properties"]["tolerances"]["properties"].get(k).is_some(), "{k}");
        }
    }
}
