//! Serializable descriptors of the built-in generating functions. They are
//! the `genfun` block of run configs and the gf header of envelope files.

use serde::{Deserialize, Serialize};

fn north() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

fn two() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostSpec {
    NegInner,
    Zero,
    HalfSqDist,
    FarFieldLog,
    Cubic { epsilon: f64 },
    Folded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhiSpec {
    #[default]
    Zero,
    /// Row-major heights on a regular grid, `values[j * nx + i]`.
    Tabulated { lo: [f64; 2], hi: [f64; 2], nx: usize, ny: usize, values: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GenFunSpec {
    /// G = −c(x, x̄) − z. Euclidean charts of dimension `dim`, except for the
    /// far-field log cost which lives on sphere charts around the two poles.
    Quasilinear {
        cost: CostSpec,
        #[serde(default = "two")]
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        source_pole: Option<[f64; 3]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target_pole: Option<[f64; 3]>,
    },
    /// Point source at the origin, source directions on a sphere chart,
    /// targets on the plane {x̄₃ = target_height}.
    PointSource {
        #[serde(default = "north")]
        pole: [f64; 3],
        target_height: f64,
    },
    ParallelBeam {
        #[serde(default)]
        phi: PhiSpec,
    },
    Minkowski {
        #[serde(default = "north")]
        source_pole: [f64; 3],
        #[serde(default = "north")]
        target_pole: [f64; 3],
    },
}

impl GenFunSpec {
    pub fn quadratic() -> Self {
        GenFunSpec::Quasilinear { cost: CostSpec::NegInner, dim: 2, source_pole: None, target_pole: None }
    }

    pub fn far_field_log() -> Self {
        GenFunSpec::Quasilinear { cost: CostSpec::FarFieldLog, dim: 2, source_pole: None, target_pole: None }
    }

    pub fn cubic(epsilon: f64) -> Self {
        GenFunSpec::Quasilinear { cost: CostSpec::Cubic { epsilon }, dim: 2, source_pole: None, target_pole: None }
    }

    pub fn folded() -> Self {
        GenFunSpec::Quasilinear { cost: CostSpec::Folded, dim: 2, source_pole: None, target_pole: None }
    }

    pub fn point_source(target_height: f64) -> Self {
        GenFunSpec::PointSource { pole: north(), target_height }
    }

    pub fn parallel_beam() -> Self {
        GenFunSpec::ParallelBeam { phi: PhiSpec::Zero }
    }

    pub fn minkowski() -> Self {
        GenFunSpec::Minkowski { source_pole: north(), target_pole: north() }
    }

    /// Short label used in reports.
    pub fn label(&self) -> String {
        match self {
            GenFunSpec::Quasilinear { cost, .. } => match cost {
                CostSpec::NegInner => "quasilinear-quadratic".into(),
                CostSpec::Zero => "quasilinear-zero".into(),
                CostSpec::HalfSqDist => "quasilinear-half-sq-dist".into(),
                CostSpec::FarFieldLog => "quasilinear-far-field-log".into(),
                CostSpec::Cubic { epsilon } => format!("quasilinear-cubic-{epsilon}"),
                CostSpec::Folded => "quasilinear-folded".into(),
            },
            GenFunSpec::PointSource { .. } => "point-source".into(),
            GenFunSpec::ParallelBeam { .. } => "parallel-beam".into(),
            GenFunSpec::Minkowski { .. } => "minkowski".into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptors_roundtrip_through_json() {
        for s in [
            GenFunSpec::quadratic(),
            GenFunSpec::far_field_log(),
            GenFunSpec::cubic(4.0),
            GenFunSpec::point_source(-3.0),
            GenFunSpec::parallel_beam(),
            GenFunSpec::minkowski(),
        ] {
            let j = serde_json::to_string(&s).unwrap();
            assert_eq!(serde_json::from_str::<GenFunSpec>(&j).unwrap(), s);
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = r#"{"kind":"point_source","target_height":-2.0,"colour":"red"}"#;
        assert!(serde_json::from_str::<GenFunSpec>(bad).is_err());
        let ok = r#"{"kind":"point_source","target_height":-2.0}"#;
        assert_eq!(serde_json::from_str::<GenFunSpec>(ok).unwrap(), GenFunSpec::point_source(-2.0));
    }
}
