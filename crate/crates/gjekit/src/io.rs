//! Envelope files: a versioned JSON document with the generating-function
//! descriptor and the pieces as (x̄, z) pairs, z physical.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GjeError, Result};
use crate::gconvex::{Envelope, GAffine};
use crate::genfun::{GenFun, GenFunSpec};
use crate::linalg::Vector;
use crate::tol::Tolerances;

pub const ENVELOPE_FORMAT: &str = "gjekit-envelope";
pub const ENVELOPE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceRecord {
    pub target: Vec<f64>,
    pub z: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeFile {
    pub format: String,
    pub version: u32,
    pub genfun: GenFunSpec,
    pub tie: f64,
    pub pieces: Vec<PieceRecord>,
}

impl EnvelopeFile {
    pub fn from_envelope(env: &Envelope<f64>, masses: Option<&[f64]>) -> Result<Self> {
        let spec = env
            .gf
            .spec()
            .ok_or_else(|| GjeError::Unsupported("envelopes over custom generating functions cannot be saved".into()))?;
        if masses.is_some_and(|m| m.len() != env.len()) {
            return Err(GjeError::Config("one mass per piece".into()));
        }
        let pieces = env
            .pieces
            .iter()
            .enumerate()
            .map(|(i, p)| PieceRecord {
                target: p.xb.as_slice().to_vec(),
                z: env.gf.to_physical(p.z),
                mass: masses.map(|m| m[i]),
            })
            .collect();
        Ok(EnvelopeFile { format: ENVELOPE_FORMAT.into(), version: ENVELOPE_VERSION, genfun: spec.clone(), tie: env.tie, pieces })
    }

    pub fn to_envelope(&self, tol: Tolerances) -> Result<Envelope<f64>> {
        if self.format != ENVELOPE_FORMAT {
            return Err(GjeError::Config(format!("not an envelope file (format {:?})", self.format)));
        }
        if self.version != ENVELOPE_VERSION {
            return Err(GjeError::Config(format!("envelope file version {} is not supported", self.version)));
        }
        let gf = GenFun::<f64>::from_spec_with(&self.genfun, tol)?;
        let mut pieces = Vec::with_capacity(self.pieces.len());
        for (i, p) in self.pieces.iter().enumerate() {
            if p.target.len() != gf.dim() || !p.z.is_finite() {
                return Err(GjeError::Config(format!("piece {i}: bad target or height")));
            }
            pieces.push(GAffine::new(Vector::from_slice(&p.target), gf.from_physical(p.z)));
        }
        let mut env = Envelope::new(gf, pieces);
        env.tie = self.tie;
        Ok(env)
    }

    pub fn masses(&self) -> Option<Vec<f64>> {
        self.pieces.iter().map(|p| p.mass).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_exact() {
        let gf = GenFun::<f64>::from_spec(&GenFunSpec::point_source(-3.0)).unwrap();
        let x0 = Vector::from_slice(&[0.0, 0.0]);
        let pieces = (0..3)
            .map(|k| {
                let a = 0.7 * k as f64 + 0.1;
                GAffine::through(&gf, &x0, Vector::from_slice(&[a.cos() / 3.0, a.sin() / 7.0]), 0.5 + 0.1 * a).unwrap()
            })
            .collect();
        let env = Envelope::new(gf, pieces);
        let file = EnvelopeFile::from_envelope(&env, Some(&[0.2, 0.3, 0.5])).unwrap();
        assert!(file.pieces.iter().all(|p| p.z > 0.0), "physical heights are stored");
        let back: EnvelopeFile = serde_json::from_str(&file.to_json().unwrap()).unwrap();
        assert_eq!(back, file);
        let env2 = back.to_envelope(Tolerances::default()).unwrap();
        assert_eq!(env2.pieces, env.pieces);
        assert_eq!(back.masses().unwrap(), vec![0.2, 0.3, 0.5]);
    }

    #[test]
    fn wrong_version_is_rejected() {
        let gf = GenFun::<f64>::from_spec(&GenFunSpec::quadratic()).unwrap();
        let env = Envelope::new(gf, vec![GAffine::new(Vector::from_slice(&[0.0, 0.0]), 0.0)]);
        let mut file = EnvelopeFile::from_envelope(&env, None).unwrap();
        file.version = 9;
        assert!(file.to_envelope(Tolerances::default()).is_err());
    }
}
