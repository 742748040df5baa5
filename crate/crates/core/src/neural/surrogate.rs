use std::path::Path;

use serde::{Deserialize, Serialize};

use super::data::{InputScaling, Provenance, TrainingSet};
use super::mlp::Mlp;
use crate::error::{Error, Result};

/// A trained network together with the input normalization it was trained
/// under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surrogate {
    #[serde(flatten)]
    pub net: Mlp,
    pub normalization: InputScaling,
    pub provenance: Provenance,
    pub seed: u64,
}

impl Surrogate {
    pub fn new(net: Mlp, data: &TrainingSet, seed: u64) -> Result<Self> {
        Self::from_parts(net, data.scaling().clone(), data.provenance(), seed)
    }

    pub fn from_parts(
        net: Mlp,
        normalization: InputScaling,
        provenance: Provenance,
        seed: u64,
    ) -> Result<Self> {
        let s = Self {
            net,
            normalization,
            provenance,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        self.net.validate()?;
        if self.normalization.dim() != self.net.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "normalization width",
                expected: self.net.input_dim(),
                found: self.normalization.dim(),
            });
        }
        let ok = self
            .normalization
            .shift
            .iter()
            .chain(&self.normalization.scale)
            .all(|v| v.is_finite())
            && self.normalization.scale.iter().all(|s| *s != 0.0);
        if !ok {
            return Err(Error::InvalidData("normalization is not invertible".into()));
        }
        Ok(())
    }

    /// Evaluates the network on a raw (unnormalized) input.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.net.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "surrogate input",
                expected: self.net.input_dim(),
                found: input.len(),
            });
        }
        self.net.forward(&self.normalization.apply(input))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
