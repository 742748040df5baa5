use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Classic Schwarz iterates of the Poisson problem.
    PoissonIterates,
    /// Analytical advection–diffusion values, consumed through a trial solution.
    AdvdiffGlobal,
    /// Zone stencil of a classic waveform-relaxation run.
    AdvdiffLocal,
}

/// Per-feature affine map `(x - shift) / scale` onto `[0, 1]`.
///
/// Features that are constant over the training data keep `scale = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputScaling {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl InputScaling {
    pub fn identity(dim: usize) -> Self {
        Self {
            shift: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn fit(inputs: &[Vec<f64>]) -> Result<Self> {
        let first = inputs.first().ok_or(Error::EmptyRegion)?;
        let mut lo = first.clone();
        let mut hi = first.clone();
        for row in inputs {
            for ((l, h), v) in lo.iter_mut().zip(hi.iter_mut()).zip(row) {
                *l = l.min(*v);
                *h = h.max(*v);
            }
        }
        let scale = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| if h > l { h - l } else { 1.0 })
            .collect();
        Ok(Self { shift: lo, scale })
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.shift)
            .zip(&self.scale)
            .map(|((v, s), c)| (v - s) / c)
            .collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.shift)
            .zip(&self.scale)
            .map(|((v, s), c)| v * c + s)
            .collect()
    }
}

/// Per-sample affine map applied to the network output before it is compared
/// with the target: `prediction = offset + multiplier · N(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputMap {
    pub offsets: Vec<Vec<f64>>,
    pub multipliers: Vec<Vec<f64>>,
}

/// Paired inputs and targets, with the input normalization fitted on them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
    scaling: InputScaling,
    output_map: Option<OutputMap>,
    provenance: Provenance,
    #[serde(skip)]
    normalized: Vec<Vec<f64>>,
}

fn check_rows(rows: &[Vec<f64>], what: &'static str) -> Result<usize> {
    let dim = rows.first().ok_or(Error::EmptyRegion)?.len();
    if dim == 0 {
        return Err(Error::InvalidData(format!("{what} have zero width")));
    }
    for row in rows {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                context: what,
                expected: dim,
                found: row.len(),
            });
        }
        if !row.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite entry in {what}")));
        }
    }
    Ok(dim)
}

impl TrainingSet {
    pub fn new(
        inputs: Vec<Vec<f64>>,
        targets: Vec<Vec<f64>>,
        provenance: Provenance,
    ) -> Result<Self> {
        check_rows(&inputs, "training inputs")?;
        check_rows(&targets, "training targets")?;
        if inputs.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                context: "training samples",
                expected: inputs.len(),
                found: targets.len(),
            });
        }
        let scaling = InputScaling::fit(&inputs)?;
        let normalized = inputs.iter().map(|x| scaling.apply(x)).collect();
        Ok(Self {
            inputs,
            targets,
            scaling,
            output_map: None,
            provenance,
            normalized,
        })
    }

    pub fn with_output_map(mut self, map: OutputMap) -> Result<Self> {
        let d_out = self.output_dim();
        for rows in [&map.offsets, &map.multipliers] {
            if rows.len() != self.len() {
                return Err(Error::DimensionMismatch {
                    context: "output map samples",
                    expected: self.len(),
                    found: rows.len(),
                });
            }
            if check_rows(rows, "output map")? != d_out {
                return Err(Error::DimensionMismatch {
                    context: "output map width",
                    expected: d_out,
                    found: rows[0].len(),
                });
            }
        }
        self.output_map = Some(map);
        Ok(self)
    }

    /// Rebuilds the normalized cache after deserialization.
    pub fn refresh(&mut self) {
        self.normalized = self.inputs.iter().map(|x| self.scaling.apply(x)).collect();
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn output_dim(&self) -> usize {
        self.targets[0].len()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    pub fn normalized_inputs(&self) -> &[Vec<f64>] {
        &self.normalized
    }

    pub fn scaling(&self) -> &InputScaling {
        &self.scaling
    }

    pub fn output_map(&self) -> Option<&OutputMap> {
        self.output_map.as_ref()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// `(offset, multiplier)` for sample `n`, output `o`.
    pub(crate) fn output_affine(&self, n: usize, o: usize) -> (f64, f64) {
        match &self.output_map {
            Some(m) => (m.offsets[n][o], m.multipliers[n][o]),
            None => (0.0, 1.0),
        }
    }
}
