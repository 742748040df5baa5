use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Feedforward network: sigmoid hidden layers, linear output layer.
///
/// `weights[l]` is the row-major `layer_sizes[l+1] × layer_sizes[l]` matrix of
/// layer `l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

/// Same layout as the parameters of an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradient {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        flatten(&self.weights, &self.biases)
    }
}

fn flatten(weights: &[Vec<f64>], biases: &[Vec<f64>]) -> Vec<f64> {
    let mut out = Vec::new();
    for (w, b) in weights.iter().zip(biases) {
        out.extend_from_slice(w);
        out.extend_from_slice(b);
    }
    out
}

fn validate_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::Config(format!(
            "need at least input and output sizes, got {layer_sizes:?}"
        )));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::Config(format!(
            "layer sizes must be positive, got {layer_sizes:?}"
        )));
    }
    Ok(())
}

/// Activations of one forward pass, kept for backpropagation.
pub(crate) struct Trace {
    /// `acts[0]` is the input, `acts[l+1]` the output of layer `l`.
    pub acts: Vec<Vec<f64>>,
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-r..=r))
                    .collect(),
            );
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        })
    }

    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights: layer_sizes
                .windows(2)
                .map(|p| vec![0.0; p[0] * p[1]])
                .collect(),
            biases: layer_sizes[1..].iter().map(|&n| vec![0.0; n]).collect(),
        })
    }

    pub fn from_parts(
        layer_sizes: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        validate_sizes(&layer_sizes)?;
        let net = Self {
            layer_sizes,
            weights,
            biases,
        };
        net.validate()?;
        Ok(net)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        validate_sizes(&self.layer_sizes)?;
        let layers = self.layer_sizes.len() - 1;
        if self.weights.len() != layers || self.biases.len() != layers {
            return Err(Error::DimensionMismatch {
                context: "number of layers",
                expected: layers,
                found: self.weights.len().min(self.biases.len()),
            });
        }
        for (l, pair) in self.layer_sizes.windows(2).enumerate() {
            if self.weights[l].len() != pair[0] * pair[1] {
                return Err(Error::DimensionMismatch {
                    context: "weight matrix",
                    expected: pair[0] * pair[1],
                    found: self.weights[l].len(),
                });
            }
            if self.biases[l].len() != pair[1] {
                return Err(Error::DimensionMismatch {
                    context: "bias vector",
                    expected: pair[1],
                    found: self.biases[l].len(),
                });
            }
        }
        if !self.params().iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidData("non-finite network parameter".into()));
        }
        Ok(())
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Number of weight layers (hidden layers + output layer).
    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.biases
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Layer by layer: row-major weights, then biases.
    pub fn params(&self) -> Vec<f64> {
        flatten(&self.weights, &self.biases)
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                context: "flat parameter vector",
                expected: self.n_params(),
                found: flat.len(),
            });
        }
        let mut offset = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let (nw, nb) = (w.len(), b.len());
            w.copy_from_slice(&flat[offset..offset + nw]);
            offset += nw;
            b.copy_from_slice(&flat[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "network input",
                expected: self.input_dim(),
                found: input.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        Ok(self.forward_unchecked(input))
    }

    pub(crate) fn forward_unchecked(&self, input: &[f64]) -> Vec<f64> {
        let last = self.n_layers() - 1;
        let mut h = input.to_vec();
        for l in 0..=last {
            h = self.layer(l, &h, l < last);
        }
        h
    }

    fn layer(&self, l: usize, input: &[f64], hidden: bool) -> Vec<f64> {
        let n_in = self.layer_sizes[l];
        self.weights[l]
            .chunks_exact(n_in)
            .zip(&self.biases[l])
            .map(|(row, b)| {
                let z = row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b;
                if hidden {
                    sigmoid(z)
                } else {
                    z
                }
            })
            .collect()
    }

    pub(crate) fn trace(&self, input: &[f64]) -> Trace {
        let last = self.n_layers() - 1;
        let mut acts = Vec::with_capacity(last + 2);
        acts.push(input.to_vec());
        for l in 0..=last {
            let next = self.layer(l, &acts[l], l < last);
            acts.push(next);
        }
        Trace { acts }
    }

    /// Accumulates `∂(Σ_o dy_o · y_o)/∂θ` into `grad` by reverse-mode sweep.
    pub(crate) fn backprop(&self, trace: &Trace, dy: &[f64], grad: &mut Gradient) {
        let last = self.n_layers() - 1;
        let mut delta = dy.to_vec();
        for l in (0..=last).rev() {
            let n_in = self.layer_sizes[l];
            let a_in = &trace.acts[l];
            for (i, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                grad.biases[l][i] += d;
                let row = &mut grad.weights[l][i * n_in..(i + 1) * n_in];
                for (g, a) in row.iter_mut().zip(a_in) {
                    *g += d * a;
                }
            }
            if l == 0 {
                break;
            }
            let mut prev = vec![0.0; n_in];
            for (i, d) in delta.iter().enumerate() {
                let row = &self.weights[l][i * n_in..(i + 1) * n_in];
                for (p, w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            for (p, a) in prev.iter_mut().zip(a_in) {
                *p *= a * (1.0 - a);
            }
            delta = prev;
        }
    }
}
