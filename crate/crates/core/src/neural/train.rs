//! Least-squares training of an [`Mlp`] against a [`TrainingSet`].
//!
//! The default trainer is Levenberg–Marquardt. Its normal equations are built
//! from per-sample Jacobians of the last hidden layer, so the cost scales with
//! the hidden width instead of the output width. The linear output layer
//! splits into one independent block per output, which is eliminated by a
//! Schur complement before the Cholesky solve.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::data::TrainingSet;
use super::mlp::{Gradient, Mlp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Optimizer {
    LevenbergMarquardt {
        initial_damping: f64,
        decrease: f64,
        increase: f64,
        max_damping: f64,
    },
    Adam {
        learning_rate: f64,
        #[serde(default)]
        batch_size: Option<usize>,
    },
}

impl Optimizer {
    pub fn levenberg_marquardt() -> Self {
        Self::LevenbergMarquardt {
            initial_damping: 1e-3,
            decrease: 0.1,
            increase: 10.0,
            max_damping: 1e10,
        }
    }

    pub fn adam(learning_rate: f64) -> Self {
        Self::Adam {
            learning_rate,
            batch_size: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub max_epochs: usize,
    pub loss_tolerance: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::levenberg_marquardt(),
            max_epochs: 200,
            loss_tolerance: 1e-10,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = match self.optimizer {
            Optimizer::LevenbergMarquardt {
                initial_damping,
                decrease,
                increase,
                max_damping,
            } => {
                initial_damping > 0.0
                    && decrease > 0.0
                    && decrease < 1.0
                    && increase > 1.0
                    && max_damping > initial_damping
            }
            Optimizer::Adam {
                learning_rate,
                batch_size,
            } => learning_rate > 0.0 && batch_size != Some(0),
        };
        if !ok || self.loss_tolerance.is_nan() || self.loss_tolerance < 0.0 {
            return Err(Error::Config(format!("invalid training config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub final_loss: f64,
    pub epochs_used: usize,
    pub converged: bool,
    pub loss_history: Vec<f64>,
}

fn check_dims(net: &Mlp, data: &TrainingSet) -> Result<()> {
    if data.input_dim() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "training input width",
            expected: net.input_dim(),
            found: data.input_dim(),
        });
    }
    if data.output_dim() != net.output_dim() {
        return Err(Error::DimensionMismatch {
            context: "training target width",
            expected: net.output_dim(),
            found: data.output_dim(),
        });
    }
    Ok(())
}

/// Mean squared error over all samples and output components.
pub fn loss(net: &Mlp, data: &TrainingSet) -> Result<f64> {
    check_dims(net, data)?;
    Ok(loss_unchecked(net, data))
}

fn loss_unchecked(net: &Mlp, data: &TrainingSet) -> f64 {
    let mut sum = 0.0;
    for (n, (x, t)) in data.normalized_inputs().iter().zip(data.targets()).enumerate() {
        let y = net.forward_unchecked(x);
        for (o, (yo, to)) in y.iter().zip(t).enumerate() {
            let (off, mul) = data.output_affine(n, o);
            let r = off + mul * yo - to;
            sum += r * r;
        }
    }
    sum / (data.len() * data.output_dim()) as f64
}

/// Loss and its gradient by reverse-mode accumulation.
pub fn loss_and_gradient(net: &Mlp, data: &TrainingSet) -> Result<(f64, Gradient)> {
    check_dims(net, data)?;
    Ok(batch_loss_and_gradient(net, data, 0..data.len()))
}

fn batch_loss_and_gradient(
    net: &Mlp,
    data: &TrainingSet,
    samples: impl Iterator<Item = usize> + Clone,
) -> (f64, Gradient) {
    let count = samples.clone().count();
    let norm = 1.0 / (count * data.output_dim()) as f64;
    let mut grad = Gradient::zeros_like(net);
    let mut sum = 0.0;
    let mut dy = vec![0.0; data.output_dim()];
    for n in samples {
        let trace = net.trace(&data.normalized_inputs()[n]);
        let y = trace.acts.last().unwrap();
        for (o, (yo, to)) in y.iter().zip(&data.targets()[n]).enumerate() {
            let (off, mul) = data.output_affine(n, o);
            let r = off + mul * yo - to;
            sum += r * r;
            dy[o] = 2.0 * norm * r * mul;
        }
        net.backprop(&trace, &dy, &mut grad);
    }
    (sum * norm, grad)
}

/// Initializes a network from `cfg.seed` and trains it.
pub fn fit(layer_sizes: &[usize], data: &TrainingSet, cfg: &TrainConfig) -> Result<(Mlp, TrainReport)> {
    let net = Mlp::init(layer_sizes, cfg.seed)?;
    train_network(net, data, cfg)
}

pub fn train_network(net: Mlp, data: &TrainingSet, cfg: &TrainConfig) -> Result<(Mlp, TrainReport)> {
    cfg.validate()?;
    check_dims(&net, data)?;
    net.validate()?;
    match cfg.optimizer {
        Optimizer::LevenbergMarquardt {
            initial_damping,
            decrease,
            increase,
            max_damping,
        } => levenberg_marquardt(
            net,
            data,
            cfg,
            Damping {
                initial: initial_damping,
                decrease,
                increase,
                max: max_damping,
            },
        ),
        Optimizer::Adam {
            learning_rate,
            batch_size,
        } => adam(net, data, cfg, learning_rate, batch_size),
    }
}

struct Damping {
    initial: f64,
    decrease: f64,
    increase: f64,
    max: f64,
}

fn levenberg_marquardt(
    mut net: Mlp,
    data: &TrainingSet,
    cfg: &TrainConfig,
    damping: Damping,
) -> Result<(Mlp, TrainReport)> {
    let mut current = loss_unchecked(&net, data);
    let mut history = vec![current];
    if !current.is_finite() {
        return Err(Error::Diverged {
            loss_history: history,
        });
    }
    let mut lambda = damping.initial;
    let mut epochs = 0;
    let mut stalled = false;
    while current > cfg.loss_tolerance && epochs < cfg.max_epochs && !stalled {
        epochs += 1;
        let system = NormalEquations::assemble(&net, data);
        let params = net.params();
        loop {
            let accepted = system.step(lambda).and_then(|step| {
                let trial: Vec<f64> = params.iter().zip(&step).map(|(p, d)| p + d).collect();
                let mut candidate = net.clone();
                candidate.set_params(&trial).ok()?;
                let l = loss_unchecked(&candidate, data);
                (l.is_finite() && l < current).then_some((candidate, l))
            });
            match accepted {
                Some((candidate, l)) => {
                    net = candidate;
                    current = l;
                    lambda = (lambda * damping.decrease).max(f64::MIN_POSITIVE);
                    break;
                }
                None => {
                    lambda *= damping.increase;
                    if lambda > damping.max {
                        stalled = true;
                        break;
                    }
                }
            }
        }
        history.push(current);
    }
    Ok((
        net,
        TrainReport {
            final_loss: current,
            epochs_used: epochs,
            converged: current <= cfg.loss_tolerance,
            loss_history: history,
        },
    ))
}

/// `JᵀJ` and `Jᵀr` for the residuals `offset + multiplier·y − target`, split
/// into hidden parameters and one block per output unit.
struct NormalEquations {
    /// Flat offsets of each hidden layer's parameters.
    hidden_len: usize,
    /// Width of one output block: last hidden width + bias.
    block: usize,
    n_out: usize,
    hh: DMatrix<f64>,
    /// `n_out` blocks of `block × hidden_len`.
    oh: Vec<DMatrix<f64>>,
    oo: Vec<DMatrix<f64>>,
    g_h: DVector<f64>,
    g_o: Vec<DVector<f64>>,
    out_weight_offset: usize,
}

impl NormalEquations {
    fn assemble(net: &Mlp, data: &TrainingSet) -> Self {
        let sizes = net.layer_sizes();
        let n_layers = net.n_layers();
        let last = n_layers - 1;
        let n_out = net.output_dim();
        let h_last = sizes[last];
        let block = h_last + 1;

        // flat offsets of hidden layers
        let mut offsets = Vec::with_capacity(last);
        let mut hidden_len = 0;
        for l in 0..last {
            offsets.push(hidden_len);
            hidden_len += sizes[l] * sizes[l + 1] + sizes[l + 1];
        }

        let w_out = &net.weights()[last];
        let rows_per_sample = if last == 0 { 0 } else { n_out.min(h_last) };
        // column c of `stack_t` is row c of the stacked Jacobian factor
        let mut stack_t = DMatrix::<f64>::zeros(hidden_len, data.len() * rows_per_sample);
        // row-major n_out × block × hidden_len
        let mut oh_buf = vec![0.0; n_out * block * hidden_len];
        let mut oo = vec![DMatrix::<f64>::zeros(block, block); n_out];
        let mut g_h = DVector::<f64>::zeros(hidden_len);
        let mut g_o = vec![DVector::<f64>::zeros(block); n_out];

        let mut b = vec![0.0; h_last * hidden_len];
        let mut k = vec![0.0; n_out * hidden_len];
        let mut a_ext = vec![1.0; block];
        let mut scaled = vec![0.0; n_out];
        let mut weighted = vec![0.0; n_out];

        for (n, x) in data.normalized_inputs().iter().enumerate() {
            let trace = net.trace(x);
            let y = &trace.acts[n_layers];
            a_ext[..h_last].copy_from_slice(&trace.acts[last]);
            for o in 0..n_out {
                let (off, mul) = data.output_affine(n, o);
                let r = off + mul * y[o] - data.targets()[n][o];
                scaled[o] = mul;
                weighted[o] = mul * r;
            }

            // output blocks
            for o in 0..n_out {
                let s2 = scaled[o] * scaled[o];
                let blk = &mut oo[o];
                for i in 0..block {
                    for j in 0..block {
                        blk[(i, j)] += s2 * a_ext[i] * a_ext[j];
                    }
                }
                for i in 0..block {
                    g_o[o][i] += weighted[o] * a_ext[i];
                }
            }
            if last == 0 {
                continue;
            }

            // b = ∂a_last/∂θ_hidden, row-major h_last × hidden_len
            b.iter_mut().for_each(|v| *v = 0.0);
            let mut e: Vec<f64> = vec![0.0; h_last * h_last];
            for (i, a) in trace.acts[last].iter().enumerate() {
                e[i * h_last + i] = a * (1.0 - a);
            }
            let mut e_cols = h_last;
            for l in (0..last).rev() {
                let n_in = sizes[l];
                let a_in = &trace.acts[l];
                let base = offsets[l];
                for row in 0..h_last {
                    let brow = &mut b[row * hidden_len..(row + 1) * hidden_len];
                    for i in 0..e_cols {
                        let eri = e[row * e_cols + i];
                        if eri == 0.0 {
                            continue;
                        }
                        let wslot = &mut brow[base + i * n_in..base + (i + 1) * n_in];
                        for (w, a) in wslot.iter_mut().zip(a_in) {
                            *w = eri * a;
                        }
                        brow[base + e_cols * n_in + i] = eri;
                    }
                }
                if l == 0 {
                    break;
                }
                // e ← e · W_l · diag(σ'(z_{l-1}))
                let w = &net.weights()[l];
                let mut next = vec![0.0; h_last * n_in];
                for row in 0..h_last {
                    for i in 0..e_cols {
                        let eri = e[row * e_cols + i];
                        if eri == 0.0 {
                            continue;
                        }
                        let wrow = &w[i * n_in..(i + 1) * n_in];
                        let nrow = &mut next[row * n_in..(row + 1) * n_in];
                        for (nv, wv) in nrow.iter_mut().zip(wrow) {
                            *nv += eri * wv;
                        }
                    }
                }
                for row in 0..h_last {
                    for (j, a) in a_in.iter().enumerate() {
                        next[row * n_in + j] *= a * (1.0 - a);
                    }
                }
                e = next;
                e_cols = n_in;
            }

            // k = W_out · b
            k.iter_mut().for_each(|v| *v = 0.0);
            for o in 0..n_out {
                let krow = &mut k[o * hidden_len..(o + 1) * hidden_len];
                for h in 0..h_last {
                    let w = w_out[o * h_last + h];
                    if w == 0.0 {
                        continue;
                    }
                    for (kv, bv) in krow.iter_mut().zip(&b[h * hidden_len..(h + 1) * hidden_len]) {
                        *kv += w * bv;
                    }
                }
            }

            for o in 0..n_out {
                let krow = &k[o * hidden_len..(o + 1) * hidden_len];
                for (g, kv) in g_h.iter_mut().zip(krow) {
                    *g += weighted[o] * kv;
                }
                let s2 = scaled[o] * scaled[o];
                for i in 0..block {
                    let c = s2 * a_ext[i];
                    if c == 0.0 {
                        continue;
                    }
                    let start = (o * block + i) * hidden_len;
                    for (v, kv) in oh_buf[start..start + hidden_len].iter_mut().zip(krow) {
                        *v += c * kv;
                    }
                }
            }

            // rows whose Gram matrix is Σ_o s_o² k_oᵀ k_o
            let row0 = n * rows_per_sample;
            if n_out <= h_last {
                for o in 0..n_out {
                    let krow = &k[o * hidden_len..(o + 1) * hidden_len];
                    for (v, kv) in stack_t.column_mut(row0 + o).iter_mut().zip(krow) {
                        *v = scaled[o] * kv;
                    }
                }
            } else {
                let mut m = DMatrix::<f64>::zeros(h_last, h_last);
                for o in 0..n_out {
                    let s2 = scaled[o] * scaled[o];
                    for i in 0..h_last {
                        for j in 0..h_last {
                            m[(i, j)] += s2 * w_out[o * h_last + i] * w_out[o * h_last + j];
                        }
                    }
                }
                match m.clone().cholesky() {
                    Some(ch) => {
                        // m = L Lᵀ, rows of Lᵀ b
                        let l = ch.l();
                        for r in 0..h_last {
                            let mut dst = stack_t.column_mut(row0 + r);
                            for h in r..h_last {
                                let c = l[(h, r)];
                                for (v, bv) in dst.iter_mut().zip(&b[h * hidden_len..(h + 1) * hidden_len]) {
                                    *v += c * bv;
                                }
                            }
                        }
                    }
                    None => {
                        // rank-deficient output weights: eigen-decomposition
                        let eig = m.symmetric_eigen();
                        for r in 0..h_last {
                            let sv = eig.eigenvalues[r].max(0.0).sqrt();
                            let mut dst = stack_t.column_mut(row0 + r);
                            for h in 0..h_last {
                                let c = sv * eig.eigenvectors[(h, r)];
                                for (v, bv) in dst.iter_mut().zip(&b[h * hidden_len..(h + 1) * hidden_len]) {
                                    *v += c * bv;
                                }
                            }
                        }
                    }
                }
            }
        }

        let hh = &stack_t * stack_t.transpose();
        let oh = (0..n_out)
            .map(|o| {
                let c = &oh_buf[o * block * hidden_len..(o + 1) * block * hidden_len];
                DMatrix::from_row_slice(block, hidden_len, c)
            })
            .collect();
        let out_weight_offset = hidden_len;
        Self {
            hidden_len,
            block,
            n_out,
            hh,
            oh,
            oo,
            g_h,
            g_o,
            out_weight_offset,
        }
    }

    /// Solves `(JᵀJ + λI) δ = −Jᵀr` and returns δ in flat parameter order.
    fn step(&self, lambda: f64) -> Option<Vec<f64>> {
        let (hl, block, n_out) = (self.hidden_len, self.block, self.n_out);
        let mut factors = Vec::with_capacity(n_out);
        for blk in &self.oo {
            let mut a = blk.clone();
            for i in 0..block {
                a[(i, i)] += lambda;
            }
            factors.push(a.cholesky()?);
        }

        let mut delta_h = DVector::<f64>::zeros(hl);
        if hl > 0 {
            // Schur complement on the output blocks
            let mut reduced = self.hh.clone();
            for i in 0..hl {
                reduced[(i, i)] += lambda;
            }
            let mut rhs = -&self.g_h;
            let mut y = DMatrix::<f64>::zeros(n_out * block, hl);
            for o in 0..n_out {
                let l = factors[o].l();
                let yo = l.solve_lower_triangular(&self.oh[o])?;
                y.rows_mut(o * block, block).copy_from(&yo);
                let z = factors[o].solve(&self.g_o[o]);
                rhs += self.oh[o].tr_mul(&z);
            }
            reduced -= y.transpose() * &y;
            delta_h = reduced.cholesky()?.solve(&rhs);
        }

        let out_len = n_out * block;
        let mut flat = vec![0.0; self.out_weight_offset + out_len];
        flat[..hl].copy_from_slice(delta_h.as_slice());
        let h_last = block - 1;
        for o in 0..n_out {
            let rhs = -&self.g_o[o] - &self.oh[o] * &delta_h;
            let d = factors[o].solve(&rhs);
            let base = self.out_weight_offset;
            for h in 0..h_last {
                flat[base + o * h_last + h] = d[h];
            }
            flat[base + n_out * h_last + o] = d[h_last];
        }
        flat.iter().all(|v| v.is_finite()).then_some(flat)
    }
}

fn adam(
    mut net: Mlp,
    data: &TrainingSet,
    cfg: &TrainConfig,
    learning_rate: f64,
    batch_size: Option<usize>,
) -> Result<(Mlp, TrainReport)> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = data.len();
    let batch = batch_size.unwrap_or(n).min(n);
    let mut params = net.params();
    let mut m = vec![0.0; params.len()];
    let mut v = vec![0.0; params.len()];
    let mut step = 0i32;

    let mut current = loss_unchecked(&net, data);
    let mut history = vec![current];
    if !current.is_finite() {
        return Err(Error::Diverged {
            loss_history: history,
        });
    }
    let mut best = (current, net.clone());
    let mut order: Vec<usize> = (0..n).collect();
    let mut epochs = 0;
    while current > cfg.loss_tolerance && epochs < cfg.max_epochs {
        epochs += 1;
        if batch < n {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            let (_, grad) = batch_loss_and_gradient(&net, data, chunk.iter().copied());
            step += 1;
            let c1 = 1.0 - BETA1.powi(step);
            let c2 = 1.0 - BETA2.powi(step);
            for (((p, g), mi), vi) in params
                .iter_mut()
                .zip(grad.flatten())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *mi = BETA1 * *mi + (1.0 - BETA1) * g;
                *vi = BETA2 * *vi + (1.0 - BETA2) * g * g;
                *p -= learning_rate * (*mi / c1) / ((*vi / c2).sqrt() + EPS);
            }
            net.set_params(&params)?;
        }
        current = loss_unchecked(&net, data);
        history.push(current);
        if !current.is_finite() {
            return Err(Error::Diverged {
                loss_history: history,
            });
        }
        if current < best.0 {
            best = (current, net.clone());
        }
    }
    // keep the best iterate so the final loss never exceeds the initial one
    if best.0 < current {
        current = best.0;
        net = best.1;
        history.push(current);
    }
    Ok((
        net,
        TrainReport {
            final_loss: current,
            epochs_used: epochs,
            converged: current <= cfg.loss_tolerance,
            loss_history: history,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::super::data::{OutputMap, Provenance};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_set(d_in: usize, d_out: usize, n: usize, seed: u64, mapped: bool) -> TrainingSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut row = |d: usize| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let inputs = (0..n).map(|_| row(d_in)).collect();
        let targets = (0..n).map(|_| row(d_out)).collect();
        let offsets = (0..n).map(|_| row(d_out)).collect();
        let multipliers = (0..n).map(|_| row(d_out)).collect();
        let set = TrainingSet::new(inputs, targets, Provenance::AdvdiffLocal).unwrap();
        if mapped {
            set.with_output_map(OutputMap {
                offsets,
                multipliers,
            })
            .unwrap()
        } else {
            set
        }
    }

    fn fd_gradient(net: &Mlp, data: &TrainingSet, eps: f64) -> Vec<f64> {
        let p = net.params();
        let mut probe = net.clone();
        (0..p.len())
            .map(|i| {
                let mut q = p.clone();
                q[i] = p[i] + eps;
                probe.set_params(&q).unwrap();
                let up = loss(&probe, data).unwrap();
                q[i] = p[i] - eps;
                probe.set_params(&q).unwrap();
                let down = loss(&probe, data).unwrap();
                (up - down) / (2.0 * eps)
            })
            .collect()
    }

    fn assert_grad_close(analytic: &[f64], fd: &[f64], rel: f64) {
        let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        for (i, (a, f)) in analytic.iter().zip(fd).enumerate() {
            let err = (a - f).abs() / (f.abs().max(scale * 1e-3));
            assert!(err <= rel, "component {i}: analytic {a} vs fd {f}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for hidden in [vec![5], vec![10], vec![10, 10], vec![10, 10, 10]] {
            let mut sizes = vec![4];
            sizes.extend(&hidden);
            sizes.push(3);
            let net = Mlp::init(&sizes, 5).unwrap();
            let data = random_set(4, 3, 9, 2, false);
            let (_, g) = loss_and_gradient(&net, &data).unwrap();
            assert_grad_close(&g.flatten(), &fd_gradient(&net, &data, 1e-6), 1e-5);
        }
    }

    #[test]
    fn gradient_with_output_map() {
        let net = Mlp::init(&[2, 6, 1], 3).unwrap();
        let data = random_set(2, 1, 12, 4, true);
        let (_, g) = loss_and_gradient(&net, &data).unwrap();
        assert_grad_close(&g.flatten(), &fd_gradient(&net, &data, 1e-6), 1e-5);
    }

    #[test]
    fn normal_equations_gradient_matches_backprop() {
        for (sizes, mapped) in [
            (vec![3, 4, 5], false),
            (vec![3, 6, 2], true),
            (vec![3, 4, 3, 2], false),
            (vec![2, 2, 5], true),
            (vec![3, 2], false),
        ] {
            let net = Mlp::init(&sizes, 8).unwrap();
            let data = random_set(sizes[0], *sizes.last().unwrap(), 7, 6, mapped);
            let sys = NormalEquations::assemble(&net, &data);
            let (_, g) = loss_and_gradient(&net, &data).unwrap();
            let scale = 2.0 / (data.len() * data.output_dim()) as f64;
            let g = g.flatten();
            let h_last = sizes[sizes.len() - 2];
            for (i, v) in sys.g_h.iter().enumerate() {
                assert!((scale * v - g[i]).abs() < 1e-12);
            }
            for o in 0..sys.n_out {
                for h in 0..h_last {
                    let flat = sys.out_weight_offset + o * h_last + h;
                    assert!((scale * sys.g_o[o][h] - g[flat]).abs() < 1e-12);
                }
                let flat = sys.out_weight_offset + sys.n_out * h_last + o;
                assert!((scale * sys.g_o[o][h_last] - g[flat]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn damped_step_solves_full_normal_equations() {
        // dense JᵀJ from finite-difference-free forward Jacobian
        let sizes = [3, 4, 3, 2];
        let net = Mlp::init(&sizes, 2).unwrap();
        let data = random_set(3, 2, 6, 1, true);
        let p = net.params();
        let np = p.len();
        let eps = 1e-7;
        let residuals = |q: &[f64]| -> Vec<f64> {
            let mut m = net.clone();
            m.set_params(q).unwrap();
            let mut r = Vec::new();
            for (n, x) in data.normalized_inputs().iter().enumerate() {
                let y = m.forward(x).unwrap();
                for o in 0..2 {
                    let (off, mul) = data.output_affine(n, o);
                    r.push(off + mul * y[o] - data.targets()[n][o]);
                }
            }
            r
        };
        let r0 = residuals(&p);
        let mut jac = DMatrix::<f64>::zeros(r0.len(), np);
        for j in 0..np {
            let mut up = p.clone();
            up[j] += eps;
            let mut dn = p.clone();
            dn[j] -= eps;
            let (ru, rd) = (residuals(&up), residuals(&dn));
            for i in 0..r0.len() {
                jac[(i, j)] = (ru[i] - rd[i]) / (2.0 * eps);
            }
        }
        let lambda = 0.3;
        let a = jac.tr_mul(&jac) + DMatrix::<f64>::identity(np, np) * lambda;
        let b = -jac.tr_mul(&DVector::from_vec(r0));
        let expected = a.lu().solve(&b).unwrap();
        let step = NormalEquations::assemble(&net, &data).step(lambda).unwrap();
        for (s, e) in step.iter().zip(expected.iter()) {
            assert!((s - e).abs() < 1e-6, "{s} vs {e}");
        }
    }

    #[test]
    fn duplicating_samples_changes_nothing() {
        let net = Mlp::init(&[3, 5, 2], 1).unwrap();
        let data = random_set(3, 2, 6, 9, false);
        let doubled = TrainingSet::new(
            data.inputs().iter().chain(data.inputs()).cloned().collect(),
            data.targets().iter().chain(data.targets()).cloned().collect(),
            Provenance::AdvdiffLocal,
        )
        .unwrap();
        let (l1, g1) = loss_and_gradient(&net, &data).unwrap();
        let (l2, g2) = loss_and_gradient(&net, &doubled).unwrap();
        assert!((l1 - l2).abs() < 1e-15);
        for (a, b) in g1.flatten().iter().zip(g2.flatten()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn perfect_targets_have_zero_loss_and_gradient() {
        let net = Mlp::init(&[3, 5, 2], 1).unwrap();
        let base = random_set(3, 2, 6, 9, false);
        let targets = base
            .normalized_inputs()
            .iter()
            .map(|x| net.forward(x).unwrap())
            .collect();
        let data = TrainingSet::new(base.inputs().to_vec(), targets, Provenance::AdvdiffLocal).unwrap();
        let (l, g) = loss_and_gradient(&net, &data).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.flatten().iter().all(|v| *v == 0.0));
    }

    fn linear_set() -> TrainingSet {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
        TrainingSet::new(
            xs.iter().map(|x| vec![*x]).collect(),
            xs.iter().map(|x| vec![2.0 * x]).collect(),
            Provenance::AdvdiffLocal,
        )
        .unwrap()
    }

    #[test]
    fn lm_fits_linear_map() {
        let cfg = TrainConfig {
            max_epochs: 200,
            loss_tolerance: 1e-12,
            ..TrainConfig::default()
        };
        let (_, report) = fit(&[1, 5, 1], &linear_set(), &cfg).unwrap();
        assert!(report.final_loss < 1e-6, "{report:?}");
        assert_eq!(report.final_loss, *report.loss_history.last().unwrap());
        for w in report.loss_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn adam_reduces_loss() {
        let cfg = TrainConfig {
            optimizer: Optimizer::adam(0.05),
            max_epochs: 2000,
            loss_tolerance: 1e-6,
            seed: 4,
        };
        let (_, report) = fit(&[1, 5, 1], &linear_set(), &cfg).unwrap();
        assert!(report.final_loss < 1e-4, "{}", report.final_loss);
        assert!(report.final_loss <= report.loss_history[0]);
    }

    #[test]
    fn infinite_tolerance_stops_immediately() {
        let cfg = TrainConfig {
            loss_tolerance: f64::INFINITY,
            ..TrainConfig::default()
        };
        let (_, report) = fit(&[1, 5, 1], &linear_set(), &cfg).unwrap();
        assert!(report.epochs_used <= 1);
        assert!(report.converged);
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = TrainConfig {
            max_epochs: 20,
            ..TrainConfig::default()
        };
        let data = random_set(3, 2, 10, 3, false);
        let (n1, r1) = fit(&[3, 4, 2], &data, &cfg).unwrap();
        let (n2, r2) = fit(&[3, 4, 2], &data, &cfg).unwrap();
        assert_eq!(n1, n2);
        assert_eq!(r1, r2);
    }

    #[test]
    fn non_finite_loss_reports_divergence() {
        let mut net = Mlp::init(&[1, 2, 1], 1).unwrap();
        net.biases_mut()[1][0] = f64::MAX;
        net.weights_mut()[1][0] = f64::MAX;
        net.weights_mut()[1][1] = f64::MAX;
        let err = loss_unchecked(&net, &linear_set());
        assert!(!err.is_finite());
        let cfg = TrainConfig::default();
        // parameters are finite, loss overflows
        let result = levenberg_marquardt(
            net,
            &linear_set(),
            &cfg,
            Damping {
                initial: 1e-3,
                decrease: 0.1,
                increase: 10.0,
                max: 1e10,
            },
        );
        assert!(matches!(result, Err(Error::Diverged { .. })));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let net = Mlp::init(&[2, 3, 1], 1).unwrap();
        assert!(loss_and_gradient(&net, &linear_set()).is_err());
        assert!(train_network(net, &linear_set(), &TrainConfig::default()).is_err());
    }
}
