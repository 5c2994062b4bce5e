//! Dense feedforward classifier over bag-of-words counts.
//!
//! Inputs are sparse count vectors, transformed with `ln(1 + count)`. Hidden
//! layers use ReLU followed by inverted dropout; the output is a softmax over
//! classes, trained with categorical cross-entropy and Adam.

mod io;
mod train;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{map_ordered, Execution};
use crate::features::{DocumentVector, LabeledDataset};

pub use io::{load_params, load_params_for, read_params, save_params, write_params, PARAMS_MAGIC};
pub use train::{train, Adam, EpochRecord, TrainReport};

/// Lower clamp on probabilities inside the log of the loss.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid network config: {0}")]
    Config(String),
    #[error("shape mismatch for {what}: expected {expected}, got {actual}")]
    Shape {
        what: String,
        expected: usize,
        actual: usize,
    },
    #[error("numerical overflow")]
    Numerical,
    #[error("training diverged at epoch {epoch} (last finite epoch {last_finite_epoch})")]
    Divergence {
        epoch: usize,
        last_finite_epoch: usize,
    },
    #[error("empty dataset: {0}")]
    EmptyDataset(&'static str),
    #[error("corrupt parameter file: {0}")]
    Corrupt(String),
    #[error("failed to access {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            input_dim: 0,
            hidden_dims: vec![16, 16, 16],
            output_dim: 0,
            dropout_rate: 0.2,
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 200,
            patience: 10,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

impl NetworkConfig {
    pub fn new(input_dim: usize, output_dim: usize, seed: u64) -> Self {
        NetworkConfig {
            input_dim,
            output_dim,
            seed,
            ..Default::default()
        }
    }

    /// Layer widths from input to output.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim];
        dims.extend(&self.hidden_dims);
        dims.push(self.output_dim);
        dims
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.dims().contains(&0) {
            return Err(NetError::Config(format!("layer widths must be positive: {:?}", self.dims())));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(NetError::Config(format!("dropout_rate {} not in [0, 1)", self.dropout_rate)));
        }
        if self.patience < 1 {
            return Err(NetError::Config("patience must be at least 1".into()));
        }
        if self.batch_size < 1 {
            return Err(NetError::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NetError::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// One fully connected layer; `weights` is row-major `n_out x n_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Layer {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            biases: vec![0.0; n_out],
        }
    }

    #[inline]
    pub fn w(&self, out: usize, inp: usize) -> f64 {
        self.weights[out * self.n_in + inp]
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(&self.biases)
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.biases.iter_mut())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub layers: Vec<Layer>,
    /// Seed the parameters were initialized from.
    pub seed: u64,
}

/// Gradients share the parameter layout.
pub type Gradients = NetworkParams;

impl NetworkParams {
    pub fn zeros_like(&self) -> Self {
        NetworkParams {
            layers: self.layers.iter().map(|l| Layer::zeros(l.n_in, l.n_out)).collect(),
            seed: self.seed,
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(|l| l.n_out));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.n_in)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.n_out)
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// All weights then biases, layer by layer.
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(Layer::values)
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(Layer::values_mut)
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|v| v.is_finite())
    }

    fn scale(&mut self, factor: f64) {
        self.values_mut().for_each(|v| *v *= factor);
    }
}

/// Uniform weights in `±sqrt(6 / fan_in)`, zero biases, drawn from `seed`.
pub fn init_params(config: &NetworkConfig) -> Result<NetworkParams, NetError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dims = config.dims();
    let layers = dims
        .windows(2)
        .map(|pair| {
            let (n_in, n_out) = (pair[0], pair[1]);
            let limit = (6.0 / n_in as f64).sqrt();
            let mut layer = Layer::zeros(n_in, n_out);
            for w in &mut layer.weights {
                *w = rng.gen_range(-limit..=limit);
            }
            layer
        })
        .collect();
    Ok(NetworkParams {
        layers,
        seed: config.seed,
    })
}

/// Log-scaled sparse input: `values[k] = ln(1 + count)` at `indices[k]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseInput {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseInput {
    pub fn from_counts(doc: &DocumentVector) -> Self {
        let (indices, values) = doc
            .counts
            .iter()
            .map(|(&i, &c)| (i, (c as f64).ln_1p()))
            .unzip();
        SparseInput { indices, values }
    }

    /// From a dense count vector; zero entries are skipped.
    pub fn from_dense(counts: &[f64]) -> Self {
        let (indices, values) = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(i, &c)| (i, c.ln_1p()))
            .unzip();
        SparseInput { indices, values }
    }

    fn max_index(&self) -> Option<usize> {
        self.indices.iter().copied().max()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Infer,
    Train { dropout_rate: f64 },
}

/// Intermediate values of one forward pass, kept for backpropagation.
struct Trace {
    /// Pre-activations per layer.
    pre: Vec<Vec<f64>>,
    /// Hidden outputs after ReLU and dropout.
    hidden: Vec<Vec<f64>>,
    /// Per-unit dropout factor (0 or 1/(1-p)) for each hidden layer.
    masks: Vec<Option<Vec<f64>>>,
    probs: Vec<f64>,
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn check_input(params: &NetworkParams, x: &SparseInput) -> Result<(), NetError> {
    match x.max_index() {
        Some(i) if i >= params.input_dim() => Err(NetError::Shape {
            what: "input index bound".into(),
            expected: params.input_dim(),
            actual: i + 1,
        }),
        _ => Ok(()),
    }
}

fn forward_trace<R: Rng>(
    params: &NetworkParams,
    x: &SparseInput,
    mode: Mode,
    rng: &mut R,
) -> Result<Trace, NetError> {
    let n_layers = params.layers.len();
    let mut pre = Vec::with_capacity(n_layers);
    let mut hidden: Vec<Vec<f64>> = Vec::with_capacity(n_layers - 1);
    let mut masks = Vec::with_capacity(n_layers - 1);

    for (l, layer) in params.layers.iter().enumerate() {
        let mut z = layer.biases.clone();
        if l == 0 {
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &layer.weights[o * layer.n_in..(o + 1) * layer.n_in];
                for (&i, &v) in x.indices.iter().zip(&x.values) {
                    *zo += row[i] * v;
                }
            }
        } else {
            let input = &hidden[l - 1];
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &layer.weights[o * layer.n_in..(o + 1) * layer.n_in];
                *zo += row.iter().zip(input).map(|(w, a)| w * a).sum::<f64>();
            }
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(NetError::Numerical);
        }
        if l + 1 < n_layers {
            let mut a: Vec<f64> = z.iter().map(|&v| v.max(0.0)).collect();
            let mask = match mode {
                Mode::Train { dropout_rate } if dropout_rate > 0.0 => {
                    let keep = 1.0 / (1.0 - dropout_rate);
                    let m: Vec<f64> = (0..a.len())
                        .map(|_| if rng.gen::<f64>() < dropout_rate { 0.0 } else { keep })
                        .collect();
                    a.iter_mut().zip(&m).for_each(|(ai, mi)| *ai *= mi);
                    Some(m)
                }
                _ => None,
            };
            hidden.push(a);
            masks.push(mask);
        }
        pre.push(z);
    }
    let probs = softmax(pre.last().expect("at least one layer"));
    if probs.iter().any(|p| !p.is_finite()) {
        return Err(NetError::Numerical);
    }
    Ok(Trace {
        pre,
        hidden,
        masks,
        probs,
    })
}

/// Class probabilities for a dense count vector of length V.
pub fn forward<R: Rng>(
    params: &NetworkParams,
    x: &[f64],
    mode: Mode,
    rng: &mut R,
) -> Result<Vec<f64>, NetError> {
    if x.len() != params.input_dim() {
        return Err(NetError::Shape {
            what: "input length".into(),
            expected: params.input_dim(),
            actual: x.len(),
        });
    }
    forward_sparse(params, &SparseInput::from_dense(x), mode, rng)
}

pub fn forward_sparse<R: Rng>(
    params: &NetworkParams,
    x: &SparseInput,
    mode: Mode,
    rng: &mut R,
) -> Result<Vec<f64>, NetError> {
    check_input(params, x)?;
    Ok(forward_trace(params, x, mode, rng)?.probs)
}

/// Categorical cross-entropy `-ln(max(p[true], 1e-12))`.
pub fn loss(probs: &[f64], true_class: usize) -> f64 {
    -probs[true_class].max(PROB_FLOOR).ln()
}

fn backward(params: &NetworkParams, x: &SparseInput, trace: &Trace, label: usize, grads: &mut Gradients) {
    let n_layers = params.layers.len();
    let mut delta: Vec<f64> = trace.probs.clone();
    delta[label] -= 1.0;

    for l in (0..n_layers).rev() {
        let layer = &params.layers[l];
        let g = &mut grads.layers[l];
        for (o, &d) in delta.iter().enumerate() {
            g.biases[o] += d;
            if d == 0.0 {
                continue;
            }
            let row = &mut g.weights[o * layer.n_in..(o + 1) * layer.n_in];
            if l == 0 {
                for (&i, &v) in x.indices.iter().zip(&x.values) {
                    row[i] += d * v;
                }
            } else {
                for (gw, a) in row.iter_mut().zip(&trace.hidden[l - 1]) {
                    *gw += d * a;
                }
            }
        }
        if l == 0 {
            break;
        }
        // propagate through ReLU and the dropout mask of layer l - 1
        let z_prev = &trace.pre[l - 1];
        let mask = &trace.masks[l - 1];
        let mut prev = vec![0.0; layer.n_in];
        for (j, p) in prev.iter_mut().enumerate() {
            if z_prev[j] <= 0.0 {
                continue;
            }
            let factor = mask.as_ref().map_or(1.0, |m| m[j]);
            if factor == 0.0 {
                continue;
            }
            let back: f64 = delta.iter().enumerate().map(|(o, d)| d * layer.w(o, j)).sum();
            *p = back * factor;
        }
        delta = prev;
    }
}

/// Mean loss and its exact gradient over a batch. The dropout mask drawn in
/// the forward pass is reused in the backward pass.
pub fn loss_and_gradients<R: Rng>(
    params: &NetworkParams,
    batch: &[(&SparseInput, usize)],
    mode: Mode,
    rng: &mut R,
) -> Result<(f64, Gradients), NetError> {
    if batch.is_empty() {
        return Err(NetError::EmptyDataset("gradient batch"));
    }
    let mut grads = params.zeros_like();
    let mut total = 0.0;
    for &(x, label) in batch {
        check_input(params, x)?;
        if label >= params.output_dim() {
            return Err(NetError::Shape {
                what: "class index bound".into(),
                expected: params.output_dim(),
                actual: label + 1,
            });
        }
        let trace = forward_trace(params, x, mode, rng)?;
        total += loss(&trace.probs, label);
        backward(params, x, &trace, label, &mut grads);
    }
    let n = batch.len() as f64;
    grads.scale(1.0 / n);
    Ok((total / n, grads))
}

pub fn gradients<R: Rng>(
    params: &NetworkParams,
    batch: &[(&SparseInput, usize)],
    mode: Mode,
    rng: &mut R,
) -> Result<Gradients, NetError> {
    loss_and_gradients(params, batch, mode, rng).map(|(_, g)| g)
}

/// Index of the largest probability; ties go to the lowest index.
pub fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// Inference-mode prediction: class index and probabilities.
pub fn predict(params: &NetworkParams, x: &SparseInput) -> Result<(usize, Vec<f64>), NetError> {
    let probs = forward_sparse(params, x, Mode::Infer, &mut NoRng)?;
    Ok((argmax(&probs), probs))
}

pub fn predict_batch(
    params: &NetworkParams,
    inputs: &[SparseInput],
    exec: Execution,
) -> Result<Vec<(usize, Vec<f64>)>, NetError> {
    map_ordered(inputs, exec, |x| predict(params, x)).into_iter().collect()
}

/// Predicted class for every example of a dataset.
pub fn predict_dataset(
    params: &NetworkParams,
    ds: &LabeledDataset,
    exec: Execution,
) -> Result<Vec<usize>, NetError> {
    map_ordered(ds.items(), exec, |doc| {
        predict(params, &SparseInput::from_counts(doc)).map(|(c, _)| c)
    })
    .into_iter()
    .collect()
}

/// Inference never draws random numbers; this stands in for the RNG.
struct NoRng;

impl rand::RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("inference does not sample")
    }
    fn next_u64(&mut self) -> u64 {
        unreachable!("inference does not sample")
    }
    fn fill_bytes(&mut self, _: &mut [u8]) {
        unreachable!("inference does not sample")
    }
    fn try_fill_bytes(&mut self, _: &mut [u8]) -> Result<(), rand::Error> {
        unreachable!("inference does not sample")
    }
}
