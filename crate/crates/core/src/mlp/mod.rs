//! Dense feed-forward classifier trained from scratch.
//!
//! Hidden layers use the rectifier, the output layer a softmax, and the loss
//! is mean cross-entropy. All arithmetic is `f64`. Weights of a layer are
//! stored row-major with shape `(in_dim, out_dim)`.

mod checkpoint;
mod gradcheck;
mod grid;
mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint, write_history_csv};
pub use gradcheck::{grad_check, GradCheckReport, MlpObjective, Objective};
pub use grid::{default_grid, grid_search, GridCell, GridOutcome, GridSpec, DEFAULT_LEARNING_RATES};
pub use train::{train, EpochRecord, TrainConfig, TrainHistory};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng;

/// Allowed hidden-layer counts and widths of the architecture grid.
pub const GRID_DEPTHS: [usize; 3] = [1, 2, 3];
pub const GRID_WIDTHS: [usize; 2] = [10, 100];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_layers: Vec<usize>,
    pub n_classes: usize,
    pub seed: u64,
    /// Permit a network with no hidden layer (a single linear map).
    #[serde(default)]
    pub linear_head: bool,
}

impl MlpConfig {
    pub fn new(input_dim: usize, hidden_layers: Vec<usize>, n_classes: usize, seed: u64) -> Self {
        MlpConfig {
            input_dim,
            hidden_layers,
            n_classes,
            seed,
            linear_head: false,
        }
    }

    pub fn linear(input_dim: usize, n_classes: usize, seed: u64) -> Self {
        MlpConfig {
            input_dim,
            hidden_layers: Vec::new(),
            n_classes,
            seed,
            linear_head: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.n_classes == 0 || self.hidden_layers.contains(&0) {
            return Err(Error::Validation(format!(
                "all layer dimensions must be at least 1: {self:?}"
            )));
        }
        match (self.linear_head, self.hidden_layers.len()) {
            (true, 0) => Ok(()),
            (true, _) => Err(Error::Validation(
                "a linear head has no hidden layers".into(),
            )),
            (false, 1..=3) => Ok(()),
            (false, n) => Err(Error::Validation(format!(
                "hidden layer count must be 1, 2 or 3, got {n}"
            ))),
        }
    }

    /// Human-readable architecture, e.g. `2x100` or `linear`.
    pub fn describe(&self) -> String {
        if self.hidden_layers.is_empty() {
            return "linear".into();
        }
        let w = self.hidden_layers[0];
        if self.hidden_layers.iter().all(|&h| h == w) {
            format!("{}x{}", self.hidden_layers.len(), w)
        } else {
            self.hidden_layers
                .iter()
                .map(|h| h.to_string())
                .collect::<Vec<_>>()
                .join("-")
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        DenseLayer {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            biases: vec![0.0; out_dim],
        }
    }

    fn n_params(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    /// `out[b] = input[b] W + bias` for a row-major batch.
    fn forward_batch(&self, input: &[f64], batch: usize, out: &mut Vec<f64>) {
        out.clear();
        out.reserve(batch * self.out_dim);
        for b in 0..batch {
            out.extend_from_slice(&self.biases);
            let row = &input[b * self.in_dim..(b + 1) * self.in_dim];
            let dst = &mut out[b * self.out_dim..(b + 1) * self.out_dim];
            for (i, &a) in row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let w = &self.weights[i * self.out_dim..(i + 1) * self.out_dim];
                for (d, wv) in dst.iter_mut().zip(w) {
                    *d += a * wv;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<DenseLayer>,
}

/// Row-major feature matrix with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    n_classes: usize,
    x: Vec<f64>,
    y: Vec<usize>,
}

impl Dataset {
    pub fn new<R: AsRef<[f64]>>(rows: &[R], labels: &[usize], n_classes: usize) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Dimension {
                expected: rows.len(),
                got: labels.len(),
            });
        }
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut x = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: r.len(),
                });
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation("non-finite input value".into()));
            }
            x.extend_from_slice(r);
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::Validation(format!(
                "label {bad} outside [0, {n_classes})"
            )));
        }
        Ok(Dataset {
            dim,
            n_classes,
            x,
            y: labels.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn labels(&self) -> &[usize] {
        &self.y
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut x = Vec::with_capacity(indices.len() * self.dim);
        let mut y = Vec::with_capacity(indices.len());
        for &i in indices {
            x.extend_from_slice(self.row(i));
            y.push(self.y[i]);
        }
        Dataset {
            dim: self.dim,
            n_classes: self.n_classes,
            x,
            y,
        }
    }

    fn gather(&self, indices: &[usize], out: &mut Vec<f64>) {
        out.clear();
        for &i in indices {
            out.extend_from_slice(self.row(i));
        }
    }
}

/// Parameter-shaped gradient buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<DenseLayer>,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }
}

/// Draws weights from U(-sqrt(6 / fan_in), sqrt(6 / fan_in)); biases start
/// at zero.
pub fn init_mlp(config: &MlpConfig) -> Result<MlpModel> {
    config.validate()?;
    let mut r = rng(config.seed);
    let mut dims = vec![config.input_dim];
    dims.extend(&config.hidden_layers);
    dims.push(config.n_classes);
    let layers = dims
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            let weights = (0..fan_in * fan_out)
                .map(|_| r.gen_range(-bound..bound))
                .collect();
            DenseLayer {
                in_dim: fan_in,
                out_dim: fan_out,
                weights,
                biases: vec![0.0; fan_out],
            }
        })
        .collect();
    Ok(MlpModel { layers })
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

/// Per-layer activations of one batch: `acts[0]` is the input, the last
/// entry holds output probabilities.
struct Activations {
    acts: Vec<Vec<f64>>,
}

impl MlpModel {
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("model needs at least one layer"));
        }
        for w in layers.windows(2) {
            if w[0].out_dim != w[1].in_dim {
                return Err(Error::Dimension {
                    expected: w[0].out_dim,
                    got: w[1].in_dim,
                });
            }
        }
        for l in &layers {
            if l.weights.len() != l.in_dim * l.out_dim || l.biases.len() != l.out_dim {
                return Err(Error::Format(format!(
                    "layer {}x{} has {} weights and {} biases",
                    l.in_dim,
                    l.out_dim,
                    l.weights.len(),
                    l.biases.len()
                )));
            }
        }
        Ok(MlpModel { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn n_classes(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(DenseLayer::n_params).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.n_params(), "parameter count mismatch");
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[at..at + nw]);
            at += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
    }

    fn forward_batch(&self, input: Vec<f64>, batch: usize) -> Activations {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input);
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::new();
            layer.forward_batch(&acts[li], batch, &mut out);
            if li == last {
                for row in out.chunks_mut(layer.out_dim) {
                    softmax_in_place(row);
                }
            } else {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(out);
        }
        Activations { acts }
    }

    /// Class probabilities for one input.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut a = self.forward_batch(x.to_vec(), 1);
        Ok(a.acts.pop().unwrap_or_default())
    }

    /// Most probable class; ties go to the lowest index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?))
    }

    pub fn predict_all(&self, data: &Dataset) -> Vec<usize> {
        assert_eq!(data.dim(), self.input_dim(), "dataset dimension mismatch");
        let mut preds = Vec::with_capacity(data.len());
        const CHUNK: usize = 256;
        let mut start = 0;
        while start < data.len() {
            let end = (start + CHUNK).min(data.len());
            let a = self.forward_batch(data.x[start * data.dim..end * data.dim].to_vec(), end - start);
            let probs = a.acts.last().expect("output layer");
            preds.extend(probs.chunks(self.n_classes()).map(argmax));
            start = end;
        }
        preds
    }

    /// Fraction of correctly classified rows; 0 for an empty set.
    pub fn accuracy(&self, data: &Dataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let preds = self.predict_all(data);
        let correct = preds.iter().zip(data.labels()).filter(|(p, y)| p == y).count();
        correct as f64 / data.len() as f64
    }

    /// Mean cross-entropy over the rows at `indices`.
    pub fn loss(&self, data: &Dataset, indices: &[usize]) -> f64 {
        let mut x = Vec::new();
        data.gather(indices, &mut x);
        let a = self.forward_batch(x, indices.len());
        cross_entropy(a.acts.last().expect("output"), indices, data, self.n_classes())
    }

    /// Mean cross-entropy and its gradient over the rows at `indices`.
    pub fn loss_and_grad(&self, data: &Dataset, indices: &[usize]) -> (f64, Gradients) {
        let batch = indices.len();
        let mut x = Vec::new();
        data.gather(indices, &mut x);
        let a = self.forward_batch(x, batch);
        let k = self.n_classes();
        let probs = a.acts.last().expect("output");
        let loss = cross_entropy(probs, indices, data, k);

        // dL/dz at the output: (p - onehot) / batch
        let scale = 1.0 / batch as f64;
        let mut delta: Vec<f64> = probs.iter().map(|p| p * scale).collect();
        for (b, &i) in indices.iter().enumerate() {
            delta[b * k + data.y[i]] -= scale;
        }

        let mut grads: Vec<DenseLayer> = self
            .layers
            .iter()
            .map(|l| DenseLayer::zeros(l.in_dim, l.out_dim))
            .collect();
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let (n_in, n_out) = (layer.in_dim, layer.out_dim);
            let input = &a.acts[li];
            let g = &mut grads[li];
            for b in 0..batch {
                let d = &delta[b * n_out..(b + 1) * n_out];
                for (gb, dv) in g.biases.iter_mut().zip(d) {
                    *gb += dv;
                }
                let row = &input[b * n_in..(b + 1) * n_in];
                for (i, &av) in row.iter().enumerate() {
                    if av == 0.0 {
                        continue;
                    }
                    let gw = &mut g.weights[i * n_out..(i + 1) * n_out];
                    for (w, dv) in gw.iter_mut().zip(d) {
                        *w += av * dv;
                    }
                }
            }
            if li == 0 {
                break;
            }
            // propagate through W and the rectifier of the previous layer
            let mut prev = vec![0.0; batch * n_in];
            for b in 0..batch {
                let d = &delta[b * n_out..(b + 1) * n_out];
                for i in 0..n_in {
                    if input[b * n_in + i] <= 0.0 {
                        continue;
                    }
                    let w = &layer.weights[i * n_out..(i + 1) * n_out];
                    prev[b * n_in + i] = w.iter().zip(d).map(|(a, b)| a * b).sum();
                }
            }
            delta = prev;
        }
        (loss, Gradients { layers: grads })
    }
}

fn cross_entropy(probs: &[f64], indices: &[usize], data: &Dataset, k: usize) -> f64 {
    let total: f64 = indices
        .iter()
        .enumerate()
        .map(|(b, &i)| -probs[b * k + data.y[i]].max(f64::MIN_POSITIVE).ln())
        .sum();
    total / indices.len() as f64
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
