//! One-hidden-layer rectifier network for regression.
//!
//! `ŷ = b₂ + Σₖ v_k · relu(b₁ₖ + Σⱼ xⱼ W[j,k])`, trained on the squared
//! error `(1/2B) Σ (ŷ − y)²` of each mini-batch. `W` is stored input-major
//! so a sparse input only touches the rows of its non-zero features.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_dim, check_training_set, ModelError, Result, TrainParams, TrainReport};
use crate::vectorizer::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub input_size: usize,
    pub hidden_size: usize,
    /// `input_size × hidden_size`, row `j` holds the fan-out of input `j`.
    pub hidden_weights: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub output_bias: f64,
    pub activation: Activation,
}

/// Gradient of the batch loss, laid out like [`MlpModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradient {
    pub hidden_weights: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    pub output_weights: Vec<f64>,
    pub output_bias: f64,
}

impl MlpGradient {
    /// Same order as [`MlpModel::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.hidden_weights.clone();
        out.extend_from_slice(&self.hidden_bias);
        out.extend_from_slice(&self.output_weights);
        out.push(self.output_bias);
        out
    }
}

/// Per-sample backward quantities: `d = ∂L/∂ŷ` and hidden-layer deltas.
struct Backward {
    loss: f64,
    d_out: f64,
    hidden: Vec<f64>,
    delta: Vec<f64>,
}

impl MlpModel {
    /// Uniform Glorot-style initialization of both layers, zero hidden
    /// biases and the given output bias.
    pub fn init(input_size: usize, hidden_size: usize, seed: u64, output_bias: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let limit = (6.0 / (1 + hidden_size) as f64).sqrt();
        let hidden_weights = (0..input_size * hidden_size)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        let output_weights = (0..hidden_size)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        Self {
            input_size,
            hidden_size,
            hidden_weights,
            hidden_bias: vec![0.0; hidden_size],
            output_weights,
            output_bias,
            activation: Activation::Relu,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_size
    }

    pub fn parameter_count(&self) -> usize {
        self.hidden_size * (self.input_size + 2) + 1
    }

    /// Hidden activations and output.
    fn forward(&self, x: &SparseVector) -> (Vec<f64>, f64) {
        let h = self.hidden_size;
        let mut hidden = self.hidden_bias.clone();
        for (j, xj) in x.iter() {
            let row = &self.hidden_weights[j * h..(j + 1) * h];
            for (a, w) in hidden.iter_mut().zip(row) {
                *a += xj * w;
            }
        }
        for a in &mut hidden {
            *a = a.max(0.0);
        }
        let out = self.output_bias
            + hidden
                .iter()
                .zip(&self.output_weights)
                .map(|(a, v)| a * v)
                .sum::<f64>();
        (hidden, out)
    }

    pub fn predict(&self, x: &SparseVector) -> Result<f64> {
        check_dim(x, self.input_size)?;
        Ok(self.forward(x).1)
    }

    fn backward(&self, x: &SparseVector, y: f64, batch: f64) -> Backward {
        let (hidden, out) = self.forward(x);
        let err = out - y;
        let d_out = err / batch;
        let delta = hidden
            .iter()
            .zip(&self.output_weights)
            .map(|(&a, &v)| if a > 0.0 { d_out * v } else { 0.0 })
            .collect();
        Backward {
            loss: 0.5 * err * err / batch,
            d_out,
            hidden,
            delta,
        }
    }

    /// Batch loss `(1/2B) Σ (ŷ − y)²` and its exact gradient.
    pub fn loss_and_gradient(&self, xs: &[SparseVector], ys: &[f64]) -> (f64, MlpGradient) {
        let h = self.hidden_size;
        let batch = xs.len() as f64;
        let mut grad = MlpGradient {
            hidden_weights: vec![0.0; self.hidden_weights.len()],
            hidden_bias: vec![0.0; h],
            output_weights: vec![0.0; h],
            output_bias: 0.0,
        };
        let mut loss = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let b = self.backward(x, y, batch);
            loss += b.loss;
            grad.output_bias += b.d_out;
            for k in 0..h {
                grad.output_weights[k] += b.d_out * b.hidden[k];
                grad.hidden_bias[k] += b.delta[k];
            }
            for (j, xj) in x.iter() {
                for k in 0..h {
                    grad.hidden_weights[j * h + k] += xj * b.delta[k];
                }
            }
        }
        (loss, grad)
    }

    /// Flattened parameters: hidden weights, hidden bias, output weights,
    /// output bias.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = self.hidden_weights.clone();
        out.extend_from_slice(&self.hidden_bias);
        out.extend_from_slice(&self.output_weights);
        out.push(self.output_bias);
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.parameter_count(), "parameter count");
        let (hw, rest) = params.split_at(self.hidden_weights.len());
        let (hb, rest) = rest.split_at(self.hidden_size);
        let (ow, rest) = rest.split_at(self.hidden_size);
        self.hidden_weights.copy_from_slice(hw);
        self.hidden_bias.copy_from_slice(hb);
        self.output_weights.copy_from_slice(ow);
        self.output_bias = rest[0];
    }

    pub fn mse(&self, xs: &[SparseVector], ys: &[f64]) -> f64 {
        let total: f64 = xs
            .par_iter()
            .zip(ys)
            .map(|(x, &y)| {
                let e = self.forward(x).1 - y;
                e * e
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum();
        total / xs.len() as f64
    }
}

/// Seeded mini-batch gradient descent. Epoch losses are the mean squared
/// error over the epoch's mini-batches.
pub fn train_mlp(
    x: &[SparseVector],
    y: &[f64],
    dim: usize,
    params: &TrainParams,
) -> Result<(MlpModel, TrainReport)> {
    let started = Instant::now();
    params.validate()?;
    check_training_set(x, y, dim)?;
    if params.mlp_hidden == 0 {
        return Err(ModelError::InvalidParams("hidden size must be positive".into()));
    }
    let h = params.mlp_hidden;
    let mean_y = y.iter().sum::<f64>() / y.len() as f64;
    let mut model = MlpModel::init(dim, h, params.seed, mean_y);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..x.len()).collect();
    let lr = params.learning_rate;
    let mut losses = Vec::with_capacity(params.epochs);

    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        let mut epoch_sq = 0.0;
        for batch in order.chunks(params.batch_size) {
            let size = batch.len() as f64;
            let backward: Vec<Backward> = batch
                .par_iter()
                .map(|&i| model.backward(&x[i], y[i], size))
                .collect();
            let mut g_out_bias = 0.0;
            let mut g_out = vec![0.0; h];
            let mut g_hidden_bias = vec![0.0; h];
            for b in &backward {
                epoch_sq += 2.0 * b.loss * size;
                g_out_bias += b.d_out;
                for k in 0..h {
                    g_out[k] += b.d_out * b.hidden[k];
                    g_hidden_bias[k] += b.delta[k];
                }
            }
            for (&i, b) in batch.iter().zip(&backward) {
                for (j, xj) in x[i].iter() {
                    let row = &mut model.hidden_weights[j * h..(j + 1) * h];
                    for (w, d) in row.iter_mut().zip(&b.delta) {
                        *w -= lr * xj * d;
                    }
                }
            }
            for k in 0..h {
                model.output_weights[k] -= lr * g_out[k];
                model.hidden_bias[k] -= lr * g_hidden_bias[k];
            }
            model.output_bias -= lr * g_out_bias;
        }
        losses.push(epoch_sq / x.len() as f64);
    }
    Ok((model, TrainReport::new(losses, started)))
}
