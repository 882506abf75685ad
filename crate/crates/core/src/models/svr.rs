//! Linear support-vector regression in the primal.
//!
//! Objective: `λ/2 ‖w‖² + (1/n) Σ max(0, |wᵀxᵢ + b − yᵢ| − ε)`, minimized
//! by stochastic subgradient descent with step `η / √(1 + epoch)`.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_training_set, LinearModel, Result, ScaledWeights, TrainParams, TrainReport};
use crate::vectorizer::SparseVector;

pub fn svr_objective(x: &[SparseVector], y: &[f64], model: &LinearModel, lambda: f64, epsilon: f64) -> f64 {
    let penalty = 0.5 * lambda * model.weights.iter().map(|w| w * w).sum::<f64>();
    let hinge: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &yi)| ((row.dot_dense(&model.weights) + model.bias - yi).abs() - epsilon).max(0.0))
        .sum();
    penalty + hinge / x.len() as f64
}

pub fn train_svr(
    x: &[SparseVector],
    y: &[f64],
    dim: usize,
    params: &TrainParams,
) -> Result<(LinearModel, TrainReport)> {
    let started = Instant::now();
    params.validate()?;
    check_training_set(x, y, dim)?;
    let n = x.len();
    let lambda = params.svr_lambda;
    let epsilon = params.svr_epsilon;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut w = ScaledWeights::zeros(dim);
    let mut bias = y.iter().sum::<f64>() / n as f64;
    let mut losses = Vec::with_capacity(params.epochs);

    for epoch in 0..params.epochs {
        let eta = params.learning_rate / ((1 + epoch) as f64).sqrt();
        order.shuffle(&mut rng);
        for &i in &order {
            let residual = w.dot(&x[i]) + bias - y[i];
            w.shrink(1.0 - eta * lambda);
            if residual.abs() > epsilon {
                let g = residual.signum();
                w.add(-eta * g, &x[i]);
                bias -= eta * g;
            }
        }
        let hinge: f64 = x
            .iter()
            .zip(y)
            .map(|(row, &yi)| ((w.dot(row) + bias - yi).abs() - epsilon).max(0.0))
            .sum();
        losses.push(0.5 * lambda * w.squared_norm() + hinge / n as f64);
    }

    let model = LinearModel {
        weights: w.into_dense(),
        bias,
    };
    Ok((model, TrainReport::new(losses, started)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_targets_stay_in_tube() {
        let x: Vec<SparseVector> = (0..20u32)
            .map(|i| SparseVector::from_entries([(i % 4, 1.0)]))
            .collect();
        let y = vec![0.5; 20];
        let params = TrainParams {
            svr_epsilon: 0.0,
            ..TrainParams::default()
        };
        let (m, report) = train_svr(&x, &y, 4, &params).unwrap();
        assert!(m.weights.iter().all(|&w| w == 0.0));
        assert_eq!(m.bias, 0.5);
        assert!(report.epoch_losses.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn recovers_slope() {
        let x: Vec<SparseVector> = (1..=50u32)
            .map(|i| SparseVector::from_entries([(0, i as f64 / 50.0)]))
            .collect();
        let y: Vec<f64> = (1..=50).map(|i| 2.0 * i as f64 / 50.0).collect();
        let params = TrainParams {
            svr_epsilon: 0.01,
            svr_lambda: 1e-6,
            learning_rate: 0.1,
            epochs: 200,
            ..TrainParams::default()
        };
        let (m, _) = train_svr(&x, &y, 1, &params).unwrap();
        assert!((m.weights[0] - 2.0).abs() < 0.1, "slope {}", m.weights[0]);
    }

    #[test]
    fn seeded_runs_are_bitwise_identical() {
        let x: Vec<SparseVector> = (0..40u32)
            .map(|i| SparseVector::from_entries([(i % 5, 0.5), (5 + i % 3, 0.25)]))
            .collect();
        let y: Vec<f64> = (0..40).map(|i| (i % 7) as f64 / 7.0).collect();
        let p = TrainParams::default();
        let a = train_svr(&x, &y, 8, &p).unwrap();
        let b = train_svr(&x, &y, 8, &p).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1.epoch_losses, b.1.epoch_losses);
    }
}
