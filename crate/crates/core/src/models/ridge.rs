//! Ridge regression by conjugate gradient on the normal equations.
//!
//! With an intercept the bias is left unpenalized: the system is solved on
//! implicitly centered data, `(X̃ᵀX̃ + λI) w = X̃ᵀ(y − ȳ)` with
//! `X̃ = X − 1·x̄ᵀ`, and `b = ȳ − x̄ᵀw`. Centering is never materialized,
//! so `X` stays sparse.

use std::time::Instant;

use rayon::prelude::*;

use super::{check_training_set, LinearModel, ModelError, Result, TrainReport};
use crate::vectorizer::SparseVector;

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeOptions {
    pub lambda: f64,
    pub fit_intercept: bool,
    /// CG stops once `‖r‖∞ ≤ tol · max(1, ‖Xᵀy‖∞)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl RidgeOptions {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            fit_intercept: true,
            tol: 1e-10,
            max_iter: 5_000,
        }
    }
}

/// Accepted optimality gap: `‖Xᵀ(Xw + b − y) + λw‖∞ ≤ 1e-6 · max(1, ‖Xᵀy‖∞)`.
pub const GRADIENT_BOUND: f64 = 1e-6;

struct Design<'a> {
    rows: &'a [SparseVector],
    dim: usize,
    mean: Option<Vec<f64>>,
}

impl Design<'_> {
    fn mul(&self, v: &[f64]) -> Vec<f64> {
        let shift = self.mean.as_ref().map_or(0.0, |m| dot(m, v));
        self.rows.par_iter().map(|r| r.dot_dense(v) - shift).collect()
    }

    fn mul_t(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (row, &ui) in self.rows.iter().zip(u) {
            for (j, v) in row.iter() {
                out[j] += v * ui;
            }
        }
        if let Some(mean) = &self.mean {
            let total: f64 = u.iter().sum();
            for (o, m) in out.iter_mut().zip(mean) {
                *o -= m * total;
            }
        }
        out
    }

    /// `(X̃ᵀX̃ + λI) v`.
    fn normal(&self, v: &[f64], lambda: f64) -> Vec<f64> {
        let mut out = self.mul_t(&self.mul(v));
        for (o, vi) in out.iter_mut().zip(v) {
            *o += lambda * vi;
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `‖Xᵀ(Xw + b − y) + λw‖∞` of a candidate model.
pub fn ridge_gradient_residual(x: &[SparseVector], y: &[f64], model: &LinearModel, lambda: f64) -> f64 {
    let dim = model.weights.len();
    let mut grad: Vec<f64> = model.weights.iter().map(|w| lambda * w).collect();
    for (row, &yi) in x.iter().zip(y) {
        let r = row.dot_dense(&model.weights) + model.bias - yi;
        for (j, v) in row.iter() {
            grad[j] += v * r;
        }
    }
    debug_assert_eq!(grad.len(), dim);
    inf_norm(&grad)
}

fn xt_y_norm(x: &[SparseVector], y: &[f64], dim: usize) -> f64 {
    let plain = Design {
        rows: x,
        dim,
        mean: None,
    };
    inf_norm(&plain.mul_t(y))
}

/// Minimizes `‖Xw + b − y‖² + λ‖w‖²` over `w` (and `b` when
/// `fit_intercept`). Fails with [`ModelError::NotConverged`] if the
/// gradient residual bound is not reached within `max_iter` iterations.
pub fn train_ridge(
    x: &[SparseVector],
    y: &[f64],
    dim: usize,
    options: &RidgeOptions,
) -> Result<(LinearModel, TrainReport)> {
    let started = Instant::now();
    check_training_set(x, y, dim)?;
    let lambda = options.lambda;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(ModelError::InvalidParams("ridge lambda must be positive".into()));
    }
    let n = x.len() as f64;

    let (mean, y_mean) = if options.fit_intercept {
        let mut mean = vec![0.0; dim];
        for row in x {
            for (j, v) in row.iter() {
                mean[j] += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        (Some(mean), y.iter().sum::<f64>() / n)
    } else {
        (None, 0.0)
    };
    let design = Design { rows: x, dim, mean };
    let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let yc_sq = dot(&yc, &yc);

    let rhs = design.mul_t(&yc);
    let scale = xt_y_norm(x, y, dim).max(1.0);
    let stop = options.tol * scale;
    let bound = GRADIENT_BOUND * scale;

    let mut w = vec![0.0; dim];
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut losses = Vec::new();
    let mut iterations = 0;
    // ‖X̃w − ỹ‖² + λ‖w‖² = ‖ỹ‖² − rhsᵀw − wᵀr
    let objective = |w: &[f64], r: &[f64]| ((yc_sq - dot(&rhs, w) - dot(w, r)) / n).max(0.0);

    loop {
        while inf_norm(&r) > stop && iterations < options.max_iter {
            let ap = design.normal(&p, lambda);
            let alpha = rr / dot(&p, &ap);
            for i in 0..dim {
                w[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rr_next = dot(&r, &r);
            let beta = rr_next / rr;
            rr = rr_next;
            for i in 0..dim {
                p[i] = r[i] + beta * p[i];
            }
            iterations += 1;
            losses.push(objective(&w, &r));
        }
        // the recursive residual drifts; re-anchor on the true one
        let ap = design.normal(&w, lambda);
        let true_r: Vec<f64> = rhs.iter().zip(&ap).map(|(b, a)| b - a).collect();
        let residual = inf_norm(&true_r);
        if residual <= stop || iterations >= options.max_iter {
            if residual > bound {
                return Err(ModelError::NotConverged {
                    iterations,
                    residual,
                    bound,
                });
            }
            if losses.is_empty() {
                losses.push(objective(&w, &true_r));
            }
            break;
        }
        r = true_r;
        p = r.clone();
        rr = dot(&r, &r);
    }

    let bias = match &design.mean {
        Some(mean) => y_mean - dot(mean, &w),
        None => 0.0,
    };
    let model = LinearModel { weights: w, bias };
    Ok((model, TrainReport::new(losses, started)))
}
