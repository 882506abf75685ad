//! Scoring models over sparse TF-IDF features.
//!
//! * [`train_ridge`]: L2-penalized least squares, conjugate gradient.
//! * [`train_svr`]: linear epsilon-insensitive regression, seeded SGD.
//! * [`train_mlp`]: one hidden rectifier layer, squared error, seeded
//!   mini-batch SGD.
//! * [`train_pairwise_ranker`]: linear scorer trained on judged pairs with
//!   the margin ranking loss.

mod mlp;
mod ranker;
mod ridge;
mod svr;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vectorizer::SparseVector;

pub use mlp::{train_mlp, Activation, MlpGradient, MlpModel};
pub use ranker::{margin_rank_loss, train_pairwise_ranker, train_ranker_on_vectors};
pub use ridge::{ridge_gradient_residual, train_ridge, RidgeOptions, GRADIENT_BOUND};
pub use svr::{svr_objective, train_svr};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("feature index {index} out of range for input dimension {dim}")]
    DimensionMismatch { index: usize, dim: usize },
    #[error("model expects input dimension {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("{samples} samples but {targets} targets")]
    LengthMismatch { samples: usize, targets: usize },
    #[error("target {index} is not finite")]
    NonFiniteTarget { index: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("invalid training parameter: {0}")]
    InvalidParams(String),
    #[error("conjugate gradient stopped after {iterations} iterations with gradient residual {residual:e} > {bound:e}")]
    NotConverged {
        iterations: usize,
        residual: f64,
        bound: f64,
    },
    #[error("model `{0}` is not implemented")]
    NotImplemented(ModelKind),
    #[error("vectorizer: {0}")]
    Vectorizer(#[from] crate::vectorizer::VectorizerError),
}

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Listed for the grid layout only; never trained here.
    LightGbm,
    Mlp,
    Ridge,
    Svm,
}

impl ModelKind {
    /// Grid row order.
    pub const ALL: [ModelKind; 4] = [ModelKind::LightGbm, ModelKind::Mlp, ModelKind::Ridge, ModelKind::Svm];
    pub const IMPLEMENTED: [ModelKind; 3] = [ModelKind::Mlp, ModelKind::Ridge, ModelKind::Svm];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::LightGbm => "lightgbm",
            ModelKind::Mlp => "mlp",
            ModelKind::Ridge => "ridge",
            ModelKind::Svm => "svm",
        }
    }

    pub fn is_implemented(self) -> bool {
        self != ModelKind::LightGbm
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "lightgbm" => Ok(ModelKind::LightGbm),
            "mlp" => Ok(ModelKind::Mlp),
            "ridge" => Ok(ModelKind::Ridge),
            "svm" | "svr" => Ok(ModelKind::Svm),
            other => Err(format!("unknown model `{other}` (expected ridge, svm or mlp)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub ridge_lambda: f64,
    pub svr_epsilon: f64,
    pub svr_lambda: f64,
    pub mlp_hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub margin: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            ridge_lambda: 1.0,
            svr_epsilon: 0.1,
            svr_lambda: 1e-5,
            mlp_hidden: 128,
            learning_rate: 0.05,
            epochs: 10,
            batch_size: 32,
            margin: 0.5,
            seed: 42,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(ModelError::InvalidParams(msg.to_string()));
        if !(self.ridge_lambda > 0.0 && self.ridge_lambda.is_finite()) {
            return bad("ridge_lambda must be positive");
        }
        if !(self.svr_epsilon >= 0.0 && self.svr_epsilon.is_finite()) {
            return bad("svr_epsilon must be non-negative");
        }
        if !(self.svr_lambda > 0.0 && self.svr_lambda.is_finite()) {
            return bad("svr_lambda must be positive");
        }
        if self.mlp_hidden == 0 {
            return bad("mlp_hidden must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.learning_rate * self.svr_lambda >= 1.0 {
            return bad("learning_rate * svr_lambda must be below 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return bad("margin must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Training objective after each epoch (each solver iteration for ridge).
    pub epoch_losses: Vec<f64>,
    pub final_loss: f64,
    pub wall_seconds: f64,
}

impl TrainReport {
    pub(crate) fn new(epoch_losses: Vec<f64>, started: std::time::Instant) -> Self {
        let final_loss = epoch_losses.last().copied().unwrap_or(0.0);
        Self {
            epoch_losses,
            final_loss,
            wall_seconds: started.elapsed().as_secs_f64(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.len()
    }

    /// `wᵀx + b`, summed in index order.
    pub fn predict(&self, x: &SparseVector) -> Result<f64> {
        check_dim(x, self.weights.len())?;
        Ok(self.bias + x.dot_dense(&self.weights))
    }
}

/// Any trained scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Linear(LinearModel),
    Mlp(MlpModel),
}

impl Model {
    pub fn input_dim(&self) -> usize {
        match self {
            Model::Linear(m) => m.input_dim(),
            Model::Mlp(m) => m.input_dim(),
        }
    }

    pub fn predict(&self, x: &SparseVector) -> Result<f64> {
        match self {
            Model::Linear(m) => m.predict(x),
            Model::Mlp(m) => m.predict(x),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Model::Linear(_) => "linear",
            Model::Mlp(_) => "mlp",
        }
    }
}

impl From<LinearModel> for Model {
    fn from(m: LinearModel) -> Self {
        Model::Linear(m)
    }
}

impl From<MlpModel> for Model {
    fn from(m: MlpModel) -> Self {
        Model::Mlp(m)
    }
}

/// Trains a regression model of the given kind on `(x, y)`.
pub fn train_model(
    kind: ModelKind,
    x: &[SparseVector],
    y: &[f64],
    dim: usize,
    params: &TrainParams,
) -> Result<(Model, TrainReport)> {
    params.validate()?;
    match kind {
        ModelKind::Ridge => {
            let (m, r) = train_ridge(x, y, dim, &RidgeOptions::new(params.ridge_lambda))?;
            Ok((m.into(), r))
        }
        ModelKind::Svm => {
            let (m, r) = train_svr(x, y, dim, params)?;
            Ok((m.into(), r))
        }
        ModelKind::Mlp => {
            let (m, r) = train_mlp(x, y, dim, params)?;
            Ok((m.into(), r))
        }
        ModelKind::LightGbm => Err(ModelError::NotImplemented(kind)),
    }
}

pub(crate) fn check_dim(x: &SparseVector, dim: usize) -> Result<()> {
    if x.min_dim() > dim {
        return Err(ModelError::DimensionMismatch {
            index: x.min_dim() - 1,
            dim,
        });
    }
    Ok(())
}

/// Shared precondition of the regression trainers.
pub(crate) fn check_training_set(x: &[SparseVector], y: &[f64], dim: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(ModelError::LengthMismatch {
            samples: x.len(),
            targets: y.len(),
        });
    }
    if x.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    if let Some(index) = y.iter().position(|v| !v.is_finite()) {
        return Err(ModelError::NonFiniteTarget { index });
    }
    for row in x {
        check_dim(row, dim)?;
    }
    Ok(())
}

/// Dense weights stored as `scale · v`, so the L2 shrink `w ← (1 − ηλ) w`
/// costs O(1) instead of O(dim).
pub(crate) struct ScaledWeights {
    v: Vec<f64>,
    scale: f64,
}

impl ScaledWeights {
    pub(crate) fn zeros(dim: usize) -> Self {
        Self {
            v: vec![0.0; dim],
            scale: 1.0,
        }
    }

    pub(crate) fn dot(&self, x: &SparseVector) -> f64 {
        self.scale * x.dot_dense(&self.v)
    }

    pub(crate) fn shrink(&mut self, factor: f64) {
        self.scale *= factor;
        if self.scale < 1e-9 {
            self.flush();
        }
    }

    /// `w += alpha · x`.
    pub(crate) fn add(&mut self, alpha: f64, x: &SparseVector) {
        let a = alpha / self.scale;
        for (i, v) in x.iter() {
            self.v[i] += a * v;
        }
    }

    fn flush(&mut self) {
        for v in &mut self.v {
            *v *= self.scale;
        }
        self.scale = 1.0;
    }

    pub(crate) fn squared_norm(&self) -> f64 {
        self.scale * self.scale * self.v.iter().map(|v| v * v).sum::<f64>()
    }

    pub(crate) fn into_dense(mut self) -> Vec<f64> {
        self.flush();
        self.v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_predict_examples() {
        let m = LinearModel {
            weights: vec![1.0, 2.0],
            bias: 0.0,
        };
        let x = SparseVector::from_entries([(0, 0.6), (1, 0.8)]);
        assert!((m.predict(&x).unwrap() - 2.2).abs() < 1e-15);

        let biased = LinearModel {
            weights: vec![1.0, 2.0],
            bias: -0.25,
        };
        assert_eq!(biased.predict(&SparseVector::new()).unwrap(), -0.25);
        assert_eq!(biased.predict(&x).unwrap(), biased.predict(&x).unwrap());
    }

    #[test]
    fn predict_rejects_out_of_range_index() {
        let m = LinearModel::zeros(2);
        let x = SparseVector::from_entries([(5, 1.0)]);
        assert_eq!(m.predict(&x), Err(ModelError::DimensionMismatch { index: 5, dim: 2 }));
    }

    #[test]
    fn default_params_are_valid() {
        let p = TrainParams::default();
        p.validate().unwrap();
        assert_eq!((p.ridge_lambda, p.svr_epsilon, p.mlp_hidden, p.margin, p.seed), (1.0, 0.1, 128, 0.5, 42));
        assert!(TrainParams { margin: 0.0, ..p.clone() }.validate().is_err());
        assert!(TrainParams { mlp_hidden: 0, ..p }.validate().is_err());
    }

    #[test]
    fn scaled_weights_track_dense_updates() {
        let mut w = ScaledWeights::zeros(3);
        let x = SparseVector::from_entries([(0, 1.0), (2, -2.0)]);
        w.add(0.5, &x);
        w.shrink(0.5);
        w.add(1.0, &SparseVector::from_entries([(1, 1.0)]));
        for _ in 0..40 {
            w.shrink(0.5);
        }
        let dense = w.into_dense();
        let expect = [0.25 * 0.5f64.powi(40), 0.5f64.powi(40), -0.5 * 0.5f64.powi(40)];
        for (a, b) in dense.iter().zip(expect) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300));
        }
    }

    #[test]
    fn model_kinds_parse() {
        assert_eq!("svm".parse::<ModelKind>().unwrap(), ModelKind::Svm);
        assert!("gbdt".parse::<ModelKind>().is_err());
        assert!(!ModelKind::LightGbm.is_implemented());
    }
}
