//! Linear pairwise ranker trained with the margin ranking loss.
//!
//! The loss is bound with `x1` = score of the more toxic text and `y = 1`,
//! so each pair contributes `max(0, margin − (s_more − s_less))`.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_dim, LinearModel, ModelError, Result, ScaledWeights, TrainParams, TrainReport};
use crate::cleaning::CleanMode;
use crate::corpus::PairCorpus;
use crate::vectorizer::{SparseVector, Vocabulary};

pub fn margin_rank_loss(s_less: f64, s_more: f64, margin: f64) -> f64 {
    (-(s_more - s_less) + margin).max(0.0)
}

/// Trains on pre-featurized `(less, more)` pairs. No weight penalty: the
/// objective is the mean margin loss over the pairs.
pub fn train_ranker_on_vectors(
    pairs: &[(SparseVector, SparseVector)],
    dim: usize,
    params: &TrainParams,
) -> Result<(LinearModel, TrainReport)> {
    let started = Instant::now();
    params.validate()?;
    if pairs.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    for (less, more) in pairs {
        check_dim(less, dim)?;
        check_dim(more, dim)?;
    }
    let margin = params.margin;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut w = ScaledWeights::zeros(dim);
    let mut losses = Vec::with_capacity(params.epochs);

    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (less, more) = &pairs[i];
            let gap = w.dot(more) - w.dot(less);
            if margin_rank_loss(0.0, gap, margin) > 0.0 {
                w.add(params.learning_rate, more);
                w.add(-params.learning_rate, less);
            }
        }
        let total: f64 = pairs
            .iter()
            .map(|(less, more)| margin_rank_loss(w.dot(less), w.dot(more), margin))
            .sum();
        losses.push(total / pairs.len() as f64);
    }
    let model = LinearModel {
        weights: w.into_dense(),
        bias: 0.0,
    };
    Ok((model, TrainReport::new(losses, started)))
}

/// Cleans and featurizes both texts of every pair, then trains a linear
/// scorer on them. Logs a warning when `holdout` shares pairs with the
/// training pairs.
pub fn train_pairwise_ranker(
    pairs: &PairCorpus,
    vocab: &Vocabulary,
    clean_mode: CleanMode,
    params: &TrainParams,
    holdout: Option<&PairCorpus>,
) -> Result<(LinearModel, TrainReport)> {
    if pairs.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    if let Some(holdout) = holdout {
        let shared = pairs.overlap(holdout);
        if shared > 0 {
            log::warn!("{shared} training pairs also appear in the evaluation pairs");
        }
    }
    let featurized: Vec<(SparseVector, SparseVector)> = pairs
        .pairs
        .iter()
        .map(|p| {
            (
                vocab.transform(&clean_mode.clean(&p.less_toxic)),
                vocab.transform(&clean_mode.clean(&p.more_toxic)),
            )
        })
        .collect();
    train_ranker_on_vectors(&featurized, vocab.len(), params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_cases() {
        assert_eq!(margin_rank_loss(1.0, 2.0, 0.5), 0.0);
        assert_eq!(margin_rank_loss(2.0, 1.0, 0.5), 1.5);
        assert_eq!(margin_rank_loss(3.0, 3.0, 0.5), 0.5);
    }

    #[test]
    fn singleton_pair_reaches_zero_loss() {
        let pairs = vec![(
            SparseVector::from_entries([(0, 1.0)]),
            SparseVector::from_entries([(1, 1.0)]),
        )];
        let params = TrainParams {
            epochs: 20,
            ..TrainParams::default()
        };
        let (m, report) = train_ranker_on_vectors(&pairs, 2, &params).unwrap();
        assert_eq!(report.final_loss, 0.0);
        assert!(m.weights[1] - m.weights[0] >= params.margin);
    }

    #[test]
    fn empty_pairs_rejected() {
        assert_eq!(
            train_ranker_on_vectors(&[], 3, &TrainParams::default()).unwrap_err(),
            ModelError::EmptyTrainingSet
        );
    }
}
