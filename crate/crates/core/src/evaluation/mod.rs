//! Pairwise ranking accuracy and the grid experiment.
//!
//! A judged pair counts as correct when the scorer ranks the more toxic
//! text strictly higher. Exact score ties earn half credit and are reported
//! separately, so a constant scorer lands at 0.5.

mod grid;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::PairCorpus;

pub use grid::{
    compare_cells, read_grid_csv, run_grid, write_grid_csv, write_grid_table, CellStatus,
    GridCell, GridDataset, GridSpec, GridSummary, GRID_CSV_HEADER,
};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no comparison pairs to evaluate")]
    EmptyPairs,
    #[error("grid CSV line {line}: {message}")]
    GridCsv { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankingResult {
    pub accuracy: f64,
    pub n_pairs: usize,
    pub n_correct: usize,
    pub n_ties: usize,
}

impl RankingResult {
    pub fn from_counts(n_pairs: usize, n_correct: usize, n_ties: usize) -> Self {
        Self {
            accuracy: (n_correct as f64 + 0.5 * n_ties as f64) / n_pairs as f64,
            n_pairs,
            n_correct,
            n_ties,
        }
    }
}

/// Accuracy from already-computed `(less, more)` score pairs.
pub fn ranking_accuracy_from_scores(scores: &[(f64, f64)]) -> Result<RankingResult, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::EmptyPairs);
    }
    let mut correct = 0;
    let mut ties = 0;
    for &(less, more) in scores {
        if more > less {
            correct += 1;
        } else if more == less {
            ties += 1;
        }
    }
    Ok(RankingResult::from_counts(scores.len(), correct, ties))
}

/// Scores every distinct text of `pairs` once (in parallel) and counts
/// correctly ordered pairs.
pub fn ranking_accuracy<F>(scorer: F, pairs: &PairCorpus) -> Result<RankingResult, EvalError>
where
    F: Fn(&str) -> f64 + Sync,
{
    if pairs.is_empty() {
        return Err(EvalError::EmptyPairs);
    }
    let mut unique: Vec<&str> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for p in &pairs.pairs {
        for t in [p.less_toxic.as_str(), p.more_toxic.as_str()] {
            index.entry(t).or_insert_with(|| {
                unique.push(t);
                unique.len() - 1
            });
        }
    }
    let scores: Vec<f64> = unique.par_iter().map(|t| scorer(t)).collect();
    let paired: Vec<(f64, f64)> = pairs
        .pairs
        .iter()
        .map(|p| (scores[index[p.less_toxic.as_str()]], scores[index[p.more_toxic.as_str()]]))
        .collect();
    ranking_accuracy_from_scores(&paired)
}
