//! Labeled comment corpora and worker-judged comparison pairs.
//!
//! Every loader produces targets in `[0, 1]`:
//!
//! | source  | target                                              |
//! |---------|-----------------------------------------------------|
//! | Class   | weighted mean of the six binary labels              |
//! | Multi   | same as Class                                       |
//! | Bias    | mean of the individual toxicity annotations         |
//! | Ruddit  | `(offensiveness_score + 1) / 2`                     |

mod loaders;
mod stats;

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use loaders::{
    load_bias_dataset, load_bias_dataset_joined, load_class_dataset, load_multi_dataset,
    load_ruddit_dataset, load_validation_pairs, BiasLoad,
};
pub use stats::{corpus_stats, CorrelationRow, LabelCount, LengthQuantiles, StatsReport, TagCount};

/// Names of the six label columns, in file order.
pub const LABEL_NAMES: [&str; 6] = [
    "toxic",
    "severe_toxic",
    "obscene",
    "threat",
    "insult",
    "identity_hate",
];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: malformed CSV: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{}: missing column `{column}`", path.display())]
    MissingColumn { path: PathBuf, column: String },
    #[error("{}: line {line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{}: no data rows after the header", path.display())]
    Empty { path: PathBuf },
    #[error("label weights must be finite, non-negative and not all zero")]
    InvalidWeights,
    #[error("corpus `{0}` has no multi-label columns")]
    UnsupportedSource(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("merge needs at least one corpus")]
    NoCorpora,
}

pub type Result<T> = std::result::Result<T, CorpusError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Class,
    Bias,
    Multi,
    Ruddit,
}

impl Source {
    pub const ALL: [Source; 4] = [Source::Class, Source::Bias, Source::Multi, Source::Ruddit];

    pub fn name(self) -> &'static str {
        match self {
            Source::Class => "class",
            Source::Bias => "bias",
            Source::Multi => "multi",
            Source::Ruddit => "ruddit",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawComment {
    pub id: String,
    pub text: String,
    pub source: Source,
}

/// The six binary toxicity flags of the Class and Multi schemas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct MultiLabel([u8; 6]);

impl MultiLabel {
    /// Returns `None` unless every flag is 0 or 1.
    pub fn new(flags: [u8; 6]) -> Option<Self> {
        flags.iter().all(|&f| f <= 1).then_some(Self(flags))
    }

    pub fn flags(&self) -> [u8; 6] {
        self.0
    }

    /// Number of labels set on this sample.
    pub fn count(&self) -> usize {
        self.0.iter().map(|&f| f as usize).sum()
    }

    pub fn is_toxic(&self) -> bool {
        self.count() > 0
    }
}

/// Non-negative weights for the six labels, used to turn a label vector
/// into a scalar target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelWeights([f64; 6]);

impl LabelWeights {
    pub fn new(weights: [f64; 6]) -> Result<Self> {
        let valid = weights.iter().all(|w| w.is_finite() && *w >= 0.0)
            && weights.iter().any(|w| *w > 0.0);
        if valid {
            Ok(Self(weights))
        } else {
            Err(CorpusError::InvalidWeights)
        }
    }

    pub fn values(&self) -> [f64; 6] {
        self.0
    }

    /// `(w · labels) / (w · 1)`.
    pub fn target(&self, labels: &MultiLabel) -> f64 {
        let total: f64 = self.0.iter().sum();
        let hit: f64 = self
            .0
            .iter()
            .zip(labels.0.iter())
            .map(|(w, &l)| w * l as f64)
            .sum();
        (hit / total).clamp(0.0, 1.0)
    }
}

impl Default for LabelWeights {
    fn default() -> Self {
        Self([1.0; 6])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledComment {
    pub comment: RawComment,
    pub target: f64,
    /// Present only for the six-label schemas.
    pub labels: Option<MultiLabel>,
}

impl LabeledComment {
    /// Empty texts are kept in the corpus; this is the flag for them.
    pub fn is_empty(&self) -> bool {
        self.comment.text.trim().is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCorpus {
    pub items: Vec<LabeledComment>,
    pub source_tag: String,
}

impl LabeledCorpus {
    pub fn new(source_tag: impl Into<String>, items: Vec<LabeledComment>) -> Self {
        Self {
            items,
            source_tag: source_tag.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Keeps the first `n` items (desk-scale runs).
    pub fn truncate(&mut self, n: usize) {
        self.items.truncate(n);
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|item| item.comment.text.as_str())
    }

    pub fn targets(&self) -> Vec<f64> {
        self.items.iter().map(|item| item.target).collect()
    }

    pub fn empty_count(&self) -> usize {
        self.items.iter().filter(|item| item.is_empty()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ComparisonPair {
    pub worker: String,
    pub less_toxic: String,
    pub more_toxic: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCorpus {
    pub pairs: Vec<ComparisonPair>,
}

impl PairCorpus {
    pub fn new(pairs: Vec<ComparisonPair>) -> Self {
        Self { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// The same pairs with the less/more columns exchanged.
    pub fn swapped(&self) -> PairCorpus {
        PairCorpus::new(
            self.pairs
                .iter()
                .map(|p| ComparisonPair {
                    worker: p.worker.clone(),
                    less_toxic: p.more_toxic.clone(),
                    more_toxic: p.less_toxic.clone(),
                })
                .collect(),
        )
    }

    /// Number of pairs of `self` whose (less, more) texts also occur as a
    /// pair in `other`, in either orientation.
    pub fn overlap(&self, other: &PairCorpus) -> usize {
        let seen: std::collections::HashSet<(&str, &str)> = other
            .pairs
            .iter()
            .flat_map(|p| {
                [
                    (p.less_toxic.as_str(), p.more_toxic.as_str()),
                    (p.more_toxic.as_str(), p.less_toxic.as_str()),
                ]
            })
            .collect();
        self.pairs
            .iter()
            .filter(|p| seen.contains(&(p.less_toxic.as_str(), p.more_toxic.as_str())))
            .count()
    }
}

/// Concatenates corpora. With `dedup`, items with byte-identical text are
/// collapsed onto the first occurrence, whose target becomes the mean of
/// the duplicates' targets. Labels and ids of the first occurrence are kept.
pub fn merge_corpora(corpora: &[LabeledCorpus], dedup: bool) -> Result<LabeledCorpus> {
    let first = corpora.first().ok_or(CorpusError::NoCorpora)?;
    if corpora.len() == 1 && !dedup {
        return Ok(first.clone());
    }
    let tag = corpora
        .iter()
        .map(|c| c.source_tag.as_str())
        .collect::<Vec<_>>()
        .join("+");
    let all = corpora.iter().flat_map(|c| c.items.iter());
    if !dedup {
        return Ok(LabeledCorpus::new(tag, all.cloned().collect()));
    }

    let mut items: Vec<LabeledComment> = Vec::new();
    // running (sum, count) per surviving item
    let mut sums: Vec<(f64, usize)> = Vec::new();
    let mut by_text: HashMap<&str, usize> = HashMap::new();
    for item in all {
        match by_text.get(item.comment.text.as_str()) {
            Some(&slot) => {
                sums[slot].0 += item.target;
                sums[slot].1 += 1;
            }
            None => {
                by_text.insert(item.comment.text.as_str(), items.len());
                items.push(item.clone());
                sums.push((item.target, 1));
            }
        }
    }
    for (item, (sum, count)) in items.iter_mut().zip(sums) {
        if count > 1 {
            item.target = (sum / count as f64).clamp(0.0, 1.0);
        }
    }
    Ok(LabeledCorpus::new(tag, items))
}
