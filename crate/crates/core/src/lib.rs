//! Toxic comment scoring pipeline.
//!
//! The crate is organised the way data flows through it:
//!
//! * [`corpus`] parses the labeled comment datasets and the worker-judged
//!   comparison pairs, derives scalar toxicity targets and computes label
//!   statistics.
//! * [`cleaning`] holds the two regex rule templates applied before
//!   featurization.
//! * [`vectorizer`] fits and applies TF-IDF over character or word n-grams.
//! * [`models`] trains ridge, linear SVR, MLP regressors and a linear
//!   pairwise ranker trained with a margin ranking loss.
//! * [`evaluation`] measures pairwise ranking accuracy and runs the
//!   dataset × cleaner × featurizer × model grid.
//! * [`persistence`] reads and writes the `TOXB` model bundle format.

pub mod cleaning;
pub mod corpus;
pub mod evaluation;
pub mod models;
pub mod persistence;
pub mod vectorizer;

pub use cleaning::CleanMode;
pub use corpus::{ComparisonPair, LabeledComment, LabeledCorpus, PairCorpus, Source};
pub use evaluation::{ranking_accuracy, RankingResult};
pub use models::{LinearModel, MlpModel, Model, TrainParams, TrainReport};
pub use persistence::{load_bundle, save_bundle, ModelBundle};
pub use vectorizer::{SparseVector, VectorizerConfig, Vocabulary};
