//! The `TOXB` model bundle: cleaner, vectorizer and model in one file.
//!
//! ```text
//! "TOXB"                      4 bytes magic
//! format_version              u32 LE
//! header                      u64 LE length + canonical JSON
//! vocabulary                  u64 LE length + n_docs u64, n_terms u64,
//!                             then per term: u32 byte length, UTF-8 bytes, df u64
//! weights                     u64 LE length + f64 LE values
//! crc32                       u32 LE, IEEE CRC-32 of every preceding byte
//! ```
//!
//! Linear weights are stored as `[bias, w₀, w₁, …]`; MLP parameters in the
//! order of [`MlpModel::parameters`]. Idf values are recomputed from the
//! stored document frequencies.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cleaning::CleanMode;
use crate::models::{Activation, LinearModel, MlpModel, Model};
use crate::vectorizer::{SparseVector, VectorizerConfig, Vocabulary};

pub const MAGIC: &[u8; 4] = b"TOXB";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a TOXB bundle (bad magic)")]
    BadMagic,
    #[error("unsupported bundle format version {0} (this build reads {FORMAT_VERSION})")]
    UnsupportedVersion(u32),
    #[error("integrity check failed: {0}")]
    Integrity(String),
    #[error("vocabulary has {vocab} terms but the model expects {model} inputs")]
    DimensionMismatch { vocab: usize, model: usize },
    #[error("malformed bundle: {0}")]
    Malformed(String),
    #[error("bundle was cleaned with rule table {bundle}, this build has {current}")]
    RuleTableMismatch { bundle: String, current: String },
}

pub type Result<T> = std::result::Result<T, PersistError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMetadata {
    /// Training corpus tag, e.g. `class`.
    pub dataset: String,
    /// Model family it was trained as, e.g. `ridge`.
    pub model_kind: String,
    pub seed: u64,
    /// Unix seconds.
    pub created_at: i64,
    pub grid_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub format_version: u32,
    pub clean_mode: CleanMode,
    pub clean_rules_version: String,
    pub vocabulary: Vocabulary,
    pub model: Model,
    pub metadata: BundleMetadata,
}

/// Score of one text together with the cleaned text that was featurized.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scored {
    pub score: f64,
    pub cleaned: String,
}

impl ModelBundle {
    pub fn new(clean_mode: CleanMode, vocabulary: Vocabulary, model: Model, metadata: BundleMetadata) -> Result<Self> {
        let bundle = Self {
            format_version: FORMAT_VERSION,
            clean_mode,
            clean_rules_version: clean_mode.rules_version().to_string(),
            vocabulary,
            model,
            metadata,
        };
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(PersistError::UnsupportedVersion(self.format_version));
        }
        if self.vocabulary.len() != self.model.input_dim() {
            return Err(PersistError::DimensionMismatch {
                vocab: self.vocabulary.len(),
                model: self.model.input_dim(),
            });
        }
        let current = self.clean_mode.rules_version();
        if self.clean_rules_version != current {
            return Err(PersistError::RuleTableMismatch {
                bundle: self.clean_rules_version.clone(),
                current: current.to_string(),
            });
        }
        Ok(())
    }

    pub fn vectorizer_config(&self) -> &VectorizerConfig {
        self.vocabulary.config()
    }

    pub fn featurize(&self, text: &str) -> (String, SparseVector) {
        let cleaned = self.clean_mode.clean(text);
        let x = self.vocabulary.transform(&cleaned);
        (cleaned, x)
    }

    /// Clean, featurize and predict.
    pub fn score(&self, text: &str) -> Scored {
        let (cleaned, x) = self.featurize(text);
        let score = self
            .model
            .predict(&x)
            .expect("bundle vocabulary and model dimensions are validated");
        Scored { score, cleaned }
    }

    /// Identifier reported by the scoring service.
    pub fn model_version(&self) -> String {
        let cfg = self.vectorizer_config();
        let analyzer = match cfg.analyzer {
            crate::vectorizer::Analyzer::Char => "char",
            crate::vectorizer::Analyzer::Word => "word",
        };
        format!(
            "toxb{}/{}/{}{}-{}/{}",
            self.format_version,
            self.clean_rules_version,
            analyzer,
            cfg.ngram_min,
            cfg.ngram_max,
            self.metadata.model_kind
        )
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum ModelShape {
    Linear { input_dim: usize },
    Mlp { input_dim: usize, hidden: usize, activation: Activation },
}

#[derive(Serialize, Deserialize)]
struct Header {
    clean_mode: CleanMode,
    clean_rules_version: String,
    vectorizer: VectorizerConfig,
    model: ModelShape,
    metadata: BundleMetadata,
}

fn put_section(out: &mut Vec<u8>, body: &[u8]) {
    out.extend_from_slice(&(body.len() as u64).to_le_bytes());
    out.extend_from_slice(body);
}

/// Serializes without validating; [`save_bundle`] validates first.
fn encode(bundle: &ModelBundle) -> Vec<u8> {
    let shape = match &bundle.model {
        Model::Linear(m) => ModelShape::Linear { input_dim: m.input_dim() },
        Model::Mlp(m) => ModelShape::Mlp {
            input_dim: m.input_size,
            hidden: m.hidden_size,
            activation: m.activation,
        },
    };
    let header = Header {
        clean_mode: bundle.clean_mode,
        clean_rules_version: bundle.clean_rules_version.clone(),
        vectorizer: bundle.vocabulary.config().clone(),
        model: shape,
        metadata: bundle.metadata.clone(),
    };

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&bundle.format_version.to_le_bytes());
    put_section(&mut out, &serde_json::to_vec(&header).expect("header serializes"));

    let vocab = &bundle.vocabulary;
    let mut body = Vec::new();
    body.extend_from_slice(&(vocab.n_docs() as u64).to_le_bytes());
    body.extend_from_slice(&(vocab.len() as u64).to_le_bytes());
    for (term, df) in vocab.records() {
        body.extend_from_slice(&(term.len() as u32).to_le_bytes());
        body.extend_from_slice(term.as_bytes());
        body.extend_from_slice(&df.to_le_bytes());
    }
    put_section(&mut out, &body);

    let params: Vec<f64> = match &bundle.model {
        Model::Linear(m) => std::iter::once(m.bias).chain(m.weights.iter().copied()).collect(),
        Model::Mlp(m) => m.parameters(),
    };
    let mut body = Vec::with_capacity(params.len() * 8);
    for p in params {
        body.extend_from_slice(&p.to_le_bytes());
    }
    put_section(&mut out, &body);

    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn encode_bundle(bundle: &ModelBundle) -> Result<Vec<u8>> {
    bundle.validate()?;
    Ok(encode(bundle))
}

pub fn save_bundle(bundle: &ModelBundle, path: &Path) -> Result<()> {
    let bytes = encode_bundle(bundle)?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn load_bundle(path: &Path) -> Result<ModelBundle> {
    decode_bundle(&fs::read(path)?)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| PersistError::Malformed(format!("{what} runs past the end")))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn section(&mut self, what: &str) -> Result<&'a [u8]> {
        let len = self.u64(what)?;
        let len = usize::try_from(len).map_err(|_| PersistError::Malformed(format!("{what} too large")))?;
        self.take(len, what)
    }
}

pub fn decode_bundle(bytes: &[u8]) -> Result<ModelBundle> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(PersistError::BadMagic);
    }
    if bytes.len() < 12 {
        return Err(PersistError::Integrity("file truncated".into()));
    }
    let (payload, stored) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(stored.try_into().unwrap());
    let actual = crc32fast::hash(payload);
    if stored != actual {
        return Err(PersistError::Integrity(format!(
            "CRC-32 mismatch (stored {stored:08x}, computed {actual:08x})"
        )));
    }

    let mut cur = Cursor { bytes: payload, pos: 4 };
    let version = cur.u32("format version")?;
    if version != FORMAT_VERSION {
        return Err(PersistError::UnsupportedVersion(version));
    }
    let header: Header = serde_json::from_slice(cur.section("header")?)
        .map_err(|e| PersistError::Malformed(format!("header: {e}")))?;

    let mut vc = Cursor {
        bytes: cur.section("vocabulary")?,
        pos: 0,
    };
    let n_docs = vc.u64("n_docs")? as usize;
    let n_terms = vc.u64("n_terms")? as usize;
    let mut records = Vec::with_capacity(n_terms.min(vc.bytes.len() / 12));
    for _ in 0..n_terms {
        let len = vc.u32("term length")? as usize;
        let term = std::str::from_utf8(vc.take(len, "term")?)
            .map_err(|_| PersistError::Malformed("term is not UTF-8".into()))?
            .to_string();
        let df = vc.u64("df")?;
        records.push((term, df));
    }
    if vc.pos != vc.bytes.len() {
        return Err(PersistError::Malformed("trailing bytes in vocabulary".into()));
    }
    let vocabulary = Vocabulary::from_parts(header.vectorizer, n_docs, records)
        .map_err(|e| PersistError::Malformed(e.to_string()))?;

    let raw = cur.section("weights")?;
    if raw.len() % 8 != 0 {
        return Err(PersistError::Malformed("weights section is not a whole number of f64".into()));
    }
    let params: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if cur.pos != payload.len() {
        return Err(PersistError::Malformed("trailing bytes after weights".into()));
    }

    let model = match header.model {
        ModelShape::Linear { input_dim } => {
            if params.len() != input_dim + 1 {
                return Err(PersistError::Malformed(format!(
                    "linear model of dimension {input_dim} needs {} weights, found {}",
                    input_dim + 1,
                    params.len()
                )));
            }
            Model::Linear(LinearModel {
                bias: params[0],
                weights: params[1..].to_vec(),
            })
        }
        ModelShape::Mlp {
            input_dim,
            hidden,
            activation,
        } => {
            let mut m = MlpModel::init(0, hidden, 0, 0.0);
            m.activation = activation;
            m.input_size = input_dim;
            m.hidden_weights = vec![0.0; input_dim * hidden];
            if params.len() != m.parameter_count() {
                return Err(PersistError::Malformed(format!(
                    "MLP {input_dim}x{hidden} needs {} parameters, found {}",
                    m.parameter_count(),
                    params.len()
                )));
            }
            m.set_parameters(&params);
            Model::Mlp(m)
        }
    };

    let bundle = ModelBundle {
        format_version: version,
        clean_mode: header.clean_mode,
        clean_rules_version: header.clean_rules_version,
        vocabulary,
        model,
        metadata: header.metadata,
    };
    bundle.validate()?;
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vectorizer::{fit, Preset};

    fn sample() -> ModelBundle {
        let texts = ["you are nice", "you are awful", "nice and kind", "awful awful person", "kind person"];
        let cfg = VectorizerConfig {
            min_df: 1,
            max_df: 1.0,
            ..Preset::Tfidf2.config()
        };
        let vocab = fit(&texts, &cfg).unwrap();
        let weights = (0..vocab.len()).map(|i| i as f64 * 0.125 - 0.5).collect();
        let model = Model::Linear(LinearModel { weights, bias: 0.25 });
        ModelBundle::new(
            CleanMode::Clean0,
            vocab,
            model,
            BundleMetadata {
                dataset: "class".into(),
                model_kind: "ridge".into(),
                seed: 42,
                created_at: 0,
                grid_accuracy: Some(0.6722),
            },
        )
        .unwrap()
    }

    #[test]
    fn round_trip_and_canonical_bytes() {
        let b = sample();
        let bytes = encode_bundle(&b).unwrap();
        assert_eq!(&bytes[..4], b"TOXB");
        assert_eq!(decode_bundle(&bytes).unwrap(), b);
        assert_eq!(encode_bundle(&b).unwrap(), bytes);
    }

    #[test]
    fn truncation_fails_integrity() {
        let bytes = encode_bundle(&sample()).unwrap();
        assert!(matches!(
            decode_bundle(&bytes[..bytes.len() - 1]),
            Err(PersistError::Integrity(_))
        ));
        assert!(matches!(decode_bundle(&bytes[..6]), Err(PersistError::Integrity(_))));
    }

    #[test]
    fn wrong_magic() {
        let mut bytes = encode_bundle(&sample()).unwrap();
        bytes[0] = b'X';
        assert!(matches!(decode_bundle(&bytes), Err(PersistError::BadMagic)));
        assert!(matches!(decode_bundle(b"id,text\n"), Err(PersistError::BadMagic)));
    }

    #[test]
    fn unsupported_version_with_valid_crc() {
        let mut bytes = encode_bundle(&sample()).unwrap();
        bytes[4] = 9;
        let n = bytes.len();
        let crc = crc32fast::hash(&bytes[..n - 4]);
        bytes[n - 4..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(decode_bundle(&bytes), Err(PersistError::UnsupportedVersion(9))));
    }

    #[test]
    fn vocabulary_and_weights_disagree() {
        let mut b = sample();
        if let Model::Linear(m) = &mut b.model {
            m.weights.pop();
        }
        assert!(matches!(encode_bundle(&b), Err(PersistError::DimensionMismatch { .. })));
        let bytes = encode(&b);
        assert!(matches!(
            decode_bundle(&bytes),
            Err(PersistError::DimensionMismatch { vocab, model }) if vocab == model + 1
        ));
    }

    #[test]
    fn changed_rule_table_is_refused() {
        let mut b = sample();
        b.clean_rules_version = "clean0-v0".into();
        assert!(matches!(
            decode_bundle(&encode(&b)),
            Err(PersistError::RuleTableMismatch { .. })
        ));
    }

    #[test]
    fn mlp_bundle_round_trips() {
        let base = sample();
        let mlp = MlpModel::init(base.vocabulary.len(), 3, 5, 0.1);
        let b = ModelBundle::new(
            CleanMode::Clean1,
            base.vocabulary.clone(),
            Model::Mlp(mlp),
            BundleMetadata {
                model_kind: "mlp".into(),
                grid_accuracy: None,
                ..base.metadata.clone()
            },
        )
        .unwrap();
        let back = decode_bundle(&encode_bundle(&b).unwrap()).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.score("you are awful").score.to_bits(), b.score("you are awful").score.to_bits());
    }

    #[test]
    fn empty_text_scores_bias() {
        let b = sample();
        let s = b.score("");
        assert_eq!(s.score, 0.25);
        assert_eq!(s.cleaned, "");
        assert_eq!(b.model_version(), "toxb1/clean0-v1/word1-2/ridge");
    }
}
