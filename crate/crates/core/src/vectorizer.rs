//! TF-IDF features over character or word n-grams.
//!
//! Term frequency is the in-document ratio `f(t,d) / Σ f(t',d)` where the
//! sum runs over every extracted n-gram of the document, in-vocabulary or
//! not. Inverse document frequency is smoothed as `ln(N / (1 + df)) + 1`.
//! Output vectors are L2-normalized.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum VectorizerError {
    #[error("cannot fit a vocabulary on an empty corpus")]
    EmptyCorpus,
    #[error("no term survives min_df={min_df}, max_df={max_df} over {n_docs} documents")]
    EmptyVocabulary {
        min_df: usize,
        max_df: f64,
        n_docs: usize,
    },
    #[error("invalid vectorizer config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Analyzer {
    Char,
    Word,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorizerConfig {
    pub analyzer: Analyzer,
    pub ngram_min: usize,
    pub ngram_max: usize,
    /// Minimum number of documents a term must occur in.
    pub min_df: usize,
    /// Maximum fraction of documents a term may occur in.
    pub max_df: f64,
    pub max_features: Option<usize>,
}

/// Feature cap of the reduced character preset.
pub const TFIDF1_MAX_FEATURES: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Tfidf0,
    Tfidf1,
    Tfidf2,
    Tfidf3,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Tfidf0, Preset::Tfidf1, Preset::Tfidf2, Preset::Tfidf3];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Tfidf0 => "tfidf0",
            Preset::Tfidf1 => "tfidf1",
            Preset::Tfidf2 => "tfidf2",
            Preset::Tfidf3 => "tfidf3",
        }
    }

    pub fn config(self) -> VectorizerConfig {
        let (analyzer, ngram_min, ngram_max, max_features) = match self {
            Preset::Tfidf0 => (Analyzer::Char, 3, 5, None),
            Preset::Tfidf1 => (Analyzer::Char, 3, 5, Some(TFIDF1_MAX_FEATURES)),
            Preset::Tfidf2 => (Analyzer::Word, 1, 2, None),
            Preset::Tfidf3 => (Analyzer::Word, 1, 5, None),
        };
        VectorizerConfig {
            analyzer,
            ngram_min,
            ngram_max,
            min_df: 3,
            max_df: 0.5,
            max_features,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown preset `{s}` (expected one of tfidf0, tfidf1, tfidf2, tfidf3)"))
    }
}

impl VectorizerConfig {
    pub fn validate(&self) -> Result<(), VectorizerError> {
        if self.ngram_min == 0 || self.ngram_max < self.ngram_min {
            return Err(VectorizerError::InvalidConfig(format!(
                "n-gram range {}..={} is empty",
                self.ngram_min, self.ngram_max
            )));
        }
        if !(self.max_df > 0.0 && self.max_df <= 1.0) {
            return Err(VectorizerError::InvalidConfig(format!(
                "max_df {} outside (0, 1]",
                self.max_df
            )));
        }
        if self.max_features == Some(0) {
            return Err(VectorizerError::InvalidConfig("max_features must be positive".into()));
        }
        Ok(())
    }
}

/// One document's L2-normalized TF-IDF features, sorted by index.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vector from `(index, value)` entries. Panics unless the
    /// indices are strictly increasing.
    pub fn from_entries(entries: impl IntoIterator<Item = (u32, f64)>) -> Self {
        let (indices, values): (Vec<u32>, Vec<f64>) = entries.into_iter().unzip();
        assert!(
            indices.windows(2).all(|w| w[0] < w[1]),
            "sparse indices must be strictly increasing"
        );
        Self { indices, values }
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| (i as usize, v))
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> SparseVector {
        SparseVector {
            indices: self.indices.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Largest index plus one, or 0 for the empty vector.
    pub fn min_dim(&self) -> usize {
        self.indices.last().map_or(0, |&i| i as usize + 1)
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * dense[i]).sum()
    }
}

/// Whitespace-normalized text for character windows: runs of whitespace
/// become one space, ends trimmed.
fn char_stream(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Alphanumeric tokens joined by single spaces.
fn word_stream(text: &str) -> String {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Calls `emit` with every n-gram of `text` as a slice of the normalized
/// stream. Both analyzers produce contiguous slices, so no n-gram is
/// allocated.
fn for_each_ngram<'a>(stream: &'a str, config: &VectorizerConfig, mut emit: impl FnMut(&'a str)) {
    match config.analyzer {
        Analyzer::Char => {
            // byte offsets of every char boundary, including the end
            let bounds: Vec<usize> = stream
                .char_indices()
                .map(|(i, _)| i)
                .chain(std::iter::once(stream.len()))
                .collect();
            let n_chars = bounds.len() - 1;
            for n in config.ngram_min..=config.ngram_max {
                if n > n_chars {
                    break;
                }
                for start in 0..=(n_chars - n) {
                    emit(&stream[bounds[start]..bounds[start + n]]);
                }
            }
        }
        Analyzer::Word => {
            // (start, end) of each token
            let mut spans = Vec::new();
            let mut start = 0;
            for (i, c) in stream.char_indices() {
                if c == ' ' {
                    spans.push((start, i));
                    start = i + 1;
                }
            }
            if !stream.is_empty() {
                spans.push((start, stream.len()));
            }
            for n in config.ngram_min..=config.ngram_max {
                if n > spans.len() {
                    break;
                }
                for first in 0..=(spans.len() - n) {
                    emit(&stream[spans[first].0..spans[first + n - 1].1]);
                }
            }
        }
    }
}

fn stream_for(text: &str, analyzer: Analyzer) -> String {
    match analyzer {
        Analyzer::Char => char_stream(text),
        Analyzer::Word => word_stream(text),
    }
}

/// All n-grams of `text` in extraction order (a multiset).
pub fn extract_ngrams(text: &str, config: &VectorizerConfig) -> Vec<String> {
    let stream = stream_for(text, config.analyzer);
    let mut out = Vec::new();
    for_each_ngram(&stream, config, |g| out.push(g.to_string()));
    out
}

/// Fitted term table. Terms are indexed in lexicographic order.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    config: VectorizerConfig,
    n_docs: usize,
    terms: Vec<String>,
    df: Vec<u64>,
    idf: Vec<f64>,
    lookup: HashMap<String, u32>,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.n_docs == other.n_docs
            && self.terms == other.terms
            && self.df == other.df
            && self.idf.iter().map(|v| v.to_bits()).eq(other.idf.iter().map(|v| v.to_bits()))
    }
}

pub fn smoothed_idf(n_docs: usize, df: u64) -> f64 {
    (n_docs as f64 / (1.0 + df as f64)).ln() + 1.0
}

impl Vocabulary {
    /// Rebuilds a vocabulary from stored `(term, df)` records, recomputing
    /// idf. Terms must be strictly increasing.
    pub fn from_parts(
        config: VectorizerConfig,
        n_docs: usize,
        records: Vec<(String, u64)>,
    ) -> Result<Self, VectorizerError> {
        config.validate()?;
        if !records.windows(2).all(|w| w[0].0 < w[1].0) {
            return Err(VectorizerError::InvalidConfig(
                "vocabulary terms must be unique and sorted".into(),
            ));
        }
        let (terms, df): (Vec<String>, Vec<u64>) = records.into_iter().unzip();
        let idf = df.iter().map(|&d| smoothed_idf(n_docs, d)).collect();
        let lookup = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Ok(Self {
            config,
            n_docs,
            terms,
            df,
            idf,
            lookup,
        })
    }

    pub fn config(&self) -> &VectorizerConfig {
        &self.config
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn df(&self) -> &[u64] {
        &self.df
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn index_of(&self, term: &str) -> Option<u32> {
        self.lookup.get(term).copied()
    }

    /// `(index, df, idf)` of a term.
    pub fn entry(&self, term: &str) -> Option<(u32, u64, f64)> {
        self.index_of(term)
            .map(|i| (i, self.df[i as usize], self.idf[i as usize]))
    }

    /// `(term, df)` records in index order.
    pub fn records(&self) -> impl Iterator<Item = (&str, u64)> {
        self.terms.iter().map(String::as_str).zip(self.df.iter().copied())
    }

    /// TF-IDF vector of an already-cleaned text.
    pub fn transform(&self, text: &str) -> SparseVector {
        let stream = stream_for(text, self.config.analyzer);
        let mut total = 0u64;
        let mut counts: HashMap<u32, u64> = HashMap::new();
        for_each_ngram(&stream, &self.config, |g| {
            total += 1;
            if let Some(&i) = self.lookup.get(g) {
                *counts.entry(i).or_default() += 1;
            }
        });
        let mut entries: Vec<(u32, f64)> = counts
            .into_iter()
            .map(|(i, c)| (i, c as f64 / total as f64 * self.idf[i as usize]))
            .collect();
        entries.sort_unstable_by_key(|e| e.0);
        let norm = entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
        if norm > 0.0 {
            for e in &mut entries {
                e.1 /= norm;
            }
        }
        SparseVector::from_entries(entries)
    }

    pub fn transform_all<S: AsRef<str> + Sync>(&self, texts: &[S]) -> Vec<SparseVector> {
        texts.par_iter().map(|t| self.transform(t.as_ref())).collect()
    }
}

/// Fits a vocabulary on already-cleaned texts.
pub fn fit<S: AsRef<str> + Sync>(texts: &[S], config: &VectorizerConfig) -> Result<Vocabulary, VectorizerError> {
    config.validate()?;
    if texts.is_empty() {
        return Err(VectorizerError::EmptyCorpus);
    }
    let streams: Vec<String> = texts
        .par_iter()
        .map(|t| stream_for(t.as_ref(), config.analyzer))
        .collect();

    // Document frequencies: per-chunk maps merged by summation, which is
    // order-independent.
    let df: HashMap<&str, u64> = streams
        .par_chunks(256)
        .map(|chunk| {
            let mut local: HashMap<&str, u64> = HashMap::new();
            let mut seen: std::collections::HashSet<&str> = std::collections::HashSet::new();
            for stream in chunk {
                seen.clear();
                for_each_ngram(stream, config, |g| {
                    seen.insert(g);
                });
                for &g in &seen {
                    *local.entry(g).or_default() += 1;
                }
            }
            local
        })
        .reduce(HashMap::new, |mut a, b| {
            if a.len() < b.len() {
                return merge_counts(b, a);
            }
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        });

    let n_docs = texts.len();
    let max_count = config.max_df * n_docs as f64;
    let mut kept: Vec<(&str, u64)> = df
        .into_iter()
        .filter(|&(_, d)| d as usize >= config.min_df && d as f64 <= max_count)
        .collect();
    if let Some(cap) = config.max_features {
        if kept.len() > cap {
            kept.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
            kept.truncate(cap);
        }
    }
    if kept.is_empty() {
        return Err(VectorizerError::EmptyVocabulary {
            min_df: config.min_df,
            max_df: config.max_df,
            n_docs,
        });
    }
    kept.sort_unstable_by(|a, b| a.0.cmp(b.0));
    let records = kept.into_iter().map(|(t, d)| (t.to_string(), d)).collect();
    Vocabulary::from_parts(config.clone(), n_docs, records)
}

fn merge_counts<'a>(mut into: HashMap<&'a str, u64>, from: HashMap<&'a str, u64>) -> HashMap<&'a str, u64> {
    for (k, v) in from {
        *into.entry(k).or_default() += v;
    }
    into
}

/// Fit followed by transform of every training text.
pub fn fit_transform<S: AsRef<str> + Sync>(
    texts: &[S],
    config: &VectorizerConfig,
) -> Result<(Vocabulary, Vec<SparseVector>), VectorizerError> {
    let vocab = fit(texts, config)?;
    let vectors = vocab.transform_all(texts);
    Ok((vocab, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn char_cfg(min: usize, max: usize) -> VectorizerConfig {
        VectorizerConfig {
            analyzer: Analyzer::Char,
            ngram_min: min,
            ngram_max: max,
            min_df: 1,
            max_df: 1.0,
            max_features: None,
        }
    }

    fn word_cfg(min: usize, max: usize) -> VectorizerConfig {
        VectorizerConfig {
            analyzer: Analyzer::Word,
            ..char_cfg(min, max)
        }
    }

    fn sorted(mut v: Vec<String>) -> Vec<String> {
        v.sort();
        v
    }

    #[test]
    fn char_windows() {
        assert!(extract_ngrams("ab", &Preset::Tfidf0.config()).is_empty());
        assert_eq!(extract_ngrams("abcd", &char_cfg(3, 3)), vec!["abc", "bcd"]);
        assert_eq!(extract_ngrams("a  b", &char_cfg(3, 3)), vec!["a b"]);
        assert_eq!(extract_ngrams("héllo", &char_cfg(4, 4)), vec!["héll", "éllo"]);
        assert!(extract_ngrams("", &char_cfg(1, 2)).is_empty());
    }

    #[test]
    fn word_grams() {
        assert_eq!(
            sorted(extract_ngrams("to be or", &word_cfg(1, 2))),
            sorted(vec!["to".into(), "be".into(), "or".into(), "to be".into(), "be or".into()])
        );
        assert_eq!(extract_ngrams("don't-stop", &word_cfg(2, 2)), vec!["don t", "t stop"]);
        assert!(extract_ngrams("!!! ???", &word_cfg(1, 1)).is_empty());
    }

    #[test]
    fn presets() {
        let c = Preset::Tfidf1.config();
        assert_eq!((c.analyzer, c.ngram_min, c.ngram_max), (Analyzer::Char, 3, 5));
        assert_eq!(c.max_features, Some(50_000));
        assert_eq!((c.min_df, c.max_df), (3, 0.5));
        let c = Preset::Tfidf3.config();
        assert_eq!((c.analyzer, c.ngram_min, c.ngram_max, c.max_features), (Analyzer::Word, 1, 5, None));
        assert!("tfidf9".parse::<Preset>().unwrap_err().contains("tfidf0, tfidf1, tfidf2, tfidf3"));
    }

    #[test]
    fn identical_documents_keep_every_term() {
        let cfg = VectorizerConfig {
            min_df: 3,
            ..word_cfg(1, 1)
        };
        let vocab = fit(&["x y", "x y", "x y"], &cfg).unwrap();
        assert_eq!(vocab.terms(), &["x".to_string(), "y".to_string()]);
        assert!(vocab.df().iter().all(|&d| d == 3));
    }

    #[test]
    fn max_df_excludes_ubiquitous_terms() {
        let cfg = VectorizerConfig {
            max_df: 0.5,
            ..word_cfg(1, 1)
        };
        let vocab = fit(&["the cat", "the dog", "the cow", "the cat"], &cfg).unwrap();
        assert!(vocab.index_of("the").is_none());
        assert_eq!(vocab.entry("cat").unwrap().1, 2);
    }

    #[test]
    fn idf_of_rare_term() {
        let vocab = fit(&["a b", "b", "c", "d"], &word_cfg(1, 1)).unwrap();
        let (_, df, idf) = vocab.entry("a").unwrap();
        assert_eq!(df, 1);
        assert!((idf - (2f64.ln() + 1.0)).abs() < 1e-15);
        assert!((idf - 1.6931471805599454).abs() < 1e-12);
    }

    #[test]
    fn empty_vocabulary_is_an_error() {
        let cfg = VectorizerConfig {
            min_df: 3,
            ..word_cfg(1, 1)
        };
        assert!(matches!(fit(&["a", "b"], &cfg), Err(VectorizerError::EmptyVocabulary { .. })));
        assert_eq!(fit::<&str>(&[], &cfg).unwrap_err(), VectorizerError::EmptyCorpus);
    }

    #[test]
    fn max_features_by_df_then_lexicographic() {
        let cfg = VectorizerConfig {
            max_features: Some(2),
            ..word_cfg(1, 1)
        };
        let vocab = fit(&["a b c", "b c", "d"], &cfg).unwrap();
        assert_eq!(vocab.terms(), &["b".to_string(), "c".to_string()]);
    }

    #[test]
    fn transform_hand_evaluated() {
        let vocab = Vocabulary::from_parts(word_cfg(1, 1), 4, vec![("a".into(), 1), ("b".into(), 3)])
            .unwrap();
        // idf(a) = ln(4/2)+1, idf(b) = ln(4/4)+1 = 1
        let v = vocab.transform("a b a");
        let ia = 2.0 / 3.0 * (2f64.ln() + 1.0);
        let ib = 1.0 / 3.0;
        let n = (ia * ia + ib * ib).sqrt();
        assert_eq!(v.indices(), &[0, 1]);
        assert!((v.values()[0] - ia / n).abs() < 1e-15);
        assert!((v.values()[1] - ib / n).abs() < 1e-15);
    }

    #[test]
    fn transform_equal_weights_example() {
        // the tf·idf products of a (2/3 · 1) and b (1/3 · 2) coincide
        let mut vocab =
            Vocabulary::from_parts(word_cfg(1, 1), 4, vec![("a".into(), 1), ("b".into(), 3)]).unwrap();
        vocab.idf = vec![1.0, 2.0];
        let v = vocab.transform("a b a");
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((v.values()[0] - h).abs() < 1e-12 && (v.values()[1] - h).abs() < 1e-12);
    }

    #[test]
    fn transform_edge_cases() {
        let vocab = fit(&["hello", "world"], &word_cfg(1, 1)).unwrap();
        assert!(vocab.transform("").is_empty());
        assert!(vocab.transform("unknown words").is_empty());
        let single = vocab.transform("hello");
        assert_eq!(single.values(), &[1.0]);
    }

    #[test]
    fn fit_transform_matches_separate_calls() {
        let texts = ["one two", "two three", "three one two"];
        let (vocab, vectors) = fit_transform(&texts, &word_cfg(1, 2)).unwrap();
        assert_eq!(vectors.len(), texts.len());
        for (t, v) in texts.iter().zip(&vectors) {
            assert_eq!(&vocab.transform(t), v);
        }
        assert_eq!(fit(&texts, &word_cfg(1, 2)).unwrap(), vocab);
    }
}
