//! Label statistics for the six-label corpora, emitted as plot data.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CorpusError, LabeledCorpus, MultiLabel, Result, LABEL_NAMES};

pub const QUANTILE_PROBS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelCount {
    pub label: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagCount {
    /// Number of labels set on a sample.
    pub tags: usize,
    /// Number of samples with that many labels.
    pub count: usize,
}

/// One row of the Pearson correlation matrix. `degenerate` marks a constant
/// label column, for which every entry of the row is reported as 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub label: String,
    pub values: Vec<f64>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthQuantiles {
    /// `clean` (no label set) or `toxic`.
    pub class: String,
    /// `words` or `sentences`.
    pub metric: String,
    pub n: usize,
    pub probs: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub n_samples: usize,
    pub labels: Vec<String>,
    pub label_counts: Vec<LabelCount>,
    pub tags_histogram: Vec<TagCount>,
    pub correlation: Vec<CorrelationRow>,
    pub length_quantiles: Vec<LengthQuantiles>,
}

impl StatsReport {
    pub fn correlation_matrix(&self) -> Vec<Vec<f64>> {
        self.correlation.iter().map(|r| r.values.clone()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats report serializes")
    }
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Segments between `.`, `!`, `?` or newlines that contain any
/// non-whitespace character.
pub fn sentence_count(text: &str) -> usize {
    text.split(['.', '!', '?', '\n'])
        .filter(|s| !s.trim().is_empty())
        .count()
}

/// Linear-interpolation quantile of an ascending slice.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn quantiles(class: &str, metric: &str, mut values: Vec<f64>) -> LengthQuantiles {
    values.sort_by(f64::total_cmp);
    let qs = if values.is_empty() {
        Vec::new()
    } else {
        QUANTILE_PROBS.iter().map(|&p| quantile(&values, p)).collect()
    };
    LengthQuantiles {
        class: class.into(),
        metric: metric.into(),
        n: values.len(),
        probs: QUANTILE_PROBS.to_vec(),
        values: qs,
    }
}

fn pearson_matrix(labels: &[MultiLabel]) -> (Vec<Vec<f64>>, [bool; 6]) {
    let n = labels.len() as f64;
    let mut means = [0.0f64; 6];
    for l in labels {
        for (m, &f) in means.iter_mut().zip(l.flags().iter()) {
            *m += f as f64;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    let mut cov = [[0.0f64; 6]; 6];
    for l in labels {
        let f = l.flags();
        for i in 0..6 {
            let di = f[i] as f64 - means[i];
            for j in i..6 {
                cov[i][j] += di * (f[j] as f64 - means[j]);
            }
        }
    }
    let degenerate: [bool; 6] = std::array::from_fn(|i| cov[i][i] <= 0.0);
    let mut matrix = vec![vec![0.0; 6]; 6];
    for i in 0..6 {
        for j in i..6 {
            let value = if degenerate[i] || degenerate[j] {
                0.0
            } else if i == j {
                1.0
            } else {
                (cov[i][j] / (cov[i][i] * cov[j][j]).sqrt()).clamp(-1.0, 1.0)
            };
            matrix[i][j] = value;
            matrix[j][i] = value;
        }
    }
    (matrix, degenerate)
}

/// Label counts, tags-per-sample histogram, label correlation and
/// word/sentence length quantiles split by clean vs. toxic.
pub fn corpus_stats(corpus: &LabeledCorpus) -> Result<StatsReport> {
    if corpus.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let labels: Vec<MultiLabel> = corpus
        .items
        .iter()
        .map(|item| item.labels)
        .collect::<Option<_>>()
        .ok_or_else(|| CorpusError::UnsupportedSource(corpus.source_tag.clone()))?;

    let mut counts = [0usize; 6];
    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    for l in &labels {
        for (c, &f) in counts.iter_mut().zip(l.flags().iter()) {
            *c += f as usize;
        }
        *histogram.entry(l.count()).or_default() += 1;
    }

    let (matrix, degenerate) = pearson_matrix(&labels);

    let mut lengths: [Vec<f64>; 4] = Default::default();
    for (item, l) in corpus.items.iter().zip(&labels) {
        let offset = if l.is_toxic() { 2 } else { 0 };
        lengths[offset].push(word_count(&item.comment.text) as f64);
        lengths[offset + 1].push(sentence_count(&item.comment.text) as f64);
    }
    let [clean_words, clean_sentences, toxic_words, toxic_sentences] = lengths;

    Ok(StatsReport {
        n_samples: corpus.len(),
        labels: LABEL_NAMES.iter().map(|s| s.to_string()).collect(),
        label_counts: LABEL_NAMES
            .iter()
            .zip(counts)
            .map(|(name, count)| LabelCount {
                label: name.to_string(),
                count,
            })
            .collect(),
        tags_histogram: histogram
            .into_iter()
            .map(|(tags, count)| TagCount { tags, count })
            .collect(),
        correlation: LABEL_NAMES
            .iter()
            .zip(matrix)
            .zip(degenerate)
            .map(|((name, values), degenerate)| CorrelationRow {
                label: name.to_string(),
                values,
                degenerate,
            })
            .collect(),
        length_quantiles: vec![
            quantiles("clean", "words", clean_words),
            quantiles("clean", "sentences", clean_sentences),
            quantiles("toxic", "words", toxic_words),
            quantiles("toxic", "sentences", toxic_sentences),
        ],
    })
}
