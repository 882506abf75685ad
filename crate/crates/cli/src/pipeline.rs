//! End-to-end steps shared by the subcommands and their tests.

use std::path::Path;

use anyhow::{bail, Context, Result};
use toxscore_core::cleaning::clean_corpus;
use toxscore_core::corpus::{
    load_bias_dataset, load_bias_dataset_joined, load_class_dataset, load_multi_dataset, load_ruddit_dataset,
    LabelWeights,
};
use toxscore_core::models::{train_model, train_pairwise_ranker, ModelKind};
use toxscore_core::persistence::BundleMetadata;
use toxscore_core::vectorizer::{fit, Preset};
use toxscore_core::{
    ranking_accuracy, CleanMode, LabeledCorpus, ModelBundle, Model, PairCorpus, RankingResult, Source, TrainParams,
    TrainReport,
};

/// Where a dataset lives. Bias data may come as one file or as an
/// annotation file joined to a comment file.
#[derive(Debug, Clone)]
pub struct DatasetInput<'a> {
    pub source: Source,
    pub path: &'a Path,
    pub comments: Option<&'a Path>,
}

pub fn load_dataset(input: &DatasetInput<'_>, limit: Option<usize>) -> Result<LabeledCorpus> {
    let weights = LabelWeights::default();
    let mut corpus = match input.source {
        Source::Class => load_class_dataset(input.path, &weights)?,
        Source::Multi => load_multi_dataset(input.path, &weights)?,
        Source::Ruddit => load_ruddit_dataset(input.path)?,
        Source::Bias => {
            let loaded = match input.comments {
                Some(c) => load_bias_dataset_joined(input.path, c)?,
                None => load_bias_dataset(input.path)?,
            };
            if loaded.skipped_without_text > 0 {
                log::warn!("{} bias annotations had no comment text", loaded.skipped_without_text);
            }
            loaded.corpus
        }
    };
    if let Some(n) = limit {
        corpus.truncate(n);
    }
    if corpus.is_empty() {
        bail!("{} has no rows", input.path.display());
    }
    Ok(corpus)
}

#[derive(Debug, Clone)]
pub struct TrainSpec {
    pub clean_mode: CleanMode,
    pub preset: Preset,
    pub model: ModelKind,
    pub params: TrainParams,
    pub created_at: i64,
}

/// Clean → fit → train → bundle.
pub fn train_bundle(corpus: &LabeledCorpus, spec: &TrainSpec) -> Result<(ModelBundle, TrainReport)> {
    let cleaned = clean_corpus(corpus, spec.clean_mode);
    let texts: Vec<&str> = cleaned.texts().collect();
    let vocab = fit(&texts, &spec.preset.config()).context("fitting the vectorizer")?;
    let x = vocab.transform_all(&texts);
    let (model, report) = train_model(spec.model, &x, &cleaned.targets(), vocab.len(), &spec.params)?;
    let bundle = ModelBundle::new(
        spec.clean_mode,
        vocab,
        model,
        metadata(&corpus.source_tag, spec.model.name(), spec),
    )?;
    Ok((bundle, report))
}

/// Vocabulary from `corpus`, linear scorer from judged pairs.
pub fn train_ranker_bundle(
    corpus: &LabeledCorpus,
    pairs: &PairCorpus,
    holdout: Option<&PairCorpus>,
    spec: &TrainSpec,
) -> Result<(ModelBundle, TrainReport)> {
    let cleaned = clean_corpus(corpus, spec.clean_mode);
    let texts: Vec<&str> = cleaned.texts().collect();
    let vocab = fit(&texts, &spec.preset.config()).context("fitting the vectorizer")?;
    let (model, report) = train_pairwise_ranker(pairs, &vocab, spec.clean_mode, &spec.params, holdout)?;
    let bundle = ModelBundle::new(
        spec.clean_mode,
        vocab,
        Model::Linear(model),
        metadata(&corpus.source_tag, "ranker", spec),
    )?;
    Ok((bundle, report))
}

fn metadata(dataset: &str, kind: &str, spec: &TrainSpec) -> BundleMetadata {
    BundleMetadata {
        dataset: dataset.to_string(),
        model_kind: kind.to_string(),
        seed: spec.params.seed,
        created_at: spec.created_at,
        grid_accuracy: None,
    }
}

pub fn evaluate_bundle(bundle: &ModelBundle, pairs: &PairCorpus) -> Result<RankingResult> {
    Ok(ranking_accuracy(|t| bundle.score(t).score, pairs)?)
}

pub const EVAL_CSV_HEADER: &str = "model,accuracy,n_pairs,n_correct,n_ties";

pub fn eval_csv_line(model: &str, r: &RankingResult) -> String {
    format!("{model},{},{},{},{}", r.accuracy, r.n_pairs, r.n_correct, r.n_ties)
}

/// Lines of `text`, each cleaned.
pub fn clean_lines(text: &str, mode: CleanMode) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        out.push_str(&mode.clean(line));
        out.push('\n');
    }
    out
}

/// Copies a CSV, cleaning the named columns and leaving the rest untouched.
pub fn clean_csv(input: &Path, output: &Path, columns: &[String], mode: CleanMode) -> Result<usize> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(false)
        .from_path(input)
        .with_context(|| format!("reading {}", input.display()))?;
    let headers = reader.headers()?.clone();
    let mut targets = Vec::new();
    for c in columns {
        match headers.iter().position(|h| h.trim_start_matches('\u{feff}') == c) {
            Some(i) => targets.push(i),
            None => bail!("{} has no column `{c}`", input.display()),
        }
    }
    let mut writer = csv::Writer::from_path(output).with_context(|| format!("writing {}", output.display()))?;
    writer.write_record(&headers)?;
    let mut rows = 0;
    for record in reader.records() {
        let record = record?;
        let row: Vec<String> = record
            .iter()
            .enumerate()
            .map(|(i, v)| if targets.contains(&i) { mode.clean(v) } else { v.to_string() })
            .collect();
        writer.write_record(&row)?;
        rows += 1;
    }
    writer.flush()?;
    Ok(rows)
}

/// Fits `preset` on the lines of `text` and renders each document as
/// `index:value` pairs, one document per line.
pub fn featurize_lines(text: &str, mode: CleanMode, preset: Preset) -> Result<(usize, String)> {
    let docs: Vec<String> = text.lines().map(|l| mode.clean(l)).collect();
    let vocab = fit(&docs, &preset.config())?;
    let mut out = String::new();
    for x in vocab.transform_all(&docs) {
        let row: Vec<String> = x.iter().map(|(i, v)| format!("{i}:{v}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    Ok((vocab.len(), out))
}
