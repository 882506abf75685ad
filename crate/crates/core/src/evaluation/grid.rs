//! Dataset × cleaner × featurizer × model experiment grid.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ranking_accuracy, EvalError};
use crate::cleaning::{clean_corpus, CleanMode};
use crate::corpus::{LabeledCorpus, PairCorpus, Source};
use crate::models::{train_model, ModelKind, TrainParams};
use crate::vectorizer::{fit, Preset};

pub const GRID_CSV_HEADER: &str = "dataset,clean,preset,model,accuracy,ties,train_seconds";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CellStatus {
    Ok,
    NotImplemented,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub dataset: Source,
    pub clean_mode: CleanMode,
    pub preset: Preset,
    pub model: ModelKind,
    pub accuracy: Option<f64>,
    pub ties: Option<usize>,
    pub train_seconds: Option<f64>,
    pub status: CellStatus,
}

impl GridCell {
    fn key(&self) -> (Preset, ModelKind, Source, CleanMode) {
        (self.preset, self.model, self.dataset, self.clean_mode)
    }

    fn empty(dataset: Source, clean_mode: CleanMode, preset: Preset, model: ModelKind, status: CellStatus) -> Self {
        Self {
            dataset,
            clean_mode,
            preset,
            model,
            accuracy: None,
            ties: None,
            train_seconds: None,
            status,
        }
    }
}

pub struct GridDataset {
    pub source: Source,
    pub corpus: LabeledCorpus,
}

pub struct GridSpec {
    pub datasets: Vec<GridDataset>,
    pub clean_modes: Vec<CleanMode>,
    pub presets: Vec<Preset>,
    pub models: Vec<ModelKind>,
}

/// Runs every combination of the spec: clean, fit the vectorizer, train,
/// rank the validation pairs. One vocabulary is fitted per
/// (dataset, cleaner, preset) and shared by its model cells, which train
/// in parallel. Failures stay inside their cell. Cells are returned in the
/// canonical order preset, model, dataset, cleaner.
pub fn run_grid(spec: &GridSpec, pairs: &PairCorpus, params: &TrainParams) -> Vec<GridCell> {
    let mut cells = Vec::new();
    for dataset in &spec.datasets {
        for &mode in &spec.clean_modes {
            let cleaned = clean_corpus(&dataset.corpus, mode);
            let texts: Vec<&str> = cleaned.texts().collect();
            let targets = cleaned.targets();
            for &preset in &spec.presets {
                let fail_all = |message: String| {
                    spec.models.iter().map(move |&model| {
                        let status = if model.is_implemented() {
                            CellStatus::Failed(message.clone())
                        } else {
                            CellStatus::NotImplemented
                        };
                        GridCell::empty(dataset.source, mode, preset, model, status)
                    })
                };
                let vocab = match fit(&texts, &preset.config()) {
                    Ok(v) => v,
                    Err(e) => {
                        cells.extend(fail_all(e.to_string()));
                        continue;
                    }
                };
                let x = vocab.transform_all(&texts);
                log::info!(
                    "{} {} {}: {} documents, {} terms",
                    dataset.source,
                    mode,
                    preset,
                    x.len(),
                    vocab.len()
                );
                let group: Vec<GridCell> = spec
                    .models
                    .par_iter()
                    .map(|&model| {
                        if !model.is_implemented() {
                            return GridCell::empty(dataset.source, mode, preset, model, CellStatus::NotImplemented);
                        }
                        let started = Instant::now();
                        let trained = train_model(model, &x, &targets, vocab.len(), params);
                        let train_seconds = started.elapsed().as_secs_f64();
                        let result = trained.map_err(|e| e.to_string()).and_then(|(m, _)| {
                            ranking_accuracy(
                                |text| {
                                    m.predict(&vocab.transform(&mode.clean(text)))
                                        .expect("vocabulary and model share a dimension")
                                },
                                pairs,
                            )
                            .map_err(|e| e.to_string())
                        });
                        match result {
                            Ok(r) => GridCell {
                                accuracy: Some(r.accuracy),
                                ties: Some(r.n_ties),
                                train_seconds: Some(train_seconds),
                                ..GridCell::empty(dataset.source, mode, preset, model, CellStatus::Ok)
                            },
                            Err(message) => {
                                GridCell::empty(dataset.source, mode, preset, model, CellStatus::Failed(message))
                            }
                        }
                    })
                    .collect();
                cells.extend(group);
            }
        }
    }
    cells.sort_by_key(GridCell::key);
    cells
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSummary {
    pub per_model: Vec<(ModelKind, f64)>,
    pub per_dataset: Vec<(Source, f64)>,
    pub per_preset: Vec<(Preset, f64)>,
    pub per_clean: Vec<(CleanMode, f64)>,
    /// Scored cells, best first.
    pub ranked: Vec<GridCell>,
}

fn means<K: Ord + Copy>(cells: &[&GridCell], key: impl Fn(&GridCell) -> K) -> Vec<(K, f64)> {
    let mut acc: BTreeMap<K, (f64, usize)> = BTreeMap::new();
    for c in cells {
        let e = acc.entry(key(c)).or_default();
        e.0 += c.accuracy.unwrap_or(0.0);
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

/// Per-model, per-dataset, per-preset and per-cleaner mean accuracy over
/// the cells that have one, and the cells ranked best first.
pub fn compare_cells(cells: &[GridCell]) -> GridSummary {
    let scored: Vec<&GridCell> = cells.iter().filter(|c| c.accuracy.is_some()).collect();
    let mut ranked: Vec<GridCell> = scored.iter().map(|c| (*c).clone()).collect();
    ranked.sort_by(|a, b| {
        b.accuracy
            .unwrap()
            .total_cmp(&a.accuracy.unwrap())
            .then_with(|| a.key().cmp(&b.key()))
    });
    GridSummary {
        per_model: means(&scored, |c| c.model),
        per_dataset: means(&scored, |c| c.dataset),
        per_preset: means(&scored, |c| c.preset),
        per_clean: means(&scored, |c| c.clean_mode),
        ranked,
    }
}

impl GridSummary {
    /// Models ordered by mean accuracy, best first.
    pub fn models_by_mean(&self) -> Vec<(ModelKind, f64)> {
        let mut v = self.per_model.clone();
        v.sort_by(|a, b| b.1.total_cmp(&a.1));
        v
    }
}

/// One line per cell under [`GRID_CSV_HEADER`]. Cells without an accuracy
/// write `NA` and leave the remaining fields empty.
pub fn write_grid_csv(cells: &[GridCell]) -> String {
    let mut out = String::from(GRID_CSV_HEADER);
    out.push('\n');
    for c in cells {
        match (c.accuracy, c.ties, c.train_seconds) {
            (Some(a), ties, secs) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    c.dataset,
                    c.clean_mode,
                    c.preset,
                    c.model,
                    a,
                    ties.map(|t| t.to_string()).unwrap_or_default(),
                    secs.map(|s| format!("{s:.3}")).unwrap_or_default()
                );
            }
            (None, _, _) => {
                let _ = writeln!(out, "{},{},{},{},NA,,", c.dataset, c.clean_mode, c.preset, c.model);
            }
        }
    }
    out
}

/// Parses the output of [`write_grid_csv`].
pub fn read_grid_csv(text: &str) -> Result<Vec<GridCell>, EvalError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == GRID_CSV_HEADER => {}
        _ => {
            return Err(EvalError::GridCsv {
                line: 1,
                message: format!("expected header `{GRID_CSV_HEADER}`"),
            })
        }
    }
    let mut cells = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| EvalError::GridCsv { line: i + 1, message };
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 7 {
            return Err(err(format!("expected 7 fields, got {}", f.len())));
        }
        let dataset = Source::ALL
            .into_iter()
            .find(|s| s.name() == f[0])
            .ok_or_else(|| err(format!("unknown dataset `{}`", f[0])))?;
        let clean_mode: CleanMode = f[1].parse().map_err(err)?;
        let preset: Preset = f[2].parse().map_err(err)?;
        let model: ModelKind = f[3].parse().map_err(err)?;
        let mut cell = GridCell::empty(dataset, clean_mode, preset, model, CellStatus::Ok);
        if f[4] == "NA" {
            cell.status = if model.is_implemented() {
                CellStatus::Failed("no accuracy recorded".into())
            } else {
                CellStatus::NotImplemented
            };
        } else {
            let a: f64 = f[4].parse().map_err(|_| err(format!("bad accuracy `{}`", f[4])))?;
            cell.accuracy = Some(a);
            cell.ties = if f[5].is_empty() {
                None
            } else {
                Some(f[5].parse().map_err(|_| err(format!("bad ties `{}`", f[5])))?)
            };
            cell.train_seconds = if f[6].is_empty() {
                None
            } else {
                Some(f[6].parse().map_err(|_| err(format!("bad seconds `{}`", f[6])))?)
            };
        }
        cells.push(cell);
    }
    Ok(cells)
}

/// Aligned text table: one row per (preset, model), one column per
/// (dataset, cleaner).
pub fn write_grid_table(cells: &[GridCell]) -> String {
    let mut columns: Vec<(Source, CleanMode)> = cells.iter().map(|c| (c.dataset, c.clean_mode)).collect();
    columns.sort();
    columns.dedup();
    let mut rows: Vec<(Preset, ModelKind)> = cells.iter().map(|c| (c.preset, c.model)).collect();
    rows.sort();
    rows.dedup();
    let lookup: BTreeMap<_, &GridCell> = cells.iter().map(|c| (c.key(), c)).collect();

    let mut out = format!("{:<8} {:<9}", "preset", "model");
    for (d, m) in &columns {
        let _ = write!(out, " {:>13}", format!("{d}/{m}"));
    }
    out.push('\n');
    for &(preset, model) in &rows {
        let _ = write!(out, "{:<8} {:<9}", preset.name(), model.name());
        for &(d, m) in &columns {
            let text = match lookup.get(&(preset, model, d, m)) {
                Some(GridCell { accuracy: Some(a), .. }) => format!("{a:.4}"),
                Some(GridCell {
                    status: CellStatus::NotImplemented,
                    ..
                }) => "n/i".to_string(),
                Some(_) => "error".to_string(),
                None => "-".to_string(),
            };
            let _ = write!(out, " {text:>13}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(model: ModelKind, acc: f64) -> GridCell {
        GridCell {
            accuracy: Some(acc),
            ties: Some(0),
            train_seconds: Some(0.5),
            ..GridCell::empty(Source::Class, CleanMode::Clean0, Preset::Tfidf0, model, CellStatus::Ok)
        }
    }

    #[test]
    fn single_cell_summary() {
        let s = compare_cells(&[cell(ModelKind::Ridge, 0.61)]);
        assert_eq!(s.per_model, vec![(ModelKind::Ridge, 0.61)]);
        assert_eq!(s.per_dataset, vec![(Source::Class, 0.61)]);
        assert_eq!(s.per_preset, vec![(Preset::Tfidf0, 0.61)]);
        assert_eq!(s.ranked.len(), 1);
    }

    #[test]
    fn csv_round_trip_keeps_column_order() {
        let mut cells = vec![cell(ModelKind::Ridge, 0.625), cell(ModelKind::Mlp, 0.5)];
        cells.push(GridCell::empty(
            Source::Bias,
            CleanMode::Clean1,
            Preset::Tfidf3,
            ModelKind::LightGbm,
            CellStatus::NotImplemented,
        ));
        let csv = write_grid_csv(&cells);
        assert!(csv.starts_with("dataset,clean,preset,model,accuracy,ties,train_seconds\n"));
        assert!(csv.contains("bias,clean1,tfidf3,lightgbm,NA,,"));
        let back = read_grid_csv(&csv).unwrap();
        assert_eq!(back, cells);
    }

    #[test]
    fn table_marks_unimplemented_cells() {
        let cells = vec![
            cell(ModelKind::Ridge, 0.6722),
            GridCell::empty(Source::Class, CleanMode::Clean0, Preset::Tfidf0, ModelKind::LightGbm, CellStatus::NotImplemented),
        ];
        let table = write_grid_table(&cells);
        assert!(table.contains("0.6722"));
        assert!(table.contains("n/i"));
        assert_eq!(table.lines().count(), 3);
    }
}
