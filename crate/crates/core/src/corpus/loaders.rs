use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use csv::{ByteRecord, Reader, ReaderBuilder};

use super::{
    ComparisonPair, CorpusError, LabelWeights, LabeledComment, LabeledCorpus, MultiLabel,
    PairCorpus, RawComment, Result, Source, LABEL_NAMES,
};

/// A CSV file with its header resolved to column positions.
struct Table {
    path: PathBuf,
    reader: Reader<BufReader<File>>,
    columns: HashMap<String, usize>,
}

/// Header names are matched case-insensitively with `-` and `_` treated
/// alike, so `less-toxic` and `less_toxic` both resolve.
fn normalize_header(name: &str) -> String {
    name.trim().trim_start_matches('\u{feff}').to_ascii_lowercase().replace('-', "_")
}

impl Table {
    fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut reader = ReaderBuilder::new()
            .has_headers(true)
            .from_reader(BufReader::new(file));
        let header = reader.byte_headers().map_err(|source| CorpusError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let columns = header
            .iter()
            .enumerate()
            .map(|(i, name)| (normalize_header(&String::from_utf8_lossy(name)), i))
            .collect();
        Ok(Self {
            path: path.to_path_buf(),
            reader,
            columns,
        })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .get(name)
            .copied()
            .ok_or_else(|| CorpusError::MissingColumn {
                path: self.path.clone(),
                column: name.to_string(),
            })
    }

    /// First of `names` present in the header.
    fn column_any(&self, names: &[&str]) -> Result<usize> {
        names
            .iter()
            .find_map(|n| self.columns.get(*n).copied())
            .ok_or_else(|| CorpusError::MissingColumn {
                path: self.path.clone(),
                column: names.join("|"),
            })
    }

    /// Calls `f(line, record)` for every data row.
    fn for_each_row(
        &mut self,
        mut f: impl FnMut(&Path, u64, &ByteRecord) -> Result<()>,
    ) -> Result<usize> {
        let mut record = ByteRecord::new();
        let mut rows = 0;
        loop {
            let more = self
                .reader
                .read_byte_record(&mut record)
                .map_err(|source| CorpusError::Csv {
                    path: self.path.clone(),
                    source,
                })?;
            if !more {
                break;
            }
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            f(&self.path, line, &record)?;
            rows += 1;
        }
        if rows == 0 {
            return Err(CorpusError::Empty {
                path: self.path.clone(),
            });
        }
        Ok(rows)
    }
}

fn text_field(record: &ByteRecord, column: usize) -> String {
    record
        .get(column)
        .map(|bytes| String::from_utf8_lossy(bytes).into_owned())
        .unwrap_or_default()
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> CorpusError {
    CorpusError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn load_six_label(path: &Path, weights: &LabelWeights, source: Source) -> Result<LabeledCorpus> {
    let mut table = Table::open(path)?;
    let id_col = table.column("id")?;
    let text_col = table.column("comment_text")?;
    let mut label_cols = [0usize; 6];
    for (slot, name) in label_cols.iter_mut().zip(LABEL_NAMES) {
        *slot = table.column(name)?;
    }

    let mut items = Vec::new();
    table.for_each_row(|path, line, record| {
        let mut flags = [0u8; 6];
        for (k, &col) in label_cols.iter().enumerate() {
            let cell = record.get(col).unwrap_or_default();
            flags[k] = match cell.trim_ascii() {
                b"0" => 0,
                b"1" => 1,
                other => {
                    return Err(parse_error(
                        path,
                        line,
                        format!(
                            "label `{}` must be 0 or 1, got `{}`",
                            LABEL_NAMES[k],
                            String::from_utf8_lossy(other)
                        ),
                    ))
                }
            };
        }
        let id = text_field(record, id_col);
        if id.is_empty() {
            return Err(parse_error(path, line, "empty id"));
        }
        let labels = MultiLabel(flags);
        items.push(LabeledComment {
            comment: RawComment {
                id,
                text: text_field(record, text_col),
                source,
            },
            target: weights.target(&labels),
            labels: Some(labels),
        });
        Ok(())
    })?;
    Ok(LabeledCorpus::new(source.name(), items))
}

/// Loads the Wikipedia six-label training file
/// (`id,comment_text,toxic,severe_toxic,obscene,threat,insult,identity_hate`).
pub fn load_class_dataset(path: &Path, weights: &LabelWeights) -> Result<LabeledCorpus> {
    load_six_label(path, weights, Source::Class)
}

/// Loads the multilingual-competition training file, which shares the
/// Class schema.
pub fn load_multi_dataset(path: &Path, weights: &LabelWeights) -> Result<LabeledCorpus> {
    load_six_label(path, weights, Source::Multi)
}

/// Result of a Bias load: comments whose annotations could not be joined
/// to any text are dropped and counted.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasLoad {
    pub corpus: LabeledCorpus,
    pub skipped_without_text: usize,
}

struct Annotated {
    id: String,
    text: Option<String>,
    sum: f64,
    count: usize,
}

fn read_annotations(path: &Path) -> Result<Vec<Annotated>> {
    let mut table = Table::open(path)?;
    let id_col = table.column("id")?;
    let score_col = table.column_any(&["toxic", "toxicity", "target"])?;
    let text_col = table.column("comment_text").ok();

    let mut order: Vec<Annotated> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    table.for_each_row(|path, line, record| {
        let id = text_field(record, id_col);
        if id.is_empty() {
            return Err(parse_error(path, line, "empty id"));
        }
        let raw = text_field(record, score_col);
        let score: f64 = raw
            .trim()
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| parse_error(path, line, format!("bad toxicity annotation `{raw}`")))?;
        let slot = *index.entry(id.clone()).or_insert_with(|| {
            order.push(Annotated {
                id,
                text: None,
                sum: 0.0,
                count: 0,
            });
            order.len() - 1
        });
        let entry = &mut order[slot];
        entry.sum += score;
        entry.count += 1;
        if entry.text.is_none() {
            if let Some(col) = text_col {
                let text = text_field(record, col);
                if !text.is_empty() {
                    entry.text = Some(text);
                }
            }
        }
        Ok(())
    })?;
    Ok(order)
}

fn finish_bias(annotated: Vec<Annotated>, texts: Option<&HashMap<String, String>>) -> BiasLoad {
    let mut items = Vec::with_capacity(annotated.len());
    let mut skipped = 0;
    for a in annotated {
        let text = a
            .text
            .or_else(|| texts.and_then(|t| t.get(&a.id).cloned()));
        let Some(text) = text else {
            skipped += 1;
            continue;
        };
        items.push(LabeledComment {
            comment: RawComment {
                id: a.id,
                text,
                source: Source::Bias,
            },
            target: (a.sum / a.count as f64).clamp(0.0, 1.0),
            labels: None,
        });
    }
    BiasLoad {
        corpus: LabeledCorpus::new(Source::Bias.name(), items),
        skipped_without_text: skipped,
    }
}

/// Loads per-annotation rows (`id`, `toxic` or `toxicity`, optionally
/// `comment_text`). One item per distinct id, target = mean annotation.
pub fn load_bias_dataset(path: &Path) -> Result<BiasLoad> {
    Ok(finish_bias(read_annotations(path)?, None))
}

/// Like [`load_bias_dataset`], with texts joined by `id` from a second file
/// carrying `id,comment_text` (the layout of the public release).
pub fn load_bias_dataset_joined(annotations: &Path, comments: &Path) -> Result<BiasLoad> {
    let annotated = read_annotations(annotations)?;
    let mut table = Table::open(comments)?;
    let id_col = table.column("id")?;
    let text_col = table.column("comment_text")?;
    let mut texts = HashMap::new();
    table.for_each_row(|_, _, record| {
        texts
            .entry(text_field(record, id_col))
            .or_insert_with(|| text_field(record, text_col));
        Ok(())
    })?;
    Ok(finish_bias(annotated, Some(&texts)))
}

/// Loads Reddit comments with an offensiveness score in `[-1, 1]`, mapped
/// affinely onto `[0, 1]`.
pub fn load_ruddit_dataset(path: &Path) -> Result<LabeledCorpus> {
    let mut table = Table::open(path)?;
    let id_col = table.column("comment_id")?;
    let text_col = table.column_any(&["txt", "body", "comment_text"])?;
    let score_col = table.column("offensiveness_score")?;
    let mut items = Vec::new();
    table.for_each_row(|path, line, record| {
        let raw = text_field(record, score_col);
        let score: f64 = raw
            .trim()
            .parse()
            .map_err(|_| parse_error(path, line, format!("bad offensiveness score `{raw}`")))?;
        if !(-1.0..=1.0).contains(&score) {
            return Err(parse_error(
                path,
                line,
                format!("offensiveness score {score} outside [-1, 1]"),
            ));
        }
        let id = text_field(record, id_col);
        if id.is_empty() {
            return Err(parse_error(path, line, "empty comment id"));
        }
        items.push(LabeledComment {
            comment: RawComment {
                id,
                text: text_field(record, text_col),
                source: Source::Ruddit,
            },
            target: ((score + 1.0) / 2.0).clamp(0.0, 1.0),
            labels: None,
        });
        Ok(())
    })?;
    Ok(LabeledCorpus::new(Source::Ruddit.name(), items))
}

/// Loads `worker,less_toxic,more_toxic` judgments. Duplicate rows are kept.
pub fn load_validation_pairs(path: &Path) -> Result<PairCorpus> {
    let mut table = Table::open(path)?;
    let worker_col = table.column("worker")?;
    let less_col = table.column("less_toxic")?;
    let more_col = table.column("more_toxic")?;
    let mut pairs = Vec::new();
    table.for_each_row(|path, line, record| {
        let less_toxic = text_field(record, less_col);
        let more_toxic = text_field(record, more_col);
        if less_toxic.trim().is_empty() {
            return Err(parse_error(path, line, "empty less_toxic text"));
        }
        if more_toxic.trim().is_empty() {
            return Err(parse_error(path, line, "empty more_toxic text"));
        }
        pairs.push(ComparisonPair {
            worker: text_field(record, worker_col),
            less_toxic,
            more_toxic,
        });
        Ok(())
    })?;
    Ok(PairCorpus::new(pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn csv_file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    const CLASS_HEADER: &str = "id,comment_text,toxic,severe_toxic,obscene,threat,insult,identity_hate\n";

    #[test]
    fn class_targets_and_labels() {
        let f = csv_file(&format!(
            "{CLASS_HEADER}a,\"hello, there\",0,0,0,0,0,0\nb,you idiot,1,0,1,0,1,0\nc,\"multi\nline\",1,1,1,1,1,1\n"
        ));
        let corpus = load_class_dataset(f.path(), &LabelWeights::default()).unwrap();
        assert_eq!(corpus.len(), 3);
        assert_eq!(corpus.targets(), vec![0.0, 0.5, 1.0]);
        assert_eq!(corpus.items[0].comment.text, "hello, there");
        assert_eq!(corpus.items[2].comment.text, "multi\nline");
        assert_eq!(corpus.items[1].labels.unwrap().flags(), [1, 0, 1, 0, 1, 0]);
    }

    #[test]
    fn class_missing_column_is_named() {
        let f = csv_file("id,comment_text,toxic,severe_toxic,obscene,threat,insult\na,x,0,0,0,0,0\n");
        match load_class_dataset(f.path(), &LabelWeights::default()) {
            Err(CorpusError::MissingColumn { column, .. }) => assert_eq!(column, "identity_hate"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn class_non_binary_label_reports_line() {
        let f = csv_file(&format!("{CLASS_HEADER}a,x,0,0,0,0,0,0\nb,y,0,2,0,0,0,0\n"));
        match load_class_dataset(f.path(), &LabelWeights::default()) {
            Err(CorpusError::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("severe_toxic"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_only_file_is_an_error() {
        let f = csv_file(CLASS_HEADER);
        assert!(matches!(
            load_class_dataset(f.path(), &LabelWeights::default()),
            Err(CorpusError::Empty { .. })
        ));
    }

    #[test]
    fn hyphenated_headers_resolve() {
        let f = csv_file(
            "id,comment-text,toxic,severe-toxic,obscene,threat,insult,identity-hate\nq,x,1,1,1,1,1,1\n",
        );
        let corpus = load_multi_dataset(f.path(), &LabelWeights::default()).unwrap();
        assert_eq!(corpus.items[0].target, 1.0);
        assert_eq!(corpus.items[0].comment.source, Source::Multi);
    }

    #[test]
    fn invalid_utf8_is_replaced_not_rejected() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(CLASS_HEADER.as_bytes()).unwrap();
        f.write_all(b"a,bad \xff\xfe bytes,0,0,0,0,0,0\n").unwrap();
        let corpus = load_class_dataset(f.path(), &LabelWeights::default()).unwrap();
        assert!(corpus.items[0].comment.text.contains('\u{fffd}'));
    }

    #[test]
    fn bias_mean_of_annotations() {
        let f = csv_file(
            "id,worker,toxic,comment_text\n1,a,1,first\n1,b,1,\n1,c,0,\n1,d,0,\n2,a,0,second\n3,a,1,third\n3,b,1,\n3,c,1,\n4,a,1,\n",
        );
        let load = load_bias_dataset(f.path()).unwrap();
        assert_eq!(load.skipped_without_text, 1);
        assert_eq!(load.corpus.targets(), vec![0.5, 0.0, 1.0]);
        assert_eq!(load.corpus.items[0].comment.text, "first");
    }

    #[test]
    fn bias_joined_with_text_file() {
        let ann = csv_file("id,worker,toxic\n7,a,1\n7,b,0\n8,a,1\n");
        let texts = csv_file("id,comment_text\n7,seven\n");
        let load = load_bias_dataset_joined(ann.path(), texts.path()).unwrap();
        assert_eq!(load.corpus.len(), 1);
        assert_eq!(load.corpus.items[0].target, 0.5);
        assert_eq!(load.skipped_without_text, 1);
    }

    #[test]
    fn ruddit_affine_map() {
        let f = csv_file(
            "post_id,comment_id,txt,url,offensiveness_score\np,c1,a,u,-1.0\np,c2,b,u,1.0\np,c3,c,u,0.25\n",
        );
        let corpus = load_ruddit_dataset(f.path()).unwrap();
        assert_eq!(corpus.targets(), vec![0.0, 1.0, 0.625]);
    }

    #[test]
    fn ruddit_out_of_range_score() {
        let f = csv_file("post_id,comment_id,txt,url,offensiveness_score\np,c1,a,u,0.1\np,c2,b,u,1.5\n");
        match load_ruddit_dataset(f.path()) {
            Err(CorpusError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validation_pairs_keep_order_and_duplicates() {
        let f = csv_file(
            "worker,less_toxic,more_toxic\nw1,you are nice,you are scum\nw2,a,b\nw2,a,b\n",
        );
        let pairs = load_validation_pairs(f.path()).unwrap();
        assert_eq!(pairs.len(), 3);
        assert_eq!(pairs.pairs[0].less_toxic, "you are nice");
        assert_eq!(pairs.pairs[0].more_toxic, "you are scum");
        assert_eq!(pairs.pairs[1], pairs.pairs[2]);
    }

    #[test]
    fn validation_pairs_reject_empty_text() {
        let f = csv_file("worker,less_toxic,more_toxic\nw1,,x\n");
        assert!(matches!(
            load_validation_pairs(f.path()),
            Err(CorpusError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_validation_pairs(Path::new("/nonexistent/pairs.csv")).unwrap_err();
        match err {
            CorpusError::Io { source, .. } => assert_eq!(source.kind(), std::io::ErrorKind::NotFound),
            other => panic!("unexpected {other:?}"),
        }
    }
}
