use std::fs;
use std::io::{self, BufWriter};
use std::net::{SocketAddr, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use toxscore::pipeline::{self, DatasetInput, TrainSpec, EVAL_CSV_HEADER};
use toxscore::{repl, require_file, resolve_model_path, server, AppConfig, Bands, LogLevel, UsageError};
use toxscore_core::cleaning::dump_rules;
use toxscore_core::corpus::{corpus_stats, load_validation_pairs};
use toxscore_core::evaluation::{run_grid, write_grid_csv, write_grid_table, CellStatus, GridDataset, GridSpec};
use toxscore_core::models::ModelKind;
use toxscore_core::persistence::{load_bundle, save_bundle};
use toxscore_core::vectorizer::Preset;
use toxscore_core::{CleanMode, Source, TrainParams};

#[derive(Parser)]
#[command(name = "toxscore", version, about = "Toxic comment scoring: EDA, cleaning, TF-IDF models, evaluation and serving")]
struct Cli {
    #[arg(long, global = true, value_enum, default_value = "info")]
    log_level: LogLevel,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Label counts, tag histogram, correlations and length quantiles as JSON.
    Eda {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Clean a line-per-document text file or selected CSV columns.
    Clean {
        #[arg(long, default_value = "clean0")]
        mode: CleanMode,
        #[arg(long = "in", required_unless_present = "dump_rules")]
        input: Option<PathBuf>,
        #[arg(long, required_unless_present = "dump_rules")]
        out: Option<PathBuf>,
        /// Treat the input as CSV and clean these columns.
        #[arg(long = "column")]
        columns: Vec<String>,
        /// Print the versioned rule table and exit.
        #[arg(long)]
        dump_rules: bool,
    },
    /// Fit a TF-IDF preset on a line-per-document file and print sparse rows.
    Featurize {
        #[arg(long, default_value = "tfidf0")]
        preset: Preset,
        #[arg(long, default_value = "clean0")]
        clean: CleanMode,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Clean, vectorize, train and write a model bundle.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "clean0")]
        clean: CleanMode,
        #[arg(long, default_value = "tfidf0")]
        preset: Preset,
        #[arg(long, default_value = "ridge")]
        model: ModelKind,
        /// Train a pairwise ranker on these judged pairs instead of regressing targets.
        #[arg(long)]
        ranker_pairs: Option<PathBuf>,
        /// Evaluation pairs checked for overlap with --ranker-pairs.
        #[arg(long)]
        holdout_pairs: Option<PathBuf>,
        #[command(flatten)]
        params: ParamArgs,
        /// Unix timestamp recorded in the bundle instead of the current time.
        #[arg(long)]
        fixed_timestamp: Option<i64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ranking accuracy of a bundle on validation pairs.
    Eval {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        pairs: PathBuf,
        /// Append the result as a CSV line (header written if the file is new).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Every dataset × cleaner × preset × model combination.
    Grid {
        #[arg(long)]
        class: Option<PathBuf>,
        #[arg(long)]
        bias: Option<PathBuf>,
        #[arg(long)]
        bias_comments: Option<PathBuf>,
        #[arg(long)]
        multi: Option<PathBuf>,
        #[arg(long)]
        ruddit: Option<PathBuf>,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "clean0,clean1")]
        clean: Vec<CleanMode>,
        #[arg(long, value_delimiter = ',', default_value = "tfidf0,tfidf1,tfidf2,tfidf3")]
        preset: Vec<Preset>,
        #[arg(long, value_delimiter = ',', default_value = "lightgbm,mlp,ridge,svm")]
        model: Vec<ModelKind>,
        #[arg(long)]
        limit: Option<usize>,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Interactive scoring: one comment per stdin line.
    Score {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 0.3)]
        low: f64,
        #[arg(long, default_value_t = 0.6)]
        high: f64,
        /// Add the full-precision score as a third column.
        #[arg(long)]
        exact: bool,
    },
    /// HTTP scoring service.
    Serve {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

#[derive(Args)]
struct DataArgs {
    #[arg(long, default_value = "class", value_parser = parse_source)]
    dataset: Source,
    #[arg(long)]
    input: PathBuf,
    /// Bias comments file, joined to the annotations by id.
    #[arg(long)]
    comments: Option<PathBuf>,
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    ridge_lambda: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
}

impl ParamArgs {
    fn params(&self) -> TrainParams {
        let d = TrainParams::default();
        TrainParams {
            seed: self.seed,
            ridge_lambda: self.ridge_lambda.unwrap_or(d.ridge_lambda),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            epochs: self.epochs.unwrap_or(d.epochs),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            mlp_hidden: self.hidden.unwrap_or(d.mlp_hidden),
            ..d
        }
    }
}

fn parse_source(s: &str) -> Result<Source, String> {
    Source::ALL
        .into_iter()
        .find(|src| src.name() == s.to_ascii_lowercase())
        .ok_or_else(|| format!("unknown dataset `{s}` (expected class, bias, multi, ruddit)"))
}

impl DataArgs {
    fn load(&self) -> Result<toxscore_core::LabeledCorpus> {
        require_file(&self.input)?;
        if let Some(c) = &self.comments {
            require_file(c)?;
        }
        pipeline::load_dataset(
            &DatasetInput {
                source: self.dataset,
                path: &self.input,
                comments: self.comments.as_deref(),
            },
            self.limit,
        )
    }
}

fn now() -> i64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs() as i64)
}

fn load_model(flag: Option<PathBuf>) -> Result<toxscore_core::ModelBundle> {
    let path = resolve_model_path(flag)?;
    require_file(&path)?;
    load_bundle(&path).with_context(|| format!("loading {}", path.display()))
}

fn load_pairs(path: &Path) -> Result<toxscore_core::PairCorpus> {
    require_file(path)?;
    Ok(load_validation_pairs(path)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Eda { data, out } => {
            let corpus = data.load()?;
            let stats = corpus_stats(&corpus)?;
            fs::write(&out, stats.to_json()).with_context(|| format!("writing {}", out.display()))?;
            println!("{} rows, stats written to {}", stats.n_samples, out.display());
        }
        Command::Clean {
            mode,
            input,
            out,
            columns,
            dump_rules: dump,
        } => {
            if dump {
                print!("{}", dump_rules(mode));
                return Ok(());
            }
            let (input, out) = (input.unwrap(), out.unwrap());
            require_file(&input)?;
            if columns.is_empty() {
                let text = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
                fs::write(&out, pipeline::clean_lines(&text, mode))?;
            } else {
                let rows = pipeline::clean_csv(&input, &out, &columns, mode)?;
                log::info!("cleaned {rows} rows");
            }
        }
        Command::Featurize {
            preset,
            clean,
            input,
            out,
        } => {
            require_file(&input)?;
            let text = fs::read_to_string(&input)?;
            let (terms, rows) = pipeline::featurize_lines(&text, clean, preset)?;
            eprintln!("{preset}: {terms} terms");
            match out {
                Some(p) => fs::write(p, rows)?,
                None => print!("{rows}"),
            }
        }
        Command::Train {
            data,
            clean,
            preset,
            model,
            ranker_pairs,
            holdout_pairs,
            params,
            fixed_timestamp,
            out,
        } => {
            let corpus = data.load()?;
            let spec = TrainSpec {
                clean_mode: clean,
                preset,
                model,
                params: params.params(),
                created_at: fixed_timestamp.unwrap_or_else(now),
            };
            let (bundle, report) = match ranker_pairs {
                Some(p) => {
                    let pairs = load_pairs(&p)?;
                    let holdout = holdout_pairs.as_deref().map(load_pairs).transpose()?;
                    pipeline::train_ranker_bundle(&corpus, &pairs, holdout.as_ref(), &spec)?
                }
                None => pipeline::train_bundle(&corpus, &spec)?,
            };
            save_bundle(&bundle, &out).with_context(|| format!("writing {}", out.display()))?;
            println!(
                "trained {} on {} rows: {} terms, {} epochs, final loss {:.6}, {:.2}s -> {}",
                bundle.metadata.model_kind,
                corpus.len(),
                bundle.vocabulary.len(),
                report.epoch_losses.len(),
                report.final_loss,
                report.wall_seconds,
                out.display()
            );
        }
        Command::Eval { model, pairs, csv } => {
            let bundle = load_model(model)?;
            let pairs = load_pairs(&pairs)?;
            let r = pipeline::evaluate_bundle(&bundle, &pairs)?;
            println!(
                "accuracy {:.4} ({} correct, {} ties, {} pairs)",
                r.accuracy, r.n_correct, r.n_ties, r.n_pairs
            );
            let line = pipeline::eval_csv_line(&bundle.model_version(), &r);
            println!("{EVAL_CSV_HEADER}\n{line}");
            if let Some(path) = csv {
                use std::io::Write;
                let fresh = !path.exists();
                let mut f = fs::OpenOptions::new().create(true).append(true).open(&path)?;
                if fresh {
                    writeln!(f, "{EVAL_CSV_HEADER}")?;
                }
                writeln!(f, "{line}")?;
            }
        }
        Command::Grid {
            class,
            bias,
            bias_comments,
            multi,
            ruddit,
            pairs,
            clean,
            preset,
            model,
            limit,
            params,
            out,
            table,
        } => {
            let pairs = load_pairs(&pairs)?;
            let mut datasets = Vec::new();
            for (source, path) in [
                (Source::Class, class),
                (Source::Bias, bias),
                (Source::Multi, multi),
                (Source::Ruddit, ruddit),
            ] {
                let Some(path) = path else { continue };
                require_file(&path)?;
                let comments = if source == Source::Bias { bias_comments.as_deref() } else { None };
                let corpus = pipeline::load_dataset(
                    &DatasetInput {
                        source,
                        path: &path,
                        comments,
                    },
                    limit,
                )?;
                datasets.push(GridDataset { source, corpus });
            }
            if datasets.is_empty() {
                return Err(UsageError("grid needs at least one of --class, --bias, --multi, --ruddit".into()).into());
            }
            let spec = GridSpec {
                datasets,
                clean_modes: clean,
                presets: preset,
                models: model,
            };
            let cells = run_grid(&spec, &pairs, &params.params());
            fs::write(&out, write_grid_csv(&cells))?;
            let rendered = write_grid_table(&cells);
            print!("{rendered}");
            if let Some(t) = table {
                fs::write(t, &rendered)?;
            }
            for c in &cells {
                if let CellStatus::Failed(m) = &c.status {
                    log::error!("{} {} {} {}: {m}", c.dataset, c.clean_mode, c.preset, c.model.name());
                }
            }
            if !cells.iter().any(|c| c.status == CellStatus::Ok) {
                bail!("no grid cell succeeded");
            }
        }
        Command::Score { model, low, high, exact } => {
            let bands = Bands::new(low, high)?;
            let bundle = load_model(model)?;
            let stdin = io::stdin();
            let stdout = io::stdout();
            repl::run_repl(&bundle, stdin.lock(), BufWriter::new(stdout.lock()), &bands, exact)?;
        }
        Command::Serve { model, host, port } => {
            let model_path = resolve_model_path(model)?;
            let config = AppConfig {
                model_path,
                host,
                port,
                limit_rows: None,
                seed: TrainParams::default().seed,
                log_level: cli.log_level,
            };
            config.validate()?;
            let bundle = Arc::new(load_model(Some(config.model_path.clone()))?);
            let addr: SocketAddr = (config.host.as_str(), config.port)
                .to_socket_addrs()
                .with_context(|| format!("resolving {}", config.host))?
                .next()
                .context("host resolved to no address")?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = server::bind(addr).await.with_context(|| format!("binding {addr}"))?;
                log::info!("serving {} on http://{}", bundle.model_version(), listener.local_addr()?);
                server::serve_until(bundle, listener, async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await?;
                Ok::<_, anyhow::Error>(())
            })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().filter_level(cli.log_level.filter()).parse_default_env().init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<UsageError>()) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
