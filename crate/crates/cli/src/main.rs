mod formats;

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use comment_update::baselines::Baseline;
use comment_update::corpus::{
    filter, ingest_with, mine_repository, partition, read_records_file, stats, write_records,
    write_sidecar, Example, RawRecord, Split,
};
use comment_update::editlex::{apply_edits, deserialize_as, serialize, Flavor};
use comment_update::features::{featurize_code, featurize_comment, FeatureMatrix};
use comment_update::metrics::{evaluate, EvalItem, Metric, Report};
use comment_update::model::{load_checkpoint, save_checkpoint, ModelConfig, Trainer};
use comment_update::rerank::{rerank_edit_with, rerank_generation_with, Weights};
use comment_update::{EditModelF32, TrainerF32};

use formats::{create, sink, write_rows, Beam};

/// Overrides the seed of `train` and `partition`.
const SEED_ENV: &str = "COMMENT_UPDATE_SEED";

#[derive(Parser)]
#[command(
    name = "comment-update",
    version,
    about = "Learn and apply comment updates as edit sequences"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Kv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Side {
    Code,
    Comment,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Edit,
    Generation,
}

#[derive(clap::Args)]
struct Selection {
    /// Corpus file (JSON lines).
    #[arg(long)]
    input: PathBuf,
    /// Partition file; use with --split.
    #[arg(long)]
    partition: Option<PathBuf>,
    #[arg(long, value_parser = parse_split)]
    split: Option<Split>,
}

impl Selection {
    fn examples(&self) -> Result<Vec<Example>> {
        formats::examples(&self.input, self.partition.as_deref(), self.split)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize records from a corpus file or mine them from a git repository.
    Ingest {
        #[arg(long, conflicts_with = "repo", required_unless_present = "repo")]
        input: Option<PathBuf>,
        #[arg(long, requires = "project")]
        repo: Option<PathBuf>,
        #[arg(long)]
        project: Option<String>,
        #[arg(long)]
        output: PathBuf,
        /// Also write derived edit sequences per record.
        #[arg(long)]
        sidecar: Option<PathBuf>,
        #[arg(long, default_value_t = default_threads())]
        threads: usize,
    },
    /// Apply the corpus filters.
    Filter {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Rejected ids with their reason.
        #[arg(long)]
        rejected: Option<PathBuf>,
    },
    /// Split by project into train/valid/test.
    Partition {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.8, 0.1, 0.1])]
        ratios: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Corpus statistics.
    Stats {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Serialized comment edit sequence per record.
    EncodeEdits {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Apply serialized edit sequences to the old comments.
    ApplyEdits {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        edits: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Per-token feature tables.
    Featurize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        side: Side,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = default_threads())]
        threads: usize,
    },
    /// Rule-based predictions.
    Baseline {
        #[arg(long, value_parser = parse_baseline)]
        name: Baseline,
        #[command(flatten)]
        selection: Selection,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train a model on the train split, early stopping on the valid split.
    Train {
        /// key=value model configuration.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        partition: PathBuf,
        /// Checkpoint to write.
        #[arg(long)]
        output: PathBuf,
        /// Per-epoch log (JSON lines).
        #[arg(long)]
        log: Option<PathBuf>,
        /// Checkpoint whose embeddings initialize the new model.
        #[arg(long)]
        init_embeddings: Option<PathBuf>,
    },
    /// Beam-search predictions.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        selection: Selection,
        #[arg(long)]
        beam_width: Option<usize>,
        /// Best candidate per example.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Full beams (JSON lines), input to `rerank`.
        #[arg(long)]
        candidates: Option<PathBuf>,
    },
    /// Rescore beams and keep the best candidate.
    Rerank {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Generation model for the likelihood term (edit mode).
        #[arg(long)]
        generator: Option<PathBuf>,
        /// beam,generation,similarity coefficients.
        #[arg(long, value_delimiter = ',', num_args = 3)]
        weights: Option<Vec<f64>>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Rescored beams (JSON lines).
        #[arg(long)]
        reranked: Option<PathBuf>,
    },
    /// Score predictions against the new comments.
    Evaluate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, value_delimiter = ',', value_parser = parse_metric, default_value = "xmatch,meteor,bleu4,sari,gleu")]
        metrics: Vec<Metric>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        #[arg(long, default_value_t = default_threads())]
        threads: usize,
    },
    /// Compare systems: one table row per system, plus columnar output.
    Report {
        #[arg(long)]
        input: PathBuf,
        /// name=predictions-file, repeatable.
        #[arg(long = "system", value_parser = parse_system, required = true)]
        systems: Vec<(String, PathBuf)>,
        #[arg(long, value_delimiter = ',', value_parser = parse_metric, default_value = "xmatch,meteor,bleu4,sari,gleu")]
        metrics: Vec<Metric>,
        /// Tab-separated columns: system then one column per metric.
        #[arg(long)]
        columns: Option<PathBuf>,
        #[arg(long, default_value_t = default_threads())]
        threads: usize,
    },
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn parse_split(s: &str) -> Result<Split, String> {
    Split::parse(s).ok_or_else(|| format!("unknown split `{s}`"))
}

fn parse_baseline(s: &str) -> Result<Baseline, String> {
    Baseline::parse(s).ok_or_else(|| format!("unknown baseline `{s}`"))
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    Metric::parse(s).ok_or_else(|| format!("unknown metric `{s}`"))
}

fn parse_system(s: &str) -> Result<(String, PathBuf), String> {
    let (name, path) = s.split_once('=').ok_or("expected name=path")?;
    Ok((name.to_string(), PathBuf::from(path)))
}

fn seed_override() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => {
            Ok(Some(v.trim().parse().with_context(|| {
                format!("{SEED_ENV}: not an integer: `{v}`")
            })?))
        }
        Err(_) => Ok(None),
    }
}

fn by_id(examples: &[Example]) -> HashMap<&str, &Example> {
    examples.iter().map(|e| (e.id(), e)).collect()
}

fn lookup<'a>(index: &HashMap<&str, &'a Example>, id: &str) -> Result<&'a Example> {
    index
        .get(id)
        .copied()
        .with_context(|| format!("id `{id}` not in corpus"))
}

fn score(
    examples: &[Example],
    predictions: &Path,
    metrics: &[Metric],
    threads: usize,
) -> Result<Report> {
    let index = by_id(examples);
    let rows = formats::read_rows(predictions)?;
    let refs: Vec<(Vec<String>, Vec<String>, &Vec<String>)> = rows
        .iter()
        .map(|(id, pred)| {
            let ex = lookup(&index, id)?;
            Ok((ex.c_old.texts(), ex.c_new.texts(), pred))
        })
        .collect::<Result<_>>()?;
    let items: Vec<EvalItem> = refs
        .iter()
        .map(|(s, r, p)| EvalItem {
            source: s,
            pred: p.as_slice(),
            reference: r,
        })
        .collect();
    Ok(evaluate(&items, metrics, threads))
}

fn featurize_all(examples: &[Example], side: Side, threads: usize) -> Vec<FeatureMatrix> {
    let one = |ex: &Example| match side {
        Side::Code => featurize_code(&ex.m_edit, &ex.c_old, &ex.m_old, &ex.m_new),
        Side::Comment => featurize_comment(&ex.c_old, &ex.m_edit, &ex.m_old, &ex.m_new),
    };
    if threads <= 1 || examples.len() < 2 {
        return examples.iter().map(one).collect();
    }
    let chunk = examples.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let handles: Vec<_> = examples
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(one).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("feature worker panicked"))
            .collect()
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest {
            input,
            repo,
            project,
            output,
            sidecar,
            threads,
        } => {
            let records: Vec<RawRecord> = match (input, repo) {
                (Some(path), _) => read_records_file(&path)?,
                (None, Some(repo)) => {
                    mine_repository(&repo, project.as_deref().unwrap_or_default())?
                }
                (None, None) => bail!("one of --input or --repo is required"),
            };
            let total = records.len();
            let examples = ingest_with(records, threads);
            write_records(create(&output)?, examples.iter().map(|e| &e.raw))?;
            if let Some(path) = sidecar {
                write_sidecar(create(&path)?, &examples)?;
            }
            println!("records={total}\nexamples={}", examples.len());
        }
        Command::Filter {
            input,
            output,
            rejected,
        } => {
            let outcome = filter(formats::examples(&input, None, None)?);
            write_records(create(&output)?, outcome.kept.iter().map(|e| &e.raw))?;
            if let Some(path) = rejected {
                let mut w = create(&path)?;
                for (ex, reason) in &outcome.rejected {
                    writeln!(w, "{}\t{}", ex.id(), reason.code())?;
                }
                w.flush()?;
            }
            println!("kept={}", outcome.kept.len());
            for (code, n) in outcome.reason_counts() {
                println!("rejected_{code}={n}");
            }
        }
        Command::Partition {
            input,
            output,
            ratios,
            seed,
        } => {
            let examples = formats::examples(&input, None, None)?;
            let seed = seed_override()?.unwrap_or(seed);
            let p = partition(&examples, [ratios[0], ratios[1], ratios[2]], seed)?;
            let mut w = create(&output)?;
            p.write(&mut w)?;
            w.flush()?;
            for s in Split::ALL {
                println!("{}={}", s.name(), p.ids(s).len());
            }
        }
        Command::Stats { input, format } => {
            let s = stats(&formats::examples(&input, None, None)?);
            match format {
                Format::Table => print!("{}", s.to_table()),
                Format::Kv => print!("{}", s.to_key_values()),
            }
        }
        Command::EncodeEdits { input, output } => {
            let examples = formats::examples(&input, None, None)?;
            let rows = examples
                .iter()
                .map(|e| (e.id(), e.c_edit.as_ref().map(serialize).unwrap_or_default()));
            write_rows(sink(output.as_deref())?, rows)?;
        }
        Command::ApplyEdits {
            input,
            edits,
            output,
        } => {
            let examples = formats::examples(&input, None, None)?;
            let index = by_id(&examples);
            let mut rows = Vec::new();
            for (id, toks) in formats::read_rows(&edits)? {
                let ex = lookup(&index, &id)?;
                let (seq, report) = deserialize_as(&toks, Flavor::CommentCondensed);
                if !report.is_well_formed() {
                    bail!("{id}: malformed edit sequence");
                }
                let new = apply_edits(&ex.c_old, &seq).with_context(|| id.clone())?;
                rows.push((ex.id(), new.texts()));
            }
            write_rows(sink(output.as_deref())?, rows)?;
        }
        Command::Featurize {
            input,
            side,
            output,
            threads,
        } => {
            let examples = formats::examples(&input, None, None)?;
            let mut w = sink(output.as_deref())?;
            for (ex, m) in examples.iter().zip(featurize_all(&examples, side, threads)) {
                writeln!(w, "# {}", ex.id())?;
                w.write_all(m.to_tsv().as_bytes())?;
            }
            w.flush()?;
        }
        Command::Baseline {
            name,
            selection,
            output,
        } => {
            let examples = selection.examples()?;
            write_rows(
                sink(output.as_deref())?,
                examples.iter().map(|e| (e.id(), name.predict(e).texts())),
            )?;
        }
        Command::Train {
            config,
            input,
            partition,
            output,
            log,
            init_embeddings,
        } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let mut config = ModelConfig::parse(&text)?;
            if let Some(seed) = seed_override()? {
                config.seed = seed;
            }
            let train = formats::examples(&input, Some(&partition), Some(Split::Train))?;
            let valid = formats::examples(&input, Some(&partition), Some(Split::Valid))?;
            let mut model = EditModelF32::from_examples(&train, config)?;
            if let Some(path) = init_embeddings {
                let donor = load_checkpoint::<f32>(&path)?;
                let n = model.init_embeddings_from(&donor)?;
                log::info!("initialized {n} embedding rows from {}", path.display());
            }
            let train_inst: Vec<_> = train.iter().map(|e| model.instance(e)).collect();
            let valid_inst: Vec<_> = valid.iter().map(|e| model.instance(e)).collect();
            let mut trainer: TrainerF32 = Trainer::new(model);
            let summary = trainer.fit(&train_inst, &valid_inst)?.clone();
            if let Some(path) = log {
                summary.write_jsonl(&path)?;
            }
            save_checkpoint(&trainer.into_model(), &output)?;
            let best = summary.best_epoch.and_then(|b| summary.epochs.get(b - 1));
            println!("epochs={}", summary.epochs.len());
            println!("best_epoch={}", summary.best_epoch.unwrap_or(0));
            println!(
                "best_valid_loss={:.6}",
                best.map_or(f64::NAN, |e| e.valid_loss)
            );
            println!("stopped_early={}", summary.stopped_early);
        }
        Command::Predict {
            model,
            selection,
            beam_width,
            output,
            candidates,
        } => {
            let model = load_checkpoint::<f32>(&model)?;
            let width = beam_width.unwrap_or(model.config.beam_width);
            if width == 0 {
                bail!("--beam-width must be positive");
            }
            let examples = selection.examples()?;
            let beams: Vec<Beam> = examples
                .iter()
                .map(|e| Beam::of(e.id(), &model.predict(e, width)))
                .collect();
            let best = beams.iter().map(|b| {
                (
                    b.id.as_str(),
                    b.candidates
                        .first()
                        .map(|c| c.comment.clone())
                        .unwrap_or_default(),
                )
            });
            write_rows(sink(output.as_deref())?, best)?;
            if let Some(path) = candidates {
                formats::write_beams(create(&path)?, &beams)?;
            }
        }
        Command::Rerank {
            mode,
            candidates,
            input,
            generator,
            weights,
            output,
            reranked,
        } => {
            let examples = formats::examples(&input, None, None)?;
            let index = by_id(&examples);
            let weights = match (weights, mode) {
                (Some(w), _) => Weights {
                    beam: w[0],
                    generation: w[1],
                    similarity: w[2],
                },
                (None, Mode::Edit) => Weights::EDIT,
                (None, Mode::Generation) => Weights::GENERATION,
            };
            let generator = match (mode, generator) {
                (Mode::Edit, Some(path)) => Some(load_checkpoint::<f32>(&path)?),
                (Mode::Edit, None) => bail!("edit-mode reranking needs --generator"),
                (Mode::Generation, _) => None,
            };
            let mut out = Vec::new();
            for beam in formats::read_beams(&candidates)? {
                let ex = lookup(&index, &beam.id)?;
                let cands = beam.candidates();
                let ranked = match &generator {
                    Some(g) => rerank_edit_with(cands, &ex.c_old, weights, |c| {
                        g.generation_likelihood(&ex.m_new, c)
                    }),
                    None => rerank_generation_with(cands, &ex.c_old, weights),
                };
                out.push(Beam::of(&beam.id, &ranked));
            }
            let best = out.iter().map(|b| {
                (
                    b.id.as_str(),
                    b.candidates
                        .first()
                        .map(|c| c.comment.clone())
                        .unwrap_or_default(),
                )
            });
            write_rows(sink(output.as_deref())?, best)?;
            if let Some(path) = reranked {
                formats::write_beams(create(&path)?, &out)?;
            }
        }
        Command::Evaluate {
            input,
            predictions,
            metrics,
            format,
            threads,
        } => {
            let examples = formats::examples(&input, None, None)?;
            let report = score(&examples, &predictions, &metrics, threads)?;
            match format {
                Format::Table => print!("{}", report.to_table()),
                Format::Kv => print!("{}", report.to_key_values()),
            }
        }
        Command::Report {
            input,
            systems,
            metrics,
            columns,
            threads,
        } => {
            let examples = formats::examples(&input, None, None)?;
            let reports: Vec<(String, Report)> = systems
                .iter()
                .map(|(name, path)| Ok((name.clone(), score(&examples, path, &metrics, threads)?)))
                .collect::<Result<_>>()?;
            let width = reports
                .iter()
                .map(|(n, _)| n.len())
                .max()
                .unwrap_or(0)
                .max("system".len());
            print!("{:<width$}  {:>5}", "system", "n");
            for m in &metrics {
                print!("  {:>8}", m.name());
            }
            println!();
            for (name, r) in &reports {
                print!("{name:<width$}  {:>5}", r.count);
                for (_, v) in &r.scores {
                    print!("  {v:>8.3}");
                }
                println!();
            }
            if let Some(path) = columns {
                let mut w = create(&path)?;
                let header: Vec<&str> = metrics.iter().map(|m| m.name()).collect();
                writeln!(w, "system\tn\t{}", header.join("\t"))?;
                for (name, r) in &reports {
                    let vals: Vec<String> =
                        r.scores.iter().map(|(_, v)| format!("{v:.6}")).collect();
                    writeln!(w, "{name}\t{}\t{}", r.count, vals.join("\t"))?;
                }
                w.flush()?;
            }
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            let detail: Vec<&str> = msg
                .lines()
                .map(str::trim)
                .take_while(|l| !l.starts_with("Usage:") && !l.starts_with("For more information"))
                .filter(|l| !l.is_empty())
                .collect();
            eprintln!(
                "error: usage: {}",
                detail.join(" ").trim_start_matches("error: ")
            );
            std::process::exit(2);
        }
    };
    if let Err(e) = run(cli) {
        let broken_pipe = e
            .chain()
            .filter_map(|c| c.downcast_ref::<std::io::Error>())
            .any(|io| io.kind() == std::io::ErrorKind::BrokenPipe);
        if broken_pipe {
            return;
        }
        let msg = format!("{e:#}").replace(['\n', '\r'], " ");
        eprintln!("error: {msg}");
        std::process::exit(1);
    }
}
