//! `athalang`: train, evaluate and apply character n-gram random-forest
//! language identifiers.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use athalang_core::corpus::FileFormat;
use athalang_core::features::FeatureKind;
use athalang_core::forest::FeatureSampling;
use athalang_core::metrics::ReportFormat;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "athalang", version, about)]
struct Cli {
    /// Worker threads for training and batch prediction (default: all cores).
    /// Results do not depend on this value.
    #[arg(long, global = true, env = "ATHALANG_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split a labeled dataset, build the vocabulary and train a forest.
    Train(TrainArgs),
    /// Re-split the dataset and score a trained model on the held-out part.
    Evaluate(EvaluateArgs),
    /// Classify text given as arguments, in a file, or on stdin (one per line).
    Predict(PredictArgs),
    /// Measure how often each corpus in a directory is labeled as a target language.
    Generalize(GeneralizeArgs),
    /// Write a model's vocabulary as `index<TAB>ngram<TAB>count`.
    DumpVocab(DumpVocabArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Dataset manifest: `language<TAB>class<TAB>path<TAB>format` per line.
    #[arg(long)]
    manifest: PathBuf,

    /// Fraction of each language held out for testing.
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,

    /// Keep at most this many sentences per language (seeded sample).
    #[arg(long)]
    max_per_class: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,

    /// Where to write the model.
    #[arg(long)]
    model: PathBuf,

    /// Master seed for the split, bootstrap samples and feature sampling.
    #[arg(long, default_value_t = 42)]
    seed: u64,

    /// Vocabulary size: the most frequent n-grams in the training split.
    #[arg(long = "features", default_value_t = 5000)]
    features_dimension: usize,

    #[arg(long, default_value = "char")]
    features_kind: FeatureKind,

    #[arg(long, default_value_t = 1)]
    ngram_min: usize,

    #[arg(long, default_value_t = 3)]
    ngram_max: usize,

    /// Map ' ‘ ’ to ʼ (U+02BC) before extracting n-grams.
    #[arg(long)]
    fold_apostrophes: bool,

    #[arg(long, default_value_t = 100)]
    trees: usize,

    /// Maximum tree depth (unlimited when omitted).
    #[arg(long)]
    max_depth: Option<usize>,

    /// Smallest node (in bootstrap-weighted samples) that may be split.
    #[arg(long = "min-split", default_value_t = 2)]
    min_samples_split: usize,

    /// Features examined per split: `sqrt`, `all` or a count.
    #[arg(long, default_value = "sqrt")]
    features_per_split: FeatureSampling,

    /// Grow every tree on the full training split.
    #[arg(long)]
    no_bootstrap: bool,

    /// Write the training summary here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, default_value = "text")]
    format: ReportFormat,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,

    #[arg(long)]
    model: PathBuf,

    /// Split seed (default: the seed the model was trained with).
    #[arg(long)]
    seed: Option<u64>,

    #[arg(long, default_value = "text")]
    format: ReportFormat,

    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,

    /// Read one text per line from this file.
    #[arg(long, conflicts_with = "text")]
    file: Option<PathBuf>,

    /// Texts to classify (stdin is read when neither this nor --file is given).
    text: Vec<String>,

    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GeneralizeArgs {
    #[arg(long)]
    model: PathBuf,

    /// Directory of corpora; each file is one corpus named after its stem.
    #[arg(long)]
    corpora: PathBuf,

    #[arg(long, default_value = "Navajo")]
    target: String,

    #[arg(long, default_value = "plain")]
    corpus_format: FileFormat,

    #[arg(long, default_value = "text")]
    format: ReportFormat,

    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DumpVocabArgs {
    #[arg(long)]
    model: PathBuf,

    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let cause = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {cause}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    match cli.threads {
        Some(0) => anyhow::bail!("--threads must be at least 1"),
        Some(n) => builder = builder.num_threads(n),
        None => {}
    }
    let pool = builder.build()?;
    let threads = cli.threads;
    pool.install(|| match cli.command {
        Command::Train(a) => commands::train(a, threads),
        Command::Evaluate(a) => commands::evaluate(a, threads),
        Command::Predict(a) => commands::predict(a),
        Command::Generalize(a) => commands::generalize(a, threads),
        Command::DumpVocab(a) => commands::dump_vocab(a),
    })
}
