//! Subcommand implementations.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use athalang_core::config::{Provenance, RunConfig};
use athalang_core::corpus::{
    load_dataset, stratified_split, subsample_per_class, DatasetManifest, LabeledSentence,
    LoadedDataset, SplitDataset,
};
use athalang_core::forest::{FeatureSampling, ForestModel};
use athalang_core::generalize::{generalization_rate, render_generalization, GeneralizationReport};
use athalang_core::metrics::{confusion_matrix, render_report, EvaluationReport, ReportFormat};
use rayon::prelude::*;
use serde::Serialize;

use crate::{DataArgs, DumpVocabArgs, EvaluateArgs, GeneralizeArgs, PredictArgs, TrainArgs};

/// Tolerance for the metric identities checked before a report is written.
const IDENTITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Serialize)]
struct ClassCounts {
    language: String,
    class_index: u32,
    train: usize,
    test: usize,
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    train_sentences: usize,
    test_sentences: usize,
    classes: Vec<ClassCounts>,
    requested_dimension: usize,
    effective_dimension: usize,
    features_per_split: usize,
    trees: usize,
    skipped_lines: usize,
    wall_time_seconds: f64,
    model_path: PathBuf,
    provenance: Provenance,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
        }
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn load_model(path: &Path) -> Result<ForestModel> {
    let file =
        fs::File::open(path).with_context(|| format!("cannot open model {}", path.display()))?;
    ForestModel::load(io::BufReader::new(file))
        .with_context(|| format!("cannot read model {}", path.display()))
}

/// Loads the manifest, warns about skipped lines, applies the optional
/// per-language cap and splits.
fn prepare_data(data: &DataArgs, seed: u64) -> Result<(LoadedDataset, SplitDataset)> {
    let manifest = DatasetManifest::from_path(&data.manifest)?;
    let mut loaded = load_dataset(&manifest)?;
    for (path, err) in &loaded.parse_errors {
        eprintln!("warning: {}:{}: {}", path.display(), err.line, err.message);
    }
    if let Some(cap) = data.max_per_class {
        if cap < 2 {
            bail!("--max-per-class must be at least 2");
        }
        loaded.sentences = subsample_per_class(&loaded.sentences, cap, seed);
    }
    let split = stratified_split(&loaded.sentences, data.test_fraction, seed)?;
    Ok((loaded, split))
}

fn class_counts(loaded: &LoadedDataset, split: &SplitDataset) -> Vec<ClassCounts> {
    let count = |part: &[LabeledSentence], c: u32| part.iter().filter(|s| s.label == c).count();
    loaded
        .registry
        .iter()
        .map(|(c, name)| ClassCounts {
            language: name.to_string(),
            class_index: c,
            train: count(&split.train, c),
            test: count(&split.test, c),
        })
        .collect()
}

pub fn train(args: TrainArgs, threads: Option<usize>) -> Result<()> {
    let config = RunConfig {
        seed: args.seed,
        test_fraction: args.data.test_fraction,
        features_dimension: args.features_dimension,
        feature_kind: args.features_kind,
        ngram_min: args.ngram_min,
        ngram_max: args.ngram_max,
        fold_apostrophes: args.fold_apostrophes,
        n_trees: args.trees,
        max_depth: args.max_depth,
        min_samples_split: args.min_samples_split,
        features_per_split: args.features_per_split,
        bootstrap: !args.no_bootstrap,
        threads,
        manifest: Some(args.data.manifest.clone()),
        model: Some(args.model.clone()),
        out: args.out.clone(),
    };
    config.validate()?;

    let started = Instant::now();
    let (loaded, split) = prepare_data(&args.data, config.seed)?;
    let model = ForestModel::train(
        &split.train,
        loaded.registry.clone(),
        config.feature_config()?,
        config.features_dimension,
        &config.forest_params(),
    )?;

    let bytes = model.to_bytes();
    fs::write(&args.model, &bytes)
        .with_context(|| format!("cannot write model {}", args.model.display()))?;
    let wall_time_seconds = started.elapsed().as_secs_f64();

    let summary = TrainSummary {
        train_sentences: split.train.len(),
        test_sentences: split.test.len(),
        classes: class_counts(&loaded, &split),
        requested_dimension: config.features_dimension,
        effective_dimension: model.vocabulary().dimension(),
        features_per_split: match model.params().features_per_split {
            FeatureSampling::Count(k) => k,
            other => other.resolve(model.vocabulary().dimension())?,
        },
        trees: model.forest().trees().len(),
        skipped_lines: loaded.parse_errors.len(),
        wall_time_seconds,
        model_path: args.model.clone(),
        provenance: Provenance {
            config,
            model_fingerprint: model.fingerprint(),
        },
    };
    emit(args.out.as_deref(), &render_summary(&summary, args.format)?)
}

fn render_summary(s: &TrainSummary, format: ReportFormat) -> Result<String> {
    if format == ReportFormat::Json {
        return Ok(serde_json::to_string_pretty(s)? + "\n");
    }
    let mut out = String::new();
    writeln!(
        out,
        "# config\t{}",
        serde_json::to_string(&s.provenance.config)?
    )?;
    writeln!(out, "# model\t{}", s.provenance.model_fingerprint)?;
    writeln!(out, "language\tclass\ttrain\ttest")?;
    for c in &s.classes {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            c.language, c.class_index, c.train, c.test
        )?;
    }
    writeln!(out, "train_sentences\t{}", s.train_sentences)?;
    writeln!(out, "test_sentences\t{}", s.test_sentences)?;
    writeln!(out, "requested_dimension\t{}", s.requested_dimension)?;
    writeln!(out, "effective_dimension\t{}", s.effective_dimension)?;
    writeln!(out, "features_per_split\t{}", s.features_per_split)?;
    writeln!(out, "trees\t{}", s.trees)?;
    writeln!(out, "skipped_lines\t{}", s.skipped_lines)?;
    writeln!(out, "wall_time_seconds\t{:.3}", s.wall_time_seconds)?;
    writeln!(out, "model\t{}", s.model_path.display())?;
    Ok(out)
}

/// The configuration a model was built with, as far as the model file
/// records it, overlaid on the invocation's data settings.
fn model_config(model: &ForestModel, seed: u64, threads: Option<usize>) -> RunConfig {
    let features = model.vocabulary().config();
    let params = model.params();
    RunConfig {
        seed,
        features_dimension: model.vocabulary().dimension(),
        feature_kind: features.kind,
        ngram_min: features.range.min,
        ngram_max: features.range.max,
        fold_apostrophes: features.fold_apostrophes,
        n_trees: params.n_trees,
        max_depth: params.max_depth,
        min_samples_split: params.min_samples_split,
        features_per_split: params.features_per_split,
        bootstrap: params.bootstrap,
        threads,
        ..RunConfig::default()
    }
}

pub fn evaluate(args: EvaluateArgs, threads: Option<usize>) -> Result<()> {
    let model = load_model(&args.model)?;
    let seed = args.seed.unwrap_or(model.params().seed);
    let (loaded, split) = prepare_data(&args.data, seed)?;
    if loaded.registry != *model.registry() {
        bail!(
            "manifest languages [{}] do not match the model's [{}]",
            loaded.registry.names().join(", "),
            model.registry().names().join(", ")
        );
    }

    let truth: Vec<u32> = split.test.iter().map(|s| s.label).collect();
    let predicted: Vec<u32> = split
        .test
        .par_iter()
        .map(|s| model.predict_text(&s.text).class)
        .collect();
    let confusion = confusion_matrix(&truth, &predicted, model.registry().len())?;

    let config = RunConfig {
        test_fraction: args.data.test_fraction,
        manifest: Some(args.data.manifest.clone()),
        model: Some(args.model.clone()),
        out: args.out.clone(),
        ..model_config(&model, seed, threads)
    };
    let provenance = Provenance {
        config,
        model_fingerprint: model.fingerprint(),
    };
    let report = EvaluationReport::new(model.registry(), confusion, Some(provenance))?;
    if let Err(msg) = report.check_identities(IDENTITY_TOLERANCE) {
        bail!("metric identity violated: {msg}");
    }
    emit(args.out.as_deref(), &render_report(&report, args.format))
}

pub fn predict(args: PredictArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let texts: Vec<String> = if let Some(path) = &args.file {
        let text =
            fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        text.lines().map(str::to_owned).collect()
    } else if !args.text.is_empty() {
        args.text.clone()
    } else {
        let mut text = String::new();
        io::stdin()
            .lock()
            .read_to_string(&mut text)
            .context("cannot read stdin")?;
        text.lines().map(str::to_owned).collect()
    };

    let n_trees = model.forest().trees().len();
    let lines: Vec<String> = texts
        .par_iter()
        .map(|t| {
            let p = model.predict_text(t);
            let name = model
                .registry()
                .name(p.class)
                .expect("class within registry");
            format!("{name}\t{}/{n_trees}\n", p.winner_votes())
        })
        .collect();
    emit(args.out.as_deref(), &lines.concat())
}

pub fn generalize(args: GeneralizeArgs, threads: Option<usize>) -> Result<()> {
    let model = load_model(&args.model)?;
    let Some(target) = model.registry().index_of(&args.target) else {
        bail!(
            "target language {:?} is not in the model; known languages: {}",
            args.target,
            model.registry().names().join(", ")
        );
    };

    let mut files: Vec<PathBuf> = fs::read_dir(&args.corpora)
        .with_context(|| format!("cannot list {}", args.corpora.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<io::Result<_>>()?;
    files.retain(|p| p.is_file());
    files.sort();

    let mut results = Vec::new();
    let mut skipped = Vec::new();
    for path in &files {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let parsed = args.corpus_format.parse_file(path)?;
        for err in &parsed.errors {
            eprintln!("warning: {}:{}: {}", path.display(), err.line, err.message);
        }
        let sentences: Vec<&str> = parsed.sentences.iter().map(|s| s.text.as_str()).collect();
        if sentences.is_empty() {
            eprintln!("warning: {}: no sentences, corpus skipped", path.display());
            skipped.push(name);
            continue;
        }
        results.push(generalization_rate(&model, &name, &sentences, target)?);
    }
    if results.is_empty() {
        bail!("no non-empty corpora in {}", args.corpora.display());
    }

    let config = RunConfig {
        model: Some(args.model.clone()),
        out: args.out.clone(),
        ..model_config(&model, model.params().seed, threads)
    };
    let report = GeneralizationReport {
        target_language: args.target.clone(),
        target_class: target,
        results,
        skipped,
        provenance: Some(Provenance {
            config,
            model_fingerprint: model.fingerprint(),
        }),
    };
    emit(
        args.out.as_deref(),
        &render_generalization(&report, args.format),
    )
}

pub fn dump_vocab(args: DumpVocabArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    emit(args.out.as_deref(), &model.vocabulary().dump_tsv())
}
