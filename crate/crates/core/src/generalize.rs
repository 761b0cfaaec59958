//! Out-of-distribution runs: how much of a corpus a model assigns to one
//! target class.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Provenance;
use crate::error::{Error, Result};
use crate::forest::ForestModel;
use crate::metrics::ReportFormat;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationResult {
    pub corpus_name: String,
    pub total_sentences: u64,
    pub classified_as_target: u64,
    pub rate: f64,
    pub prediction_histogram: BTreeMap<u32, u64>,
}

/// Predicted-class counts; only classes predicted at least once appear.
pub fn prediction_histogram<S: AsRef<str> + Sync>(
    model: &ForestModel,
    sentences: &[S],
) -> BTreeMap<u32, u64> {
    sentences
        .par_iter()
        .map(|s| model.predict_text(s.as_ref()).class)
        .fold(BTreeMap::new, |mut h, c| {
            *h.entry(c).or_insert(0) += 1;
            h
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (c, n) in b {
                *a.entry(c).or_insert(0) += n;
            }
            a
        })
}

pub fn generalization_rate<S: AsRef<str> + Sync>(
    model: &ForestModel,
    corpus_name: &str,
    sentences: &[S],
    target: u32,
) -> Result<GeneralizationResult> {
    if sentences.is_empty() {
        return Err(Error::Domain(format!(
            "corpus {corpus_name:?} has no sentences"
        )));
    }
    if model.registry().name(target).is_none() {
        return Err(Error::LabelOutOfRange {
            label: target,
            classes: model.registry().len(),
        });
    }
    let prediction_histogram = prediction_histogram(model, sentences);
    let total = sentences.len() as u64;
    let hits = prediction_histogram.get(&target).copied().unwrap_or(0);
    Ok(GeneralizationResult {
        corpus_name: corpus_name.to_string(),
        total_sentences: total,
        classified_as_target: hits,
        rate: hits as f64 / total as f64,
        prediction_histogram,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationReport {
    pub target_language: String,
    pub target_class: u32,
    pub results: Vec<GeneralizationResult>,
    /// Corpora skipped because they held no sentences.
    pub skipped: Vec<String>,
    pub provenance: Option<Provenance>,
}

pub fn render_generalization(report: &GeneralizationReport, format: ReportFormat) -> String {
    if format == ReportFormat::Json {
        let mut s = serde_json::to_string_pretty(report).expect("report serializes");
        s.push('\n');
        return s;
    }
    let mut out = String::new();
    if let Some(p) = &report.provenance {
        let cfg = serde_json::to_string(&p.config).expect("config serializes");
        writeln!(out, "# config\t{cfg}").unwrap();
        writeln!(out, "# model\t{}", p.model_fingerprint).unwrap();
    }
    writeln!(
        out,
        "Language\tClassified as {}\tTotal Sentences",
        report.target_language
    )
    .unwrap();
    for r in &report.results {
        match format {
            ReportFormat::Tsv => {
                writeln!(out, "{}\t{}\t{}", r.corpus_name, r.rate, r.total_sentences)
            }
            _ => writeln!(
                out,
                "{}\t{:.2}%\t{}",
                r.corpus_name,
                r.rate * 100.0,
                r.total_sentences
            ),
        }
        .unwrap();
    }
    out
}
