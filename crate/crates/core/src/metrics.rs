//! Confusion matrix, per-class precision/recall/F1 and report rendering.
//!
//! Values are kept at full precision; rounding happens only in the
//! `Text` rendering.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::Provenance;
use crate::corpus::ClassRegistry;
use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn from_rows(counts: Vec<Vec<u64>>) -> Result<Self> {
        let classes = counts.len();
        if counts.iter().any(|r| r.len() != classes) {
            return Err(Error::InvalidParam(
                "confusion matrix must be square".into(),
            ));
        }
        Ok(Self { classes, counts })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn record(&mut self, truth: u32, predicted: u32) -> Result<()> {
        for label in [truth, predicted] {
            if label as usize >= self.classes {
                return Err(Error::LabelOutOfRange {
                    label,
                    classes: self.classes,
                });
            }
        }
        self.counts[truth as usize][predicted as usize] += 1;
        Ok(())
    }

    /// Adds another matrix of the same size (sharded accumulation).
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::InvalidParam(
                "cannot merge matrices of different sizes".into(),
            ));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn column_sum(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|c| self.counts[c][c]).sum()
    }
}

pub fn confusion_matrix(y_true: &[u32], y_pred: &[u32], classes: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch(y_true.len(), y_pred.len()));
    }
    let mut cm = ConfusionMatrix::zeros(classes);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        cm.record(t, p)?;
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerClassMetrics {
    pub class_index: u32,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// No predictions of this class; precision reported as 0.
    pub precision_undefined: bool,
    /// No true instances of this class; recall reported as 0.
    pub recall_undefined: bool,
}

pub fn per_class_metrics(cm: &ConfusionMatrix) -> Vec<PerClassMetrics> {
    (0..cm.classes())
        .map(|c| {
            let tp = cm.get(c, c) as f64;
            let predicted = cm.column_sum(c);
            let support = cm.row_sum(c);
            let precision = if predicted == 0 {
                0.0
            } else {
                tp / predicted as f64
            };
            let recall = if support == 0 {
                0.0
            } else {
                tp / support as f64
            };
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            PerClassMetrics {
                class_index: c as u32,
                precision,
                recall,
                f1,
                support,
                precision_undefined: predicted == 0,
                recall_undefined: support == 0,
            }
        })
        .collect()
}

/// Micro accuracy: trace / total.
pub fn overall_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Domain(
            "accuracy of an empty confusion matrix".into(),
        ));
    }
    Ok(cm.trace() as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub languages: Vec<String>,
    pub accuracy: f64,
    pub total: u64,
    pub classes: Vec<PerClassMetrics>,
    pub confusion: ConfusionMatrix,
    pub provenance: Option<Provenance>,
}

impl EvaluationReport {
    pub fn new(
        registry: &ClassRegistry,
        confusion: ConfusionMatrix,
        provenance: Option<Provenance>,
    ) -> Result<Self> {
        if registry.len() != confusion.classes() {
            return Err(Error::InvalidParam(format!(
                "registry has {} classes, confusion matrix {}",
                registry.len(),
                confusion.classes()
            )));
        }
        Ok(Self {
            languages: registry.names().to_vec(),
            accuracy: overall_accuracy(&confusion)?,
            total: confusion.total(),
            classes: per_class_metrics(&confusion),
            confusion,
            provenance,
        })
    }

    /// Support-weighted mean recall must equal accuracy, `F1·(P+R) = 2PR`
    /// must hold per class, and supports must sum to the sample count.
    pub fn check_identities(&self, tolerance: f64) -> std::result::Result<(), String> {
        let supports: u64 = self.classes.iter().map(|m| m.support).sum();
        if supports != self.total {
            return Err(format!(
                "supports sum to {supports}, expected {}",
                self.total
            ));
        }
        let weighted_recall = self
            .classes
            .iter()
            .map(|m| m.support as f64 * m.recall)
            .sum::<f64>()
            / self.total as f64;
        if (weighted_recall - self.accuracy).abs() > tolerance {
            return Err(format!(
                "support-weighted recall {weighted_recall} differs from accuracy {}",
                self.accuracy
            ));
        }
        for m in &self.classes {
            let lhs = m.f1 * (m.precision + m.recall);
            let rhs = 2.0 * m.precision * m.recall;
            if (lhs - rhs).abs() > tolerance {
                return Err(format!(
                    "class {}: F1·(P+R) = {lhs} but 2PR = {rhs}",
                    m.class_index
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Text,
    Tsv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "text" | "text-table" => Ok(ReportFormat::Text),
            "tsv" => Ok(ReportFormat::Tsv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!(
                "unknown format {other:?} (expected text, tsv or json)"
            )),
        }
    }
}

pub const TABLE_HEADER: &str = "Language\tClass\tPrecision\tRecall\tF1-score\tSupport";

fn provenance_lines(out: &mut String, p: &Option<Provenance>) {
    if let Some(p) = p {
        let cfg = serde_json::to_string(&p.config).expect("config serializes");
        writeln!(out, "# config\t{cfg}").unwrap();
        writeln!(out, "# model\t{}", p.model_fingerprint).unwrap();
    }
}

fn confusion_grid(out: &mut String, report: &EvaluationReport) {
    out.push_str("confusion");
    for name in &report.languages {
        write!(out, "\t{name}").unwrap();
    }
    out.push('\n');
    for (name, row) in report.languages.iter().zip(report.confusion.rows()) {
        out.push_str(name);
        for v in row {
            write!(out, "\t{v}").unwrap();
        }
        out.push('\n');
    }
}

pub fn render_report(report: &EvaluationReport, format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Json => {
            out = serde_json::to_string_pretty(report).expect("report serializes");
            out.push('\n');
        }
        ReportFormat::Text => {
            provenance_lines(&mut out, &report.provenance);
            writeln!(out, "{TABLE_HEADER}").unwrap();
            for m in &report.classes {
                writeln!(
                    out,
                    "{}\t{}\t{:.2}\t{:.2}\t{:.2}\t{}",
                    report.languages[m.class_index as usize],
                    m.class_index,
                    m.precision,
                    m.recall,
                    m.f1,
                    m.support
                )
                .unwrap();
            }
            writeln!(
                out,
                "Accuracy\t\t\t\t{:.2}\t{}",
                report.accuracy, report.total
            )
            .unwrap();
            out.push('\n');
            confusion_grid(&mut out, report);
        }
        ReportFormat::Tsv => {
            provenance_lines(&mut out, &report.provenance);
            writeln!(out, "language\tclass\tprecision\trecall\tf1\tsupport").unwrap();
            for m in &report.classes {
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}",
                    report.languages[m.class_index as usize],
                    m.class_index,
                    m.precision,
                    m.recall,
                    m.f1,
                    m.support
                )
                .unwrap();
            }
            writeln!(out, "accuracy\t{}\t{}", report.accuracy, report.total).unwrap();
            out.push('\n');
            confusion_grid(&mut out, report);
        }
    }
    out
}

/// Contents of a TSV report read back in.
#[derive(Debug, Clone, PartialEq)]
pub struct TsvReport {
    pub languages: Vec<String>,
    /// `(precision, recall, f1, support)` per class, registry order.
    pub rows: Vec<(f64, f64, f64, u64)>,
    pub accuracy: f64,
    pub total: u64,
    pub confusion: ConfusionMatrix,
}

pub fn parse_tsv_report(text: &str) -> std::result::Result<TsvReport, String> {
    let mut lines = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header = lines.next().ok_or("empty report")?;
    if !header.starts_with("language\t") {
        return Err(format!("unexpected header {header:?}"));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
    let int = |s: &str| s.parse::<u64>().map_err(|e| format!("{s:?}: {e}"));

    let mut languages = Vec::new();
    let mut rows = Vec::new();
    let (accuracy, total) = loop {
        let line = lines.next().ok_or("missing accuracy line")?;
        let cols: Vec<&str> = line.split('\t').collect();
        if cols[0] == "accuracy" && cols.len() == 3 {
            break (num(cols[1])?, int(cols[2])?);
        }
        if cols.len() != 6 {
            return Err(format!("bad metrics row {line:?}"));
        }
        languages.push(cols[0].to_string());
        rows.push((num(cols[2])?, num(cols[3])?, num(cols[4])?, int(cols[5])?));
    };

    let grid_header = lines.next().ok_or("missing confusion grid")?;
    if !grid_header.starts_with("confusion") {
        return Err(format!("unexpected grid header {grid_header:?}"));
    }
    let mut counts = Vec::new();
    for line in lines {
        let row = line
            .split('\t')
            .skip(1)
            .map(int)
            .collect::<std::result::Result<Vec<_>, _>>()?;
        counts.push(row);
    }
    let confusion = ConfusionMatrix::from_rows(counts).map_err(|e| e.to_string())?;
    Ok(TsvReport {
        languages,
        rows,
        accuracy,
        total,
        confusion,
    })
}
