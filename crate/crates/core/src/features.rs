//! Text normalization and the n-gram count feature space.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

use crate::corpus::LabeledSentence;
use crate::error::{Error, Result};

/// Canonical composition, default case folding, whitespace collapsed to
/// single spaces and trimmed.
pub fn normalize(text: &str) -> String {
    let composed: String = text.nfc().collect();
    let folded = caseless::default_case_fold_str(&composed);
    // Folding can emit combining marks (e.g. U+0130), so recompose.
    let recomposed: String = folded.nfc().collect();
    let mut out = String::with_capacity(recomposed.len());
    for word in recomposed.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

const GLOTTAL_STOP: char = '\u{02BC}';

/// Maps ASCII apostrophe and the curly single quotes onto the modifier
/// letter apostrophe (U+02BC).
pub fn fold_apostrophes(text: &str) -> String {
    text.chars()
        .map(|c| match c {
            '\'' | '\u{2018}' | '\u{2019}' => GLOTTAL_STOP,
            c => c,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    /// Code-point n-grams.
    Char,
    /// Whitespace-token n-grams, joined by a single space.
    Word,
}

impl std::str::FromStr for FeatureKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "char" => Ok(FeatureKind::Char),
            "word" => Ok(FeatureKind::Word),
            other => Err(format!(
                "unknown feature kind {other:?} (expected char or word)"
            )),
        }
    }
}

/// Inclusive n-gram length range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NgramRange {
    pub min: usize,
    pub max: usize,
}

impl NgramRange {
    pub fn new(min: usize, max: usize) -> Result<Self> {
        if min == 0 || min > max {
            return Err(Error::InvalidParam(format!(
                "n-gram range ({min}, {max}) must satisfy 1 <= min <= max"
            )));
        }
        Ok(Self { min, max })
    }
}

impl Default for NgramRange {
    fn default() -> Self {
        Self { min: 1, max: 3 }
    }
}

/// How text is turned into n-grams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub kind: FeatureKind,
    pub range: NgramRange,
    pub fold_apostrophes: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            kind: FeatureKind::Char,
            range: NgramRange::default(),
            fold_apostrophes: false,
        }
    }
}

impl FeatureConfig {
    /// Normalizes raw text the way this configuration expects it.
    pub fn prepare(&self, text: &str) -> String {
        let t = normalize(text);
        if self.fold_apostrophes {
            fold_apostrophes(&t)
        } else {
            t
        }
    }

    /// Calls `f` on every n-gram of already prepared text, shortest length
    /// first, left to right within a length.
    pub fn for_each_ngram<'a>(&self, text: &'a str, mut f: impl FnMut(&'a str)) {
        match self.kind {
            FeatureKind::Char => {
                let bounds: Vec<usize> = text
                    .char_indices()
                    .map(|(i, _)| i)
                    .chain(std::iter::once(text.len()))
                    .collect();
                let chars = bounds.len() - 1;
                for n in self.range.min..=self.range.max.min(chars) {
                    for i in 0..=chars - n {
                        f(&text[bounds[i]..bounds[i + n]]);
                    }
                }
            }
            FeatureKind::Word => {
                let mut spans = Vec::new();
                let mut pos = 0;
                for tok in text.split(' ') {
                    if !tok.is_empty() {
                        spans.push((pos, pos + tok.len()));
                    }
                    pos += tok.len() + 1;
                }
                let words = spans.len();
                for n in self.range.min..=self.range.max.min(words) {
                    for i in 0..=words - n {
                        f(&text[spans[i].0..spans[i + n - 1].1]);
                    }
                }
            }
        }
    }
}

/// All contiguous code-point substrings with lengths in `range`, duplicates
/// kept.
pub fn extract_ngrams(text: &str, range: NgramRange) -> Vec<String> {
    let cfg = FeatureConfig {
        range,
        ..FeatureConfig::default()
    };
    let mut out = Vec::new();
    cfg.for_each_ngram(text, |g| out.push(g.to_string()));
    out
}

/// Sparse count vector; entries sorted by feature index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeatureVector {
    entries: Vec<(u32, u32)>,
    dimension: usize,
}

impl FeatureVector {
    /// Builds a vector from `(index, count)` pairs. Duplicate indices are
    /// summed and zero counts dropped.
    pub fn from_pairs(mut pairs: Vec<(u32, u32)>, dimension: usize) -> Result<Self> {
        pairs.sort_unstable_by_key(|&(i, _)| i);
        let mut entries: Vec<(u32, u32)> = Vec::with_capacity(pairs.len());
        for (i, c) in pairs {
            if i as usize >= dimension {
                return Err(Error::InvalidParam(format!(
                    "feature index {i} out of range for dimension {dimension}"
                )));
            }
            match entries.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => entries.push((i, c)),
            }
        }
        entries.retain(|&(_, c)| c > 0);
        Ok(Self { entries, dimension })
    }

    /// Dense input; every value becomes a count.
    pub fn from_dense(values: &[u32]) -> Self {
        let entries = values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0)
            .map(|(i, &v)| (i as u32, v))
            .collect();
        Self {
            entries,
            dimension: values.len(),
        }
    }

    pub fn entries(&self) -> &[(u32, u32)] {
        &self.entries
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn get(&self, index: u32) -> u32 {
        match self.entries.binary_search_by_key(&index, |&(i, _)| i) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => 0,
        }
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|&(_, c)| u64::from(c)).sum()
    }
}

/// Ordered n-gram to index map learned from training text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    config: FeatureConfig,
    /// `(ngram, training_count)` in index order.
    entries: Vec<(String, u64)>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn from_entries(config: FeatureConfig, entries: Vec<(String, u64)>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, (g, _)) in entries.iter().enumerate() {
            let len = match config.kind {
                FeatureKind::Char => g.chars().count(),
                FeatureKind::Word => g.split(' ').count(),
            };
            if len < config.range.min || len > config.range.max {
                return Err(Error::InvalidParam(format!(
                    "vocabulary entry {g:?} has length {len} outside {}..={}",
                    config.range.min, config.range.max
                )));
            }
            if index.insert(g.clone(), i as u32).is_some() {
                return Err(Error::InvalidParam(format!(
                    "duplicate vocabulary entry {g:?}"
                )));
            }
        }
        Ok(Self {
            config,
            entries,
            index,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    /// Effective dimension (may be below the requested one).
    pub fn dimension(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(String, u64)] {
        &self.entries
    }

    pub fn get(&self, ngram: &str) -> Option<u32> {
        self.index.get(ngram).copied()
    }

    pub fn ngram(&self, index: u32) -> Option<&str> {
        self.entries.get(index as usize).map(|(g, _)| g.as_str())
    }

    /// `index<TAB>ngram<TAB>training_count` lines.
    pub fn dump_tsv(&self) -> String {
        let mut s = String::new();
        for (i, (g, c)) in self.entries.iter().enumerate() {
            s.push_str(&format!("{i}\t{g}\t{c}\n"));
        }
        s
    }

    /// SHA-256 over the feature configuration and the ordered entries.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.config).expect("config serializes"));
        for (g, c) in &self.entries {
            h.update((g.len() as u64).to_le_bytes());
            h.update(g.as_bytes());
            h.update(c.to_le_bytes());
        }
        crate::hex(&h.finalize())
    }

    /// Vectorizes text that already went through `FeatureConfig::prepare`.
    pub fn vectorize_prepared(&self, text: &str) -> FeatureVector {
        let mut hits = Vec::new();
        self.config.for_each_ngram(text, |g| {
            if let Some(&i) = self.index.get(g) {
                hits.push(i);
            }
        });
        hits.sort_unstable();
        let mut entries: Vec<(u32, u32)> = Vec::new();
        for i in hits {
            match entries.last_mut() {
                Some(last) if last.0 == i => last.1 += 1,
                _ => entries.push((i, 1)),
            }
        }
        FeatureVector {
            entries,
            dimension: self.dimension(),
        }
    }
}

/// Counts n-grams over `train` and keeps the `dimension` most frequent,
/// ties broken by the lexicographic order of the n-gram.
pub fn build_vocabulary(
    train: &[LabeledSentence],
    config: FeatureConfig,
    dimension: usize,
) -> Result<Vocabulary> {
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if dimension == 0 {
        return Err(Error::InvalidParam(
            "feature dimension must be at least 1".into(),
        ));
    }
    let prepared: Vec<String> = train
        .par_iter()
        .map(|s| {
            if config.fold_apostrophes {
                fold_apostrophes(&s.text)
            } else {
                s.text.clone()
            }
        })
        .collect();
    let counts = prepared
        .par_chunks(1024)
        .map(|chunk| {
            let mut m: HashMap<&str, u64> = HashMap::new();
            for text in chunk {
                config.for_each_ngram(text, |g| *m.entry(g).or_insert(0) += 1);
            }
            m
        })
        .reduce(HashMap::new, |a, b| {
            let (mut a, b) = if a.len() >= b.len() { (a, b) } else { (b, a) };
            for (g, c) in b {
                *a.entry(g).or_insert(0) += c;
            }
            a
        });
    let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
    let order = |a: &(&str, u64), b: &(&str, u64)| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0));
    if ranked.len() > dimension {
        ranked.select_nth_unstable_by(dimension - 1, order);
        ranked.truncate(dimension);
    }
    ranked.sort_unstable_by(order);
    let entries = ranked
        .into_iter()
        .map(|(g, c)| (g.to_string(), c))
        .collect();
    Vocabulary::from_entries(config, entries)
}

/// Normalizes `text` per the vocabulary's configuration, then counts its
/// in-vocabulary n-grams.
pub fn vectorize(text: &str, vocab: &Vocabulary) -> FeatureVector {
    vocab.vectorize_prepared(&vocab.config.prepare(text))
}
