//! Corpus ingestion: Leipzig sentence files, plain files, dataset manifests
//! and the stratified train/test split.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::normalize;
use crate::rng::{stream_rng, SPLIT_DOMAIN, SUBSAMPLE_DOMAIN};

/// One sentence as read from a source file, before normalization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawSentence {
    /// Sentence number: the Leipzig numeric prefix, or the 1-based file line
    /// for plain files.
    pub line_number: u64,
    pub text: String,
}

/// A line that could not be parsed. `line` is the 1-based physical line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedFile {
    pub sentences: Vec<RawSentence>,
    pub errors: Vec<LineError>,
}

fn strip_eol(line: &str) -> &str {
    line.strip_suffix('\r').unwrap_or(line)
}

/// Parses `<integer>\t<sentence>` records. Blank lines are skipped and
/// malformed lines are collected as errors rather than aborting the parse.
pub fn parse_leipzig<R: BufRead>(reader: R) -> std::io::Result<ParsedFile> {
    let mut out = ParsedFile::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = strip_eol(&line);
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        let Some((prefix, text)) = line.split_once('\t') else {
            out.errors.push(LineError {
                line: lineno,
                message: "missing TAB separator".into(),
            });
            continue;
        };
        let number = match prefix.parse::<u64>() {
            Ok(n) if n >= 1 => n,
            _ => {
                out.errors.push(LineError {
                    line: lineno,
                    message: format!("invalid sentence number {prefix:?}"),
                });
                continue;
            }
        };
        if text.trim().is_empty() {
            out.errors.push(LineError {
                line: lineno,
                message: "empty sentence text".into(),
            });
            continue;
        }
        out.sentences.push(RawSentence {
            line_number: number,
            text: text.to_string(),
        });
    }
    Ok(out)
}

/// One sentence per line; blank lines skipped.
pub fn parse_plain<R: BufRead>(reader: R) -> std::io::Result<ParsedFile> {
    let mut out = ParsedFile::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = strip_eol(&line);
        if line.trim().is_empty() {
            continue;
        }
        out.sentences.push(RawSentence {
            line_number: (i + 1) as u64,
            text: line.to_string(),
        });
    }
    Ok(out)
}

/// Renders sentences back into Leipzig format.
pub fn render_leipzig(sentences: &[RawSentence]) -> String {
    let mut s = String::new();
    for r in sentences {
        s.push_str(&r.line_number.to_string());
        s.push('\t');
        s.push_str(&r.text);
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileFormat {
    Leipzig,
    Plain,
}

impl FromStr for FileFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "leipzig" => Ok(FileFormat::Leipzig),
            "plain" => Ok(FileFormat::Plain),
            other => Err(format!(
                "unknown format {other:?} (expected leipzig or plain)"
            )),
        }
    }
}

impl FileFormat {
    pub fn parse_file(self, path: &Path) -> Result<ParsedFile> {
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let reader = BufReader::new(File::open(path).map_err(io_err)?);
        match self {
            FileFormat::Leipzig => parse_leipzig(reader),
            FileFormat::Plain => parse_plain(reader),
        }
        .map_err(io_err)
    }
}

/// Class index to language name, indices contiguous from 0.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassRegistry {
    names: Vec<String>,
}

impl ClassRegistry {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() {
                return Err(Error::InvalidParam(format!("class {i} has an empty name")));
            }
            if names[..i].contains(n) {
                return Err(Error::InvalidParam(format!(
                    "duplicate language name {n:?}"
                )));
            }
        }
        Ok(Self { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, class_index: u32) -> Option<&str> {
        self.names.get(class_index as usize).map(String::as_str)
    }

    pub fn index_of(&self, name: &str) -> Option<u32> {
        self.names.iter().position(|n| n == name).map(|i| i as u32)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.names
            .iter()
            .enumerate()
            .map(|(i, n)| (i as u32, n.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledSentence {
    pub text: String,
    pub label: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub language: String,
    pub class_index: u32,
    pub path: PathBuf,
    pub format: FileFormat,
}

/// Dataset description: which files make up which class.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetManifest {
    pub rows: Vec<ManifestRow>,
}

impl DatasetManifest {
    /// Parses the tab-separated manifest text. Relative paths are resolved
    /// against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = strip_eol(line);
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let bad = |message: String| Error::Manifest {
                line: i + 1,
                message,
            };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(bad(format!(
                    "expected 4 tab-separated columns, found {}",
                    cols.len()
                )));
            }
            let class_index = cols[1]
                .trim()
                .parse::<u32>()
                .map_err(|_| bad(format!("invalid class index {:?}", cols[1])))?;
            let format = cols[3].parse::<FileFormat>().map_err(bad)?;
            let path = Path::new(cols[2].trim());
            let path = if path.is_absolute() {
                path.to_path_buf()
            } else {
                base_dir.join(path)
            };
            rows.push(ManifestRow {
                language: cols[0].trim().to_string(),
                class_index,
                path,
                format,
            });
        }
        let manifest = Self { rows };
        manifest.registry()?;
        Ok(manifest)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    /// Builds the class registry, checking that indices are contiguous from
    /// 0 and that each index maps to exactly one language and vice versa.
    pub fn registry(&self) -> Result<ClassRegistry> {
        if self.rows.is_empty() {
            return Err(Error::Manifest {
                line: 0,
                message: "manifest lists no files".into(),
            });
        }
        let mut by_index: BTreeMap<u32, &str> = BTreeMap::new();
        for row in &self.rows {
            match by_index.get(&row.class_index) {
                Some(name) if *name != row.language => {
                    return Err(Error::Manifest {
                        line: 0,
                        message: format!(
                            "class {} named both {name:?} and {:?}",
                            row.class_index, row.language
                        ),
                    })
                }
                _ => {
                    by_index.insert(row.class_index, &row.language);
                }
            }
        }
        for (expected, idx) in by_index.keys().enumerate() {
            if *idx as usize != expected {
                return Err(Error::Manifest {
                    line: 0,
                    message: format!("class indices must be contiguous from 0; missing {expected}"),
                });
            }
        }
        ClassRegistry::new(by_index.into_values())
    }
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub registry: ClassRegistry,
    pub sentences: Vec<LabeledSentence>,
    /// Per-file recoverable parse errors.
    pub parse_errors: Vec<(PathBuf, LineError)>,
}

/// Reads every manifest file (in parallel), normalizes and labels the
/// sentences. Output order is manifest order, then file order.
pub fn load_dataset(manifest: &DatasetManifest) -> Result<LoadedDataset> {
    let registry = manifest.registry()?;
    let parsed: Vec<ParsedFile> = manifest
        .rows
        .par_iter()
        .map(|row| row.format.parse_file(&row.path))
        .collect::<Result<_>>()?;

    let mut sentences = Vec::new();
    let mut parse_errors = Vec::new();
    let mut per_class = vec![0usize; registry.len()];
    for (row, file) in manifest.rows.iter().zip(parsed) {
        parse_errors.extend(file.errors.into_iter().map(|e| (row.path.clone(), e)));
        for raw in file.sentences {
            let text = normalize(&raw.text);
            if text.is_empty() {
                continue;
            }
            per_class[row.class_index as usize] += 1;
            sentences.push(LabeledSentence {
                text,
                label: row.class_index,
            });
        }
    }
    for (class_index, language) in registry.iter() {
        if per_class[class_index as usize] == 0 {
            return Err(Error::EmptyClass {
                class_index,
                language: language.to_string(),
            });
        }
    }
    Ok(LoadedDataset {
        registry,
        sentences,
        parse_errors,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: Vec<LabeledSentence>,
    pub test: Vec<LabeledSentence>,
    pub seed: u64,
    pub test_fraction: f64,
}

/// Number of test items taken from a class of `n` items: `round(n * f)`,
/// clamped to `1..=n-1` so both splits see the class.
pub fn class_test_count(n: usize, test_fraction: f64) -> usize {
    let k = (n as f64 * test_fraction).round() as usize;
    k.clamp(1, n.saturating_sub(1))
}

/// Per-class seeded shuffle; the first `class_test_count` items of each
/// shuffled class go to the test split. Both splits keep input order.
pub fn stratified_split(
    data: &[LabeledSentence],
    test_fraction: f64,
    seed: u64,
) -> Result<SplitDataset> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::BadTestFraction(test_fraction));
    }
    let mut by_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, s) in data.iter().enumerate() {
        by_class.entry(s.label).or_default().push(i);
    }
    let mut in_test = vec![false; data.len()];
    for (&class, idx) in &by_class {
        if idx.len() < 2 {
            return Err(Error::ClassTooSmall {
                class_index: class,
                count: idx.len(),
            });
        }
        let mut shuffled = idx.clone();
        let mut rng = stream_rng(seed ^ SPLIT_DOMAIN, u64::from(class));
        shuffled.shuffle(&mut rng);
        for &i in &shuffled[..class_test_count(idx.len(), test_fraction)] {
            in_test[i] = true;
        }
    }
    let (test, train): (Vec<_>, Vec<_>) = data.iter().zip(&in_test).partition(|(_, &t)| t);
    Ok(SplitDataset {
        train: train.into_iter().map(|(s, _)| s.clone()).collect(),
        test: test.into_iter().map(|(s, _)| s.clone()).collect(),
        seed,
        test_fraction,
    })
}

/// Keeps at most `max_per_class` sentences of each class, chosen by a
/// seeded per-class shuffle; survivors keep input order.
pub fn subsample_per_class(
    data: &[LabeledSentence],
    max_per_class: usize,
    seed: u64,
) -> Vec<LabeledSentence> {
    let mut by_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, s) in data.iter().enumerate() {
        by_class.entry(s.label).or_default().push(i);
    }
    let mut keep = vec![false; data.len()];
    for (&class, idx) in &by_class {
        let mut shuffled = idx.clone();
        if shuffled.len() > max_per_class {
            let mut rng = stream_rng(seed ^ SUBSAMPLE_DOMAIN, u64::from(class));
            shuffled.shuffle(&mut rng);
            shuffled.truncate(max_per_class);
        }
        for i in shuffled {
            keep[i] = true;
        }
    }
    data.iter()
        .zip(keep)
        .filter(|&(_, k)| k)
        .map(|(s, _)| s.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn parse(s: &str) -> ParsedFile {
        parse_leipzig(Cursor::new(s)).unwrap()
    }

    #[test]
    fn leipzig_single_record() {
        let p = parse("1\tDiné bizaad");
        assert_eq!(
            p.sentences,
            vec![RawSentence {
                line_number: 1,
                text: "Diné bizaad".into()
            }]
        );
        assert!(p.errors.is_empty());
    }

    #[test]
    fn leipzig_empty_input() {
        assert_eq!(parse(""), ParsedFile::default());
    }

    #[test]
    fn leipzig_collects_bad_lines() {
        let p = parse("1\tfirst\n2 no tab here\n3\tthird\n");
        assert_eq!(p.sentences.len(), 2);
        assert_eq!(p.sentences[1].text, "third");
        assert_eq!(p.errors.len(), 1);
        assert_eq!(p.errors[0].line, 2);
    }

    #[test]
    fn leipzig_rejects_non_integer_prefix_and_crlf() {
        let p = parse("x1\tbad\r\n\r\n7\tok\r\n");
        assert_eq!(p.errors.len(), 1);
        assert_eq!(p.errors[0].line, 1);
        assert_eq!(p.sentences[0].text, "ok");
        assert_eq!(p.sentences[0].line_number, 7);
    }

    #[test]
    fn leipzig_keeps_tabs_inside_text() {
        let p = parse("5\ta\tb\n");
        assert_eq!(p.sentences[0].text, "a\tb");
    }

    #[test]
    fn plain_skips_blank_lines() {
        let p = parse_plain(Cursor::new("one\n\n  \ntwo\n")).unwrap();
        assert_eq!(p.sentences.len(), 2);
        assert_eq!(p.sentences[1].line_number, 4);
    }

    #[test]
    fn manifest_parse_and_registry() {
        let text = "# comment\nNavajo\t0\tnav.txt\tleipzig\nEnglish\t1\t/abs/eng.txt\tplain\n";
        let m = DatasetManifest::parse(text, Path::new("/data")).unwrap();
        assert_eq!(m.rows.len(), 2);
        assert_eq!(m.rows[0].path, PathBuf::from("/data/nav.txt"));
        assert_eq!(m.rows[1].path, PathBuf::from("/abs/eng.txt"));
        let reg = m.registry().unwrap();
        assert_eq!(reg.name(0), Some("Navajo"));
        assert_eq!(reg.index_of("English"), Some(1));
    }

    #[test]
    fn manifest_rejects_gaps_and_conflicts() {
        let gap = "A\t0\ta\tplain\nB\t2\tb\tplain\n";
        assert!(DatasetManifest::parse(gap, Path::new(".")).is_err());
        let conflict = "A\t0\ta\tplain\nB\t0\tb\tplain\n";
        assert!(DatasetManifest::parse(conflict, Path::new(".")).is_err());
        let dup_name = "A\t0\ta\tplain\nA\t1\tb\tplain\n";
        assert!(DatasetManifest::parse(dup_name, Path::new(".")).is_err());
        let bad_fmt = "A\t0\ta\tcsv\n";
        assert!(DatasetManifest::parse(bad_fmt, Path::new(".")).is_err());
    }

    fn labeled(n: usize, label: u32) -> Vec<LabeledSentence> {
        (0..n)
            .map(|i| LabeledSentence {
                text: format!("s{label}-{i}"),
                label,
            })
            .collect()
    }

    #[test]
    fn split_exact_proportion() {
        let data = labeled(10, 0);
        for seed in [0, 1, 42, 999] {
            let s = stratified_split(&data, 0.2, seed).unwrap();
            assert_eq!((s.train.len(), s.test.len()), (8, 2));
        }
    }

    #[test]
    fn split_rejects_tiny_class_and_bad_fraction() {
        let mut data = labeled(10, 0);
        data.extend(labeled(1, 1));
        assert!(matches!(
            stratified_split(&data, 0.2, 0),
            Err(Error::ClassTooSmall {
                class_index: 1,
                count: 1
            })
        ));
        assert!(stratified_split(&labeled(5, 0), 0.0, 0).is_err());
        assert!(stratified_split(&labeled(5, 0), 1.0, 0).is_err());
    }

    #[test]
    fn split_seeds_change_membership_not_counts() {
        let mut data = labeled(50, 0);
        data.extend(labeled(33, 1));
        data.extend(labeled(7, 2));
        let a = stratified_split(&data, 0.2, 1).unwrap();
        let b = stratified_split(&data, 0.2, 2).unwrap();
        assert_ne!(a.test, b.test);
        let counts = |s: &SplitDataset| {
            let mut c = [0usize; 3];
            s.test.iter().for_each(|x| c[x.label as usize] += 1);
            c
        };
        assert_eq!(counts(&a), counts(&b));
        assert_eq!(counts(&a), [10, 7, 1]);
    }

    #[test]
    fn subsample_caps_each_class() {
        let mut data = labeled(30, 0);
        data.extend(labeled(4, 1));
        let sub = subsample_per_class(&data, 10, 7);
        assert_eq!(sub.iter().filter(|s| s.label == 0).count(), 10);
        assert_eq!(sub.iter().filter(|s| s.label == 1).count(), 4);
        assert_eq!(sub, subsample_per_class(&data, 10, 7));
    }

    #[test]
    fn class_test_count_clamps() {
        assert_eq!(class_test_count(2, 0.2), 1);
        assert_eq!(class_test_count(2, 0.9), 1);
        assert_eq!(class_test_count(10_000, 0.2), 2_000);
    }
}
