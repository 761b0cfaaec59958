//! Test support: brute-force oracles that share no code with the library,
//! and deterministic synthetic corpora.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// -- oracles --------------------------------------------------------------

/// `1 - Σ p²`, evaluated term by term.
pub fn direct_gini(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let mut s = 0.0;
    for &c in counts {
        let p = c as f64 / total as f64;
        s += p * p;
    }
    1.0 - s
}

/// Exhaustive search over every `(candidate feature, midpoint)` pair for a
/// dense matrix. Samples may repeat. Returns `(feature, threshold)` of the
/// first pair (feature ascending, threshold ascending) whose weighted child
/// Gini is minimal, or `None` when no pair lowers the parent's impurity.
pub fn brute_force_best_split(
    x: &[Vec<u32>],
    y: &[u32],
    n_classes: usize,
    samples: &[usize],
    candidates: &[u32],
) -> Option<(u32, f64)> {
    const EPS: f64 = 1e-12;
    let mut parent = vec![0u64; n_classes];
    for &s in samples {
        parent[y[s] as usize] += 1;
    }
    let parent_gini = direct_gini(&parent);
    let n = samples.len() as f64;

    let mut feats = candidates.to_vec();
    feats.sort_unstable();
    feats.dedup();

    let mut best: Option<(f64, u32, f64)> = None;
    for f in feats {
        let mut values: Vec<u32> = samples.iter().map(|&s| x[s][f as usize]).collect();
        values.sort_unstable();
        values.dedup();
        for w in values.windows(2) {
            let threshold = (w[0] as f64 + w[1] as f64) / 2.0;
            let mut left = vec![0u64; n_classes];
            let mut right = vec![0u64; n_classes];
            for &s in samples {
                if (x[s][f as usize] as f64) <= threshold {
                    left[y[s] as usize] += 1;
                } else {
                    right[y[s] as usize] += 1;
                }
            }
            let nl = left.iter().sum::<u64>() as f64;
            let nr = right.iter().sum::<u64>() as f64;
            let impurity = nl / n * direct_gini(&left) + nr / n * direct_gini(&right);
            if best.is_none_or(|(b, _, _)| impurity < b - EPS) {
                best = Some((impurity, f, threshold));
            }
        }
    }
    best.filter(|&(imp, _, _)| imp < parent_gini - EPS)
        .map(|(_, f, t)| (f, t))
}

/// Counts every substring whose length in code points lies in
/// `min..=max`, by enumerating all `(start, end)` pairs.
pub fn brute_force_ngram_counts(text: &str, min: usize, max: usize) -> BTreeMap<String, u32> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = BTreeMap::new();
    for i in 0..chars.len() {
        for j in i + 1..=chars.len() {
            let len = j - i;
            if len >= min && len <= max {
                *out.entry(chars[i..j].iter().collect::<String>())
                    .or_insert(0) += 1;
            }
        }
    }
    out
}

/// Random dense classification instance.
pub struct Instance {
    pub x: Vec<Vec<u32>>,
    pub y: Vec<u32>,
    pub n_classes: usize,
    pub n_features: usize,
}

pub fn random_instance(rng: &mut impl Rng, max_samples: usize, max_features: usize) -> Instance {
    let n = rng.gen_range(2..=max_samples);
    let d = rng.gen_range(1..=max_features);
    let k = rng.gen_range(2..=4);
    let max_value = rng.gen_range(1..=6);
    let sparsity: f64 = rng.gen_range(0.0..0.8);
    let x = (0..n)
        .map(|_| {
            (0..d)
                .map(|_| {
                    if rng.gen_bool(sparsity) {
                        0
                    } else {
                        rng.gen_range(0..=max_value)
                    }
                })
                .collect()
        })
        .collect();
    let y = (0..n).map(|_| rng.gen_range(0..k as u32)).collect();
    Instance {
        x,
        y,
        n_classes: k,
        n_features: d,
    }
}

/// Random text over a small alphabet that mixes ASCII, precomposed and
/// combining characters, and whitespace.
pub fn random_text(rng: &mut impl Rng, max_len: usize) -> String {
    const POOL: &[&str] = &[
        "a",
        "b",
        "n",
        "é",
        "e\u{301}",
        "ą",
        "ł",
        "ʼ",
        "'",
        " ",
        "  ",
        "\t",
        "Ł",
        "A",
        "ǫ\u{301}",
        "z",
        "h",
    ];
    let len = rng.gen_range(0..=max_len);
    (0..len).map(|_| *POOL.choose(rng).unwrap()).collect()
}

// -- synthetic languages --------------------------------------------------

/// A toy language: sentences are words built from a syllable inventory.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticLanguage {
    pub name: &'static str,
    pub syllables: &'static [&'static str],
}

pub const NAVAJO_LIKE: SyntheticLanguage = SyntheticLanguage {
    name: "Navajo",
    syllables: &[
        "yá", "át", "ééh", "di", "né", "bi", "zaad", "hó", "zhǫ́", "łe", "tłʼé", "chʼi", "tsʼá",
        "kʼé", "shį", "náá", "doo", "aooʼ", "hwe", "nił",
    ],
};

pub const SPANISH_LIKE: SyntheticLanguage = SyntheticLanguage {
    name: "Spanish",
    syllables: &[
        "la", "de", "que", "el", "ción", "ma", "ñe", "pa", "ra", "los", "es", "ta", "cio", "mos",
        "po",
    ],
};

pub const POLISH_LIKE: SyntheticLanguage = SyntheticLanguage {
    name: "Polish",
    syllables: &[
        "prz", "szcz", "ć", "ży", "dź", "ką", "nie", "wie", "się", "go", "ło", "cz", "rz", "ski",
        "wa",
    ],
};

pub const ENGLISH_LIKE: SyntheticLanguage = SyntheticLanguage {
    name: "English",
    syllables: &[
        "the", "and", "ing", "th", "er", "wh", "ould", "ight", "ch", "ow", "ea", "st", "tion",
        "ly", "ou",
    ],
};

/// Two languages whose letters are disjoint (only the space is shared).
pub const DISJOINT_A: SyntheticLanguage = SyntheticLanguage {
    name: "Navajo",
    syllables: &["yá", "ąą", "łá", "nąy", "zá", "ʼą", "ył", "ná"],
};

pub const DISJOINT_B: SyntheticLanguage = SyntheticLanguage {
    name: "Other",
    syllables: &["ke", "mo", "pe", "ro", "st", "te", "ok", "em"],
};

fn word(rng: &mut impl Rng, syllables: &[&str]) -> String {
    let n = rng.gen_range(1..=3);
    (0..n).map(|_| *syllables.choose(rng).unwrap()).collect()
}

/// `n` sentences of 4–12 words. Each word comes from `secondary` with
/// probability `mix`.
pub fn mixed_sentences(
    primary: SyntheticLanguage,
    secondary: SyntheticLanguage,
    mix: f64,
    n: usize,
    seed: u64,
) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let words = rng.gen_range(4..=12);
            let mut s = String::new();
            for i in 0..words {
                if i > 0 {
                    s.push(' ');
                }
                let lang = if rng.gen_bool(mix) {
                    secondary
                } else {
                    primary
                };
                s.push_str(&word(&mut rng, lang.syllables));
            }
            if rng.gen_bool(0.3) {
                // Occasional capital letter, exercising normalization.
                let mut c = s.chars();
                let first = c.next().unwrap().to_uppercase().to_string();
                s = first + c.as_str();
            }
            s
        })
        .collect()
}

pub fn sentences(lang: SyntheticLanguage, n: usize, seed: u64) -> Vec<String> {
    mixed_sentences(lang, lang, 0.0, n, seed)
}

pub fn leipzig_text(sentences: &[String]) -> String {
    let mut s = String::new();
    for (i, t) in sentences.iter().enumerate() {
        writeln!(s, "{}\t{t}", i + 1).unwrap();
    }
    s
}

pub fn plain_text(sentences: &[String]) -> String {
    let mut s = sentences.join("\n");
    s.push('\n');
    s
}

/// Writes one Leipzig file per language plus `manifest.tsv`; returns the
/// manifest path. Language `i` gets class `i`.
pub fn write_benchmark(
    dir: &Path,
    langs: &[SyntheticLanguage],
    per_language: usize,
    seed: u64,
) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut manifest = String::from("# language\tclass\tpath\tformat\n");
    for (i, lang) in langs.iter().enumerate() {
        let file = format!("{}-{}.txt", lang.name.to_lowercase(), per_language);
        let text = sentences(*lang, per_language, seed.wrapping_add(i as u64));
        fs::write(dir.join(&file), leipzig_text(&text))?;
        writeln!(manifest, "{}\t{i}\t{file}\tleipzig", lang.name).unwrap();
    }
    let path = dir.join("manifest.tsv");
    fs::write(&path, manifest)?;
    Ok(path)
}

/// Athabaskan-like corpora: Navajo-like text with an increasing share of
/// foreign words, sized like the four Apache test sets.
pub fn apache_like_corpora(seed: u64) -> Vec<(&'static str, Vec<String>)> {
    vec![
        (
            "Western Apache",
            mixed_sentences(NAVAJO_LIKE, SPANISH_LIKE, 0.05, 25, seed),
        ),
        (
            "Mescalero Apache",
            mixed_sentences(NAVAJO_LIKE, SPANISH_LIKE, 0.05, 32, seed + 1),
        ),
        (
            "Jicarilla Apache",
            mixed_sentences(NAVAJO_LIKE, ENGLISH_LIKE, 0.2, 13, seed + 2),
        ),
        (
            "Lipan Apache",
            mixed_sentences(NAVAJO_LIKE, ENGLISH_LIKE, 0.55, 37, seed + 3),
        ),
    ]
}

pub fn write_apache_like(dir: &Path, seed: u64) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, text) in apache_like_corpora(seed) {
        fs::write(dir.join(format!("{name}.txt")), plain_text(&text))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_force_counts_small() {
        let c = brute_force_ngram_counts("aaa", 1, 2);
        assert_eq!(c.get("a"), Some(&3));
        assert_eq!(c.get("aa"), Some(&2));
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn brute_force_split_small() {
        let x = vec![vec![0], vec![0], vec![5], vec![5]];
        let y = vec![0, 0, 1, 1];
        assert_eq!(
            brute_force_best_split(&x, &y, 2, &[0, 1, 2, 3], &[0]),
            Some((0, 2.5))
        );
        assert_eq!(brute_force_best_split(&x, &y, 2, &[0, 1], &[0]), None);
    }

    #[test]
    fn disjoint_alphabets_are_disjoint() {
        let letters = |l: SyntheticLanguage| -> std::collections::BTreeSet<char> {
            l.syllables.iter().flat_map(|s| s.chars()).collect()
        };
        assert!(letters(DISJOINT_A).is_disjoint(&letters(DISJOINT_B)));
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(sentences(NAVAJO_LIKE, 5, 1), sentences(NAVAJO_LIKE, 5, 1));
        assert_ne!(sentences(NAVAJO_LIKE, 5, 1), sentences(NAVAJO_LIKE, 5, 2));
    }
}
