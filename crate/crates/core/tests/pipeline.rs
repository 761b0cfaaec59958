use std::fs;
use std::io::Cursor;

use athalang_core::corpus::{
    load_dataset, parse_leipzig, render_leipzig, stratified_split, ClassRegistry, DatasetManifest,
    LabeledSentence,
};
use athalang_core::features::{normalize, FeatureConfig};
use athalang_core::forest::{ForestModel, ForestParams};
use athalang_core::generalize::{generalization_rate, prediction_histogram};
use athalang_core::metrics::{confusion_matrix, per_class_metrics, EvaluationReport};
use athalang_core::Error;
use athalang_testkit::{
    leipzig_text, plain_text, sentences, DISJOINT_A, DISJOINT_B, NAVAJO_LIKE, POLISH_LIKE,
    SPANISH_LIKE,
};
use proptest::prelude::*;

fn labeled(texts: &[String], label: u32) -> Vec<LabeledSentence> {
    texts
        .iter()
        .map(|t| LabeledSentence {
            text: normalize(t),
            label,
        })
        .collect()
}

fn small_model(trees: usize) -> (ForestModel, Vec<LabeledSentence>) {
    let mut data = labeled(&sentences(NAVAJO_LIKE, 60, 1), 0);
    data.extend(labeled(&sentences(SPANISH_LIKE, 60, 2), 1));
    data.extend(labeled(&sentences(POLISH_LIKE, 60, 3), 2));
    let reg = ClassRegistry::new(["Navajo", "Spanish", "Polish"]).unwrap();
    let params = ForestParams {
        n_trees: trees,
        ..ForestParams::default()
    };
    let model = ForestModel::train(&data, reg, FeatureConfig::default(), 300, &params).unwrap();
    (model, data)
}

#[test]
fn load_dataset_mixed_formats() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("nav.txt"),
        "1\tYá'át'ééh\n2\tDiné   Bizaad\nbroken line\n",
    )
    .unwrap();
    fs::write(
        dir.path().join("eng.txt"),
        "Hello there\n\nGood morning\nBye\n",
    )
    .unwrap();
    fs::write(dir.path().join("eng2.txt"), "1\tOne more\n").unwrap();
    let manifest =
        "Navajo\t0\tnav.txt\tleipzig\nEnglish\t1\teng.txt\tplain\nEnglish\t1\teng2.txt\tleipzig\n";
    fs::write(dir.path().join("m.tsv"), manifest).unwrap();

    let ds = load_dataset(&DatasetManifest::from_path(&dir.path().join("m.tsv")).unwrap()).unwrap();
    assert_eq!(ds.registry.names(), ["Navajo", "English"]);
    assert_eq!(ds.sentences.len(), 2 + 3 + 1);
    assert_eq!(ds.sentences[1].text, "diné bizaad");
    assert_eq!(ds.sentences.iter().filter(|s| s.label == 1).count(), 4);
    assert_eq!(ds.parse_errors.len(), 1);
    assert_eq!(ds.parse_errors[0].1.line, 3);
}

#[test]
fn load_dataset_single_language() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.txt"), "1\tfirst\n2\tsecond\n").unwrap();
    let m = DatasetManifest::parse("Navajo\t0\ta.txt\tleipzig\n", dir.path()).unwrap();
    let ds = load_dataset(&m).unwrap();
    assert_eq!(ds.registry.len(), 1);
    assert_eq!(ds.sentences.len(), 2);
}

#[test]
fn load_dataset_fatal_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = DatasetManifest::parse("A\t0\tnope.txt\tplain\n", dir.path()).unwrap();
    match load_dataset(&missing) {
        Err(Error::Io { path, .. }) => assert!(path.ends_with("nope.txt")),
        other => panic!("expected io error, got {other:?}"),
    }
    fs::write(dir.path().join("empty.txt"), "\n\n").unwrap();
    fs::write(dir.path().join("ok.txt"), "x\n").unwrap();
    let empty = DatasetManifest::parse("A\t0\tok.txt\tplain\nB\t1\tempty.txt\tplain\n", dir.path())
        .unwrap();
    assert!(matches!(
        load_dataset(&empty),
        Err(Error::EmptyClass { class_index: 1, .. })
    ));
}

#[test]
fn twenty_one_class_registry() {
    let dir = tempfile::tempdir().unwrap();
    let names = [
        "Navajo",
        "Icelandic",
        "Lingala",
        "Wolof",
        "Polish",
        "Czech",
        "Manx",
        "Fulah",
        "Yoruba",
        "Portuguese",
        "Somali",
        "Slovak",
        "Tsonga",
        "Spanish",
        "Oromo",
        "Indonesian",
        "Igbo",
        "Northern Sami",
        "Irish",
        "Arabic",
        "English",
    ];
    let mut manifest = String::new();
    for (i, n) in names.iter().enumerate() {
        fs::write(dir.path().join(format!("{i}.txt")), "1\ta\n2\tb\n").unwrap();
        manifest.push_str(&format!("{n}\t{i}\t{i}.txt\tleipzig\n"));
    }
    let ds = load_dataset(&DatasetManifest::parse(&manifest, dir.path()).unwrap()).unwrap();
    assert_eq!(ds.registry.len(), 21);
    assert_eq!(ds.registry.index_of("Navajo"), Some(0));
    assert_eq!(ds.registry.name(20), Some("English"));
}

#[test]
fn separable_languages_are_learned_perfectly() {
    let mut data = labeled(&sentences(DISJOINT_A, 300, 10), 0);
    data.extend(labeled(&sentences(DISJOINT_B, 300, 11), 1));
    let split = stratified_split(&data, 0.2, 42).unwrap();
    let reg = ClassRegistry::new(["Navajo", "Other"]).unwrap();
    let params = ForestParams {
        n_trees: 25,
        ..ForestParams::default()
    };
    let model =
        ForestModel::train(&split.train, reg, FeatureConfig::default(), 5000, &params).unwrap();
    for part in [&split.train, &split.test] {
        let y: Vec<u32> = part.iter().map(|s| s.label).collect();
        let p: Vec<u32> = part
            .iter()
            .map(|s| model.predict_text(&s.text).class)
            .collect();
        let cm = confusion_matrix(&y, &p, 2).unwrap();
        assert_eq!(cm.trace(), cm.total());
    }
}

#[test]
fn degenerate_forest_equals_single_cart_tree() {
    let (_, data) = small_model(1);
    let reg = ClassRegistry::new(["Navajo", "Spanish", "Polish"]).unwrap();
    let params = ForestParams {
        n_trees: 1,
        bootstrap: false,
        features_per_split: athalang_core::forest::FeatureSampling::All,
        ..ForestParams::default()
    };
    let a = ForestModel::train(&data, reg.clone(), FeatureConfig::default(), 300, &params).unwrap();
    let b = ForestModel::train(
        &data,
        reg,
        FeatureConfig::default(),
        300,
        &ForestParams {
            seed: 777,
            ..params
        },
    )
    .unwrap();
    // With every feature examined and no resampling, the seed is irrelevant.
    assert_eq!(a.forest().trees(), b.forest().trees());
    let tree = &a.forest().trees()[0];
    for s in &data {
        let x = athalang_core::features::vectorize(&s.text, a.vocabulary());
        assert_eq!(a.predict(&x).unwrap().class, tree.predict(&x));
        assert_eq!(tree.predict(&x), s.label);
    }
}

#[test]
fn votes_sum_to_tree_count_and_winner_is_maximal() {
    let (model, _) = small_model(9);
    for text in sentences(SPANISH_LIKE, 20, 99)
        .iter()
        .chain(&sentences(POLISH_LIKE, 20, 98))
    {
        let p = model.predict_text(text);
        assert_eq!(p.votes.iter().sum::<u32>(), 9);
        assert_eq!(p.winner_votes(), *p.votes.iter().max().unwrap());
    }
}

#[test]
fn generalization_on_training_sentences() {
    let (model, data) = small_model(15);
    let navajo: Vec<&str> = data
        .iter()
        .filter(|s| s.label == 0)
        .take(5)
        .map(|s| s.text.as_str())
        .collect();
    let r = generalization_rate(&model, "own", &navajo, 0).unwrap();
    assert_eq!(r.rate, 1.0);
    assert_eq!(r.prediction_histogram.get(&0), Some(&5));

    assert!(generalization_rate(&model, "empty", &Vec::<String>::new(), 0).is_err());
    assert!(generalization_rate(&model, "x", &navajo, 9).is_err());
}

#[test]
fn metric_identities_on_a_real_run() {
    let (model, _) = small_model(11);
    let mut probe = labeled(&sentences(NAVAJO_LIKE, 30, 50), 0);
    probe.extend(labeled(&sentences(SPANISH_LIKE, 30, 51), 1));
    probe.extend(labeled(&sentences(POLISH_LIKE, 30, 52), 2));
    let y: Vec<u32> = probe.iter().map(|s| s.label).collect();
    let p: Vec<u32> = probe
        .iter()
        .map(|s| model.predict_text(&s.text).class)
        .collect();
    let cm = confusion_matrix(&y, &p, 3).unwrap();
    let report = EvaluationReport::new(model.registry(), cm.clone(), None).unwrap();
    report.check_identities(1e-12).unwrap();
    assert_eq!(
        per_class_metrics(&cm)
            .iter()
            .map(|m| m.support)
            .sum::<u64>(),
        90
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_partitions_and_stratifies(
        sizes in prop::collection::vec(2usize..40, 1..5),
        fraction in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let mut data = Vec::new();
        for (c, &n) in sizes.iter().enumerate() {
            for i in 0..n {
                data.push(LabeledSentence { text: format!("{c}:{i}"), label: c as u32 });
            }
        }
        let s = stratified_split(&data, fraction, seed).unwrap();
        prop_assert_eq!(s.clone(), stratified_split(&data, fraction, seed).unwrap());
        let mut all: Vec<_> = s.train.iter().chain(&s.test).cloned().collect();
        all.sort_by(|a, b| a.text.cmp(&b.text));
        let mut orig = data.clone();
        orig.sort_by(|a, b| a.text.cmp(&b.text));
        prop_assert_eq!(all, orig);
        for (c, &n) in sizes.iter().enumerate() {
            let t = s.test.iter().filter(|x| x.label == c as u32).count();
            let exact = n as f64 * fraction;
            prop_assert!(t as f64 >= exact.floor() && t as f64 <= exact.ceil(), "class {c}: {t} of {n}");
            prop_assert!(t >= 1 && t < n);
        }
    }

    #[test]
    fn leipzig_render_parse_is_idempotent(lines in prop::collection::vec("[^\t\r\n]{0,20}", 0..20)) {
        let text: String = lines.iter().enumerate().map(|(i, l)| format!("{}\t{l}\n", i + 1)).collect();
        let first = parse_leipzig(Cursor::new(text)).unwrap();
        let again = parse_leipzig(Cursor::new(render_leipzig(&first.sentences))).unwrap();
        prop_assert_eq!(&again.sentences, &first.sentences);
        prop_assert!(again.errors.is_empty());
    }

    #[test]
    fn histogram_is_permutation_invariant_and_conserved(seed in 0u64..1000, drop in 0usize..10) {
        let model = shared_model();
        let mut corpus = sentences(NAVAJO_LIKE, 5, seed);
        corpus.extend(sentences(SPANISH_LIKE, 5, seed + 1));
        let h = prediction_histogram(model, &corpus);
        prop_assert_eq!(h.values().sum::<u64>(), 10);
        let mut rev = corpus.clone();
        rev.reverse();
        prop_assert_eq!(&prediction_histogram(model, &rev), &h);
        let r = generalization_rate(model, "c", &corpus, 0).unwrap();
        prop_assert_eq!(h.get(&0).copied().unwrap_or(0), r.classified_as_target);

        let removed = corpus.remove(drop);
        let h2 = prediction_histogram(model, &corpus);
        let class = model.predict_text(&removed).class;
        prop_assert_eq!(h2.values().sum::<u64>(), 9);
        prop_assert_eq!(h2.get(&class).copied().unwrap_or(0) + 1, h[&class]);
    }

    #[test]
    fn corrupted_models_never_panic(pos in any::<prop::sample::Index>(), byte in any::<u8>()) {
        let mut bytes = shared_model().to_bytes();
        let i = pos.index(bytes.len());
        bytes[i] = byte;
        let _ = ForestModel::from_bytes(&bytes);
        let _ = ForestModel::from_bytes(&bytes[..i]);
    }
}

fn shared_model() -> &'static ForestModel {
    static MODEL: std::sync::OnceLock<ForestModel> = std::sync::OnceLock::new();
    MODEL.get_or_init(|| small_model(5).0)
}

#[test]
fn flipped_tree_flag_is_a_structural_error() {
    let model = shared_model();
    let bytes = model.to_bytes();
    // The trees section is last; its first node flag sits right after the
    // section length, the tree count and the first tree's node count.
    let header = 12;
    let mut at = header;
    for _ in 0..3 {
        let len = u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()) as usize;
        at += 8 + len;
    }
    let flag = at + 8 + 4 + 4;
    let mut corrupt = bytes.clone();
    corrupt[flag] = 0x7F;
    let err = ForestModel::from_bytes(&corrupt).unwrap_err().to_string();
    assert!(err.contains("trees") && err.contains("0x7f"), "{err}");
}

#[test]
fn files_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    let model = shared_model();
    model.save(fs::File::create(&path).unwrap()).unwrap();
    let back = ForestModel::load(fs::File::open(&path).unwrap()).unwrap();
    for text in sentences(POLISH_LIKE, 50, 5) {
        assert_eq!(back.predict_text(&text), model.predict_text(&text));
    }
}

#[test]
fn leipzig_fixture_counts() {
    let text = leipzig_text(&sentences(NAVAJO_LIKE, 12, 0));
    assert_eq!(
        parse_leipzig(Cursor::new(text)).unwrap().sentences.len(),
        12
    );
    let plain = plain_text(&sentences(NAVAJO_LIKE, 7, 0));
    assert_eq!(plain.lines().count(), 7);
}
