use std::io::{Read, Write};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::corpus::{ClassRegistry, LabeledSentence};
use crate::error::{Error, Result};
use crate::features::{build_vocabulary, vectorize, FeatureConfig, FeatureVector, Vocabulary};
use crate::forest::format::{self, FormatError};
use crate::forest::{train_forest, Forest, ForestParams, Prediction, TrainingSet};

/// A trained forest bundled with the vocabulary and class registry needed to
/// classify raw text.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    forest: Forest,
    vocabulary: Vocabulary,
    registry: ClassRegistry,
}

impl ForestModel {
    pub fn new(forest: Forest, vocabulary: Vocabulary, registry: ClassRegistry) -> Result<Self> {
        if forest.dimension() != vocabulary.dimension() {
            return Err(Error::DimensionMismatch {
                expected: vocabulary.dimension(),
                found: forest.dimension(),
            });
        }
        if forest.n_classes() != registry.len() {
            return Err(Error::InvalidParam(format!(
                "forest has {} classes, registry {}",
                forest.n_classes(),
                registry.len()
            )));
        }
        Ok(Self {
            forest,
            vocabulary,
            registry,
        })
    }

    /// Builds the vocabulary from `train` only, vectorizes and trains.
    pub fn train(
        train: &[LabeledSentence],
        registry: ClassRegistry,
        features: FeatureConfig,
        dimension: usize,
        params: &ForestParams,
    ) -> Result<Self> {
        let vocabulary = build_vocabulary(train, features, dimension)?;
        let x: Vec<FeatureVector> = train
            .par_iter()
            .map(|s| vocabulary.vectorize_prepared(&features.prepare(&s.text)))
            .collect();
        let y: Vec<u32> = train.iter().map(|s| s.label).collect();
        let data = TrainingSet::new(&x, &y, registry.len())?;
        let forest = train_forest(&data, params)?;
        Self::new(forest, vocabulary, registry)
    }

    pub fn forest(&self) -> &Forest {
        &self.forest
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn registry(&self) -> &ClassRegistry {
        &self.registry
    }

    pub fn params(&self) -> &ForestParams {
        self.forest.params()
    }

    pub fn format_version(&self) -> u32 {
        format::FORMAT_VERSION
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<Prediction> {
        self.forest.predict(x)
    }

    pub fn predict_text(&self, text: &str) -> Prediction {
        self.forest
            .predict(&vectorize(text, &self.vocabulary))
            .expect("vocabulary and forest dimensions agree")
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        format::to_bytes(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        format::from_bytes(bytes)
    }

    pub fn save<W: Write>(&self, w: W) -> Result<(), FormatError> {
        format::write_model(self, w)
    }

    pub fn load<R: Read>(r: R) -> Result<Self, FormatError> {
        format::read_model(r)
    }

    /// SHA-256 of the serialized model, hex encoded.
    pub fn fingerprint(&self) -> String {
        crate::hex(&Sha256::digest(self.to_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::normalize;

    fn toy() -> (Vec<LabeledSentence>, ClassRegistry) {
        let texts = [
            ("abab ba", 0),
            ("baab ab", 0),
            ("bbaa", 0),
            ("xyxy yx", 1),
            ("yxxy", 1),
            ("xx yy", 1),
        ];
        let data = texts
            .iter()
            .map(|&(t, l)| LabeledSentence {
                text: normalize(t),
                label: l,
            })
            .collect();
        (data, ClassRegistry::new(["Alpha", "Beta"]).unwrap())
    }

    fn trained() -> ForestModel {
        let (data, reg) = toy();
        let params = ForestParams {
            n_trees: 7,
            ..ForestParams::default()
        };
        ForestModel::train(&data, reg, FeatureConfig::default(), 50, &params).unwrap()
    }

    #[test]
    fn classifies_its_training_alphabets() {
        let m = trained();
        assert_eq!(m.predict_text("ab ba").class, 0);
        assert_eq!(m.predict_text("YX xy").class, 1);
        assert_eq!(m.predict_text("").votes.iter().sum::<u32>(), 7);
    }

    #[test]
    fn bytes_round_trip() {
        let m = trained();
        let bytes = m.to_bytes();
        assert_eq!(&bytes[..8], b"ATHALANG");
        let back = ForestModel::from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.fingerprint(), m.fingerprint());
    }

    #[test]
    fn empty_stream_is_a_version_error() {
        assert!(matches!(
            ForestModel::load(&[][..]),
            Err(FormatError::Version { .. })
        ));
    }

    #[test]
    fn wrong_version_reports_both_versions() {
        let mut bytes = trained().to_bytes();
        bytes[8] = 9;
        let msg = ForestModel::from_bytes(&bytes).unwrap_err().to_string();
        assert!(msg.contains("v1") && msg.contains("version 9"), "{msg}");
    }

    #[test]
    fn truncation_is_detected() {
        let bytes = trained().to_bytes();
        for cut in [12, 20, bytes.len() / 2, bytes.len() - 1] {
            assert!(
                ForestModel::from_bytes(&bytes[..cut]).is_err(),
                "cut at {cut}"
            );
        }
    }

    #[test]
    fn mismatched_parts_rejected() {
        let m = trained();
        let reg = ClassRegistry::new(["Only"]).unwrap();
        assert!(ForestModel::new(m.forest().clone(), m.vocabulary().clone(), reg).is_err());
    }
}
