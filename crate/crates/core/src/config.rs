//! Run configuration shared by the CLI and embedded in every report.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureKind, NgramRange};
use crate::forest::{FeatureSampling, ForestParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub test_fraction: f64,
    pub features_dimension: usize,
    pub feature_kind: FeatureKind,
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub fold_apostrophes: bool,
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub features_per_split: FeatureSampling,
    pub bootstrap: bool,
    /// `None` = machine parallelism.
    pub threads: Option<usize>,
    pub manifest: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let forest = ForestParams::default();
        Self {
            seed: 42,
            test_fraction: 0.2,
            features_dimension: 5000,
            feature_kind: FeatureKind::Char,
            ngram_min: 1,
            ngram_max: 3,
            fold_apostrophes: false,
            n_trees: forest.n_trees,
            max_depth: forest.max_depth,
            min_samples_split: forest.min_samples_split,
            features_per_split: forest.features_per_split,
            bootstrap: forest.bootstrap,
            threads: None,
            manifest: None,
            model: None,
            out: None,
        }
    }
}

/// What produced a report: the full configuration and the model's content
/// hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config: RunConfig,
    pub model_fingerprint: String,
}

impl RunConfig {
    pub fn feature_config(&self) -> Result<FeatureConfig> {
        Ok(FeatureConfig {
            kind: self.feature_kind,
            range: NgramRange::new(self.ngram_min, self.ngram_max)?,
            fold_apostrophes: self.fold_apostrophes,
        })
    }

    pub fn forest_params(&self) -> ForestParams {
        ForestParams {
            n_trees: self.n_trees,
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            features_per_split: self.features_per_split,
            bootstrap: self.bootstrap,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::BadTestFraction(self.test_fraction));
        }
        if self.features_dimension == 0 {
            return Err(Error::InvalidParam(
                "feature dimension must be at least 1".into(),
            ));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidParam(
                "thread count must be at least 1".into(),
            ));
        }
        self.feature_config()?;
        self.forest_params().validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_setup() {
        let c = RunConfig::default();
        assert_eq!(
            (c.seed, c.test_fraction, c.features_dimension),
            (42, 0.2, 5000)
        );
        assert_eq!((c.ngram_min, c.ngram_max), (1, 3));
        assert_eq!(c.n_trees, 100);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn json_round_trip() {
        let c = RunConfig {
            max_depth: Some(12),
            features_per_split: FeatureSampling::Count(9),
            ..RunConfig::default()
        };
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn invalid_configs() {
        for c in [
            RunConfig {
                test_fraction: 1.0,
                ..Default::default()
            },
            RunConfig {
                ngram_min: 4,
                ..Default::default()
            },
            RunConfig {
                threads: Some(0),
                ..Default::default()
            },
            RunConfig {
                n_trees: 0,
                ..Default::default()
            },
        ] {
            assert!(c.validate().is_err());
        }
    }
}
