//! Random forest of Gini-split CART trees over sparse count vectors.

pub mod data;
pub mod format;
pub mod model;
pub mod split;
pub mod tree;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::rng::stream_rng;

pub use data::TrainingSet;
pub use model::ForestModel;
pub use split::{best_split, gini, Split};
pub use tree::{grow_tree, leaf_argmax, Node, Tree, TreeParams};

/// Number of features examined at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSampling {
    /// `round(sqrt(D))`, at least 1.
    Sqrt,
    /// Every feature.
    All,
    Count(usize),
}

impl FeatureSampling {
    pub fn resolve(self, dimension: usize) -> Result<usize> {
        match self {
            FeatureSampling::Sqrt => Ok(((dimension as f64).sqrt().round() as usize).max(1)),
            FeatureSampling::All => Ok(dimension.max(1)),
            FeatureSampling::Count(k) if k == 0 || k > dimension => Err(Error::InvalidParam(
                format!("features per split must be in 1..={dimension}, got {k}"),
            )),
            FeatureSampling::Count(k) => Ok(k),
        }
    }
}

impl std::str::FromStr for FeatureSampling {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sqrt" => Ok(FeatureSampling::Sqrt),
            "all" => Ok(FeatureSampling::All),
            n => n
                .parse()
                .map(FeatureSampling::Count)
                .map_err(|_| format!("expected sqrt, all or a positive integer, got {n:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` = unlimited.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub features_per_split: FeatureSampling,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            features_per_split: FeatureSampling::Sqrt,
            bootstrap: true,
            seed: 42,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidParam("n_trees must be at least 1".into()));
        }
        if self.max_depth == Some(0) {
            return Err(Error::InvalidParam("max_depth must be at least 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidParam(
                "min_samples_split must be at least 2".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub class: u32,
    /// Votes per class, indexed by class; sums to the tree count.
    pub votes: Vec<u32>,
}

impl Prediction {
    pub fn winner_votes(&self) -> u32 {
        self.votes[self.class as usize]
    }
}

/// Trained trees plus the shape of the space they were trained on.
/// `params.features_per_split` is always the resolved `Count`.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    params: ForestParams,
    n_classes: usize,
    dimension: usize,
    trees: Vec<Tree>,
}

impl Forest {
    pub fn from_parts(
        params: ForestParams,
        n_classes: usize,
        dimension: usize,
        trees: Vec<Tree>,
    ) -> Result<Self> {
        params.validate()?;
        if trees.len() != params.n_trees {
            return Err(Error::InvalidParam(format!(
                "forest declares {} trees but holds {}",
                params.n_trees,
                trees.len()
            )));
        }
        for (i, t) in trees.iter().enumerate() {
            t.validate(dimension, n_classes)
                .map_err(|e| Error::InvalidParam(format!("tree {i}: {e}")))?;
        }
        Ok(Self {
            params,
            n_classes,
            dimension,
            trees,
        })
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Majority vote of per-tree leaf argmaxes; ties go to the lower class.
    pub fn predict(&self, x: &FeatureVector) -> Result<Prediction> {
        if x.dimension() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: x.dimension(),
            });
        }
        let mut votes = vec![0u32; self.n_classes];
        for t in &self.trees {
            votes[t.predict(x) as usize] += 1;
        }
        let mut class = 0;
        for (c, &v) in votes.iter().enumerate() {
            if v > votes[class] {
                class = c;
            }
        }
        Ok(Prediction {
            class: class as u32,
            votes,
        })
    }
}

/// Trains `params.n_trees` trees in parallel on the current rayon pool.
/// Tree `t` draws its bootstrap sample and its per-node feature subsets from
/// `stream_rng(seed, t)` only, so the result does not depend on the number
/// of threads.
pub fn train_forest(data: &TrainingSet, params: &ForestParams) -> Result<Forest> {
    params.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let per_split = params.features_per_split.resolve(data.dimension())?;
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_split: params.min_samples_split,
        features_per_split: per_split,
    };
    let n = data.len();
    let trees: Vec<Tree> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(params.seed, t as u64);
            let weights = if params.bootstrap {
                let mut w = vec![0u32; n];
                for _ in 0..n {
                    w[rng.gen_range(0..n)] += 1;
                }
                w
            } else {
                vec![1u32; n]
            };
            tree::grow_weighted(data, &weights, &tree_params, &mut rng)
        })
        .collect();
    let resolved = ForestParams {
        features_per_split: FeatureSampling::Count(per_split),
        ..params.clone()
    };
    Forest::from_parts(resolved, data.n_classes(), data.dimension(), trees)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(c: u32) -> Tree {
        Tree::leaf(vec![(c, 1)])
    }

    fn forest(trees: Vec<Tree>, k: usize) -> Forest {
        let params = ForestParams {
            n_trees: trees.len(),
            features_per_split: FeatureSampling::Count(1),
            ..ForestParams::default()
        };
        Forest::from_parts(params, k, 1, trees).unwrap()
    }

    #[test]
    fn vote_ties_go_to_lowest_class() {
        let f = forest(vec![leaf(2), leaf(1), leaf(0)], 3);
        let p = f.predict(&FeatureVector::from_dense(&[0])).unwrap();
        assert_eq!(p.class, 0);
        assert_eq!(p.votes, vec![1, 1, 1]);
    }

    #[test]
    fn unanimous_forest() {
        let f = forest(vec![leaf(3); 5], 4);
        let p = f.predict(&FeatureVector::from_dense(&[7])).unwrap();
        assert_eq!((p.class, p.winner_votes()), (3, 5));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let f = forest(vec![leaf(0)], 1);
        assert!(matches!(
            f.predict(&FeatureVector::from_dense(&[0, 0])),
            Err(Error::DimensionMismatch {
                expected: 1,
                found: 2
            })
        ));
    }

    #[test]
    fn feature_sampling_resolution() {
        assert_eq!(FeatureSampling::Sqrt.resolve(5000).unwrap(), 71);
        assert_eq!(FeatureSampling::Sqrt.resolve(1).unwrap(), 1);
        assert_eq!(FeatureSampling::All.resolve(9).unwrap(), 9);
        assert!(FeatureSampling::Count(10).resolve(9).is_err());
        assert!(FeatureSampling::Count(0).resolve(9).is_err());
        assert_eq!(
            "sqrt".parse::<FeatureSampling>().unwrap(),
            FeatureSampling::Sqrt
        );
        assert_eq!(
            "12".parse::<FeatureSampling>().unwrap(),
            FeatureSampling::Count(12)
        );
    }

    #[test]
    fn params_validation() {
        assert!(ForestParams::default().validate().is_ok());
        for bad in [
            ForestParams {
                n_trees: 0,
                ..Default::default()
            },
            ForestParams {
                max_depth: Some(0),
                ..Default::default()
            },
            ForestParams {
                min_samples_split: 1,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn empty_training_set_rejected() {
        assert!(TrainingSet::new(&[], &[], 2).is_err());
    }
}
