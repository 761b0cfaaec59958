use rand::Rng;

use crate::features::FeatureVector;
use crate::forest::data::TrainingSet;
use crate::forest::split::Splitter;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Left child is the next node in preorder; `right` is the index of the
    /// right child.
    Split {
        feature: u32,
        threshold: f64,
        right: u32,
    },
    /// Nonzero `(class, count)` pairs, classes ascending.
    Leaf { class_counts: Vec<(u32, u32)> },
}

/// Decision tree stored as a preorder node list.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

/// Argmax over `(class, count)` pairs; ties go to the lower class.
pub fn leaf_argmax(class_counts: &[(u32, u32)]) -> u32 {
    let mut best = (0u32, 0u32);
    for &(class, count) in class_counts {
        if count > best.1 || (count == best.1 && class < best.0) {
            best = (class, count);
        }
    }
    best.0
}

/// One node of a bare preorder sequence: `Ok((feature, threshold))` for an
/// internal node, `Err(class_counts)` for a leaf.
pub type PreorderItem = Result<(u32, f64), Vec<(u32, u32)>>;

impl Tree {
    pub fn leaf(mut class_counts: Vec<(u32, u32)>) -> Self {
        class_counts.retain(|&(_, c)| c > 0);
        class_counts.sort_unstable_by_key(|&(c, _)| c);
        Tree {
            nodes: vec![Node::Leaf { class_counts }],
        }
    }

    pub fn split(feature: u32, threshold: f64, left: Tree, right: Tree) -> Self {
        let offset = 1 + left.nodes.len() as u32;
        let mut nodes = Vec::with_capacity(1 + left.nodes.len() + right.nodes.len());
        nodes.push(Node::Split {
            feature,
            threshold,
            right: offset,
        });
        let shift = |n: Node, by: u32| match n {
            Node::Split {
                feature,
                threshold,
                right,
            } => Node::Split {
                feature,
                threshold,
                right: right + by,
            },
            leaf => leaf,
        };
        nodes.extend(left.nodes.into_iter().map(|n| shift(n, 1)));
        nodes.extend(right.nodes.into_iter().map(|n| shift(n, offset)));
        Tree { nodes }
    }

    /// Rebuilds right-child links from a bare preorder sequence. Each item
    /// is `Ok((feature, threshold))` for an internal node or `Err(counts)`
    /// for a leaf.
    pub fn from_preorder(items: Vec<PreorderItem>) -> Result<Self, String> {
        if items.is_empty() {
            return Err("tree has no nodes".into());
        }
        let mut nodes = Vec::with_capacity(items.len());
        let mut waiting_right: Vec<usize> = Vec::new();
        for (i, item) in items.into_iter().enumerate() {
            if i > 0 {
                match nodes[i - 1] {
                    Node::Split { .. } => waiting_right.push(i - 1),
                    Node::Leaf { .. } => {
                        let parent = waiting_right
                            .pop()
                            .ok_or_else(|| format!("node {i} lies past the end of the tree"))?;
                        if let Node::Split { right, .. } = &mut nodes[parent] {
                            *right = i as u32;
                        }
                    }
                }
            }
            nodes.push(match item {
                Ok((feature, threshold)) => Node::Split {
                    feature,
                    threshold,
                    right: 0,
                },
                Err(class_counts) => Node::Leaf { class_counts },
            });
        }
        if matches!(nodes.last(), Some(Node::Split { .. })) || !waiting_right.is_empty() {
            return Err("tree ends with unfinished internal nodes".into());
        }
        Ok(Tree { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf_for(&self, x: &FeatureVector) -> &[(u32, u32)] {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    right,
                } => {
                    i = if f64::from(x.get(*feature)) <= *threshold {
                        i + 1
                    } else {
                        *right as usize
                    };
                }
                Node::Leaf { class_counts } => return class_counts,
            }
        }
    }

    pub fn predict(&self, x: &FeatureVector) -> u32 {
        leaf_argmax(self.leaf_for(x))
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        let mut max = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            max = max.max(d);
            if let Node::Split { right, .. } = self.nodes[i] {
                stack.push((i + 1, d + 1));
                stack.push((right as usize, d + 1));
            }
        }
        max
    }

    /// Checks feature indices, thresholds and leaf classes.
    pub fn validate(&self, dimension: usize, n_classes: usize) -> Result<(), String> {
        for (i, n) in self.nodes.iter().enumerate() {
            match n {
                Node::Split {
                    feature,
                    threshold,
                    right,
                } => {
                    if *feature as usize >= dimension {
                        return Err(format!(
                            "node {i}: feature {feature} >= dimension {dimension}"
                        ));
                    }
                    if !threshold.is_finite() {
                        return Err(format!("node {i}: non-finite threshold"));
                    }
                    if *right as usize <= i + 1 || *right as usize >= self.nodes.len() {
                        return Err(format!("node {i}: bad right child {right}"));
                    }
                }
                Node::Leaf { class_counts } => {
                    if class_counts.is_empty() {
                        return Err(format!("node {i}: empty leaf"));
                    }
                    for &(c, n) in class_counts {
                        if c as usize >= n_classes || n == 0 {
                            return Err(format!("node {i}: bad leaf entry ({c}, {n})"));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub features_per_split: usize,
}

/// Grows one CART tree over a sample multiset (repeated indices are extra
/// weight).
pub fn grow_tree<R: Rng>(
    data: &TrainingSet,
    sample_indices: &[usize],
    params: &TreeParams,
    rng: &mut R,
) -> Tree {
    let mut weights = vec![0u32; data.len()];
    for &s in sample_indices {
        weights[s] += 1;
    }
    grow_weighted(data, &weights, params, rng)
}

pub(crate) fn grow_weighted<R: Rng>(
    data: &TrainingSet,
    weights: &[u32],
    params: &TreeParams,
    rng: &mut R,
) -> Tree {
    struct Pending {
        rows: Vec<u32>,
        depth: usize,
        patch: Option<usize>,
    }

    let k = data.n_classes();
    let dim = data.dimension();
    let per_split = params.features_per_split.clamp(1, dim.max(1));
    let mut splitter = Splitter::new(data, weights);
    let mut nodes = Vec::new();
    let mut stack = vec![Pending {
        rows: (0..data.len() as u32)
            .filter(|&r| weights[r as usize] > 0)
            .collect(),
        depth: 0,
        patch: None,
    }];
    let mut counts = vec![0u64; k];

    while let Some(p) = stack.pop() {
        let idx = nodes.len();
        if let Some(parent) = p.patch {
            if let Node::Split { right, .. } = &mut nodes[parent] {
                *right = idx as u32;
            }
        }
        counts.iter_mut().for_each(|c| *c = 0);
        for &r in &p.rows {
            counts[data.label(r) as usize] += u64::from(weights[r as usize]);
        }
        let n: u64 = counts.iter().sum();
        let classes_present = counts.iter().filter(|&&c| c > 0).count();
        let stop = classes_present <= 1
            || n < params.min_samples_split as u64
            || params.max_depth.is_some_and(|d| p.depth >= d)
            || dim == 0;

        let split = if stop {
            None
        } else {
            let mut candidates: Vec<u32> = rand::seq::index::sample(rng, dim, per_split)
                .into_iter()
                .map(|f| f as u32)
                .collect();
            candidates.sort_unstable();
            splitter.find(&p.rows, &counts, &candidates)
        };

        match split {
            None => nodes.push(Node::Leaf {
                class_counts: counts
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(|(c, &n)| (c as u32, n as u32))
                    .collect(),
            }),
            Some(s) => {
                let (left, right) = splitter.partition(&p.rows, &s);
                nodes.push(Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    right: 0,
                });
                stack.push(Pending {
                    rows: right,
                    depth: p.depth + 1,
                    patch: Some(idx),
                });
                stack.push(Pending {
                    rows: left,
                    depth: p.depth + 1,
                    patch: None,
                });
            }
        }
    }
    Tree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::split::gini;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dataset(x: &[&[u32]], y: &[u32], k: usize) -> TrainingSet {
        let rows: Vec<FeatureVector> = x.iter().map(|r| FeatureVector::from_dense(r)).collect();
        TrainingSet::new(&rows, y, k).unwrap()
    }

    fn params(max_depth: Option<usize>, d: usize) -> TreeParams {
        TreeParams {
            max_depth,
            min_samples_split: 2,
            features_per_split: d,
        }
    }

    #[test]
    fn pure_data_is_one_leaf() {
        let d = dataset(&[&[1], &[2], &[3]], &[2, 2, 2], 3);
        let t = grow_tree(
            &d,
            &[0, 1, 2],
            &params(None, 1),
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert_eq!(
            t.nodes(),
            &[Node::Leaf {
                class_counts: vec![(2, 3)]
            }]
        );
    }

    #[test]
    fn four_sample_split() {
        let d = dataset(&[&[0], &[0], &[5], &[5]], &[0, 0, 1, 1], 2);
        let t = grow_tree(
            &d,
            &[0, 1, 2, 3],
            &params(None, 1),
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        let expect = Tree::split(0, 2.5, Tree::leaf(vec![(0, 2)]), Tree::leaf(vec![(1, 2)]));
        assert_eq!(t, expect);
    }

    #[test]
    fn depth_limit_leaves_impure_leaves() {
        // Three classes on one feature need two splits to separate.
        let d = dataset(
            &[&[0], &[0], &[3], &[3], &[6], &[6]],
            &[0, 0, 1, 1, 2, 2],
            3,
        );
        let t = grow_tree(
            &d,
            &[0, 1, 2, 3, 4, 5],
            &params(Some(1), 1),
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        assert_eq!(t.nodes().len(), 3);
        assert_eq!(t.depth(), 1);
        let impure = t
            .nodes()
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { class_counts } => {
                    let counts: Vec<u64> =
                        class_counts.iter().map(|&(_, c)| u64::from(c)).collect();
                    Some(gini(&counts).unwrap())
                }
                _ => None,
            })
            .filter(|&g| g > 0.0)
            .count();
        assert_eq!(impure, 1);
    }

    #[test]
    fn min_samples_split_stops_growth() {
        let d = dataset(&[&[0], &[5]], &[0, 1], 2);
        let p = TreeParams {
            min_samples_split: 3,
            ..params(None, 1)
        };
        let t = grow_tree(&d, &[0, 1], &p, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(t.n_leaves(), 1);
        assert_eq!(t.predict(&FeatureVector::from_dense(&[9])), 0);
    }

    #[test]
    fn leaf_argmax_ties_low() {
        assert_eq!(leaf_argmax(&[(1, 4), (3, 4)]), 1);
        assert_eq!(leaf_argmax(&[(1, 2), (3, 4)]), 3);
    }

    #[test]
    fn preorder_round_trip() {
        let t = Tree::split(
            0,
            0.5,
            Tree::split(1, 1.5, Tree::leaf(vec![(0, 1)]), Tree::leaf(vec![(1, 1)])),
            Tree::leaf(vec![(2, 3)]),
        );
        let items = t
            .nodes()
            .iter()
            .map(|n| match n {
                Node::Split {
                    feature, threshold, ..
                } => Ok((*feature, *threshold)),
                Node::Leaf { class_counts } => Err(class_counts.clone()),
            })
            .collect();
        assert_eq!(Tree::from_preorder(items).unwrap(), t);
        assert!(t.validate(2, 3).is_ok());
        assert!(t.validate(1, 3).is_err());
        assert!(t.validate(2, 2).is_err());
    }

    #[test]
    fn preorder_rejects_malformed() {
        assert!(Tree::from_preorder(vec![]).is_err());
        assert!(Tree::from_preorder(vec![Ok((0, 0.5)), Err(vec![(0, 1)])]).is_err());
        assert!(Tree::from_preorder(vec![Err(vec![(0, 1)]), Err(vec![(0, 1)])]).is_err());
    }
}
