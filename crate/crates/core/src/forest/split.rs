//! Gini impurity and the exact CART split search.
//!
//! Candidate splits are compared with exact integer arithmetic. For a split
//! with left/right class counts `l_c`, `r_c` and sizes `L`, `R`, the weighted
//! child impurity is `1 - Q / N` with `Q = Σl_c²/L + Σr_c²/R`, so minimizing
//! impurity means maximizing `Q`, which is compared as a fraction
//! `(Σl_c²·R + Σr_c²·L) / (L·R)` by cross-multiplication in `u128`. Exact
//! comparison makes the `(lower feature, lower threshold)` tie-break well
//! defined.

use crate::error::{Error, Result};
use crate::forest::data::TrainingSet;

/// `1 - Σ (n_c / N)²`.
pub fn gini(class_counts: &[u64]) -> Result<f64> {
    let total: u64 = class_counts.iter().sum();
    if total == 0 {
        return Err(Error::Domain("gini of an empty count map".into()));
    }
    let n = total as f64;
    Ok(1.0
        - class_counts
            .iter()
            .map(|&c| (c as f64 / n).powi(2))
            .sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: u32,
    /// Samples with `value <= threshold` go left.
    pub threshold: f64,
    /// Parent impurity minus weighted child impurity; always positive.
    pub gain: f64,
}

/// Exhaustive split search over a sample multiset given by row indices
/// (repeats count as extra weight).
pub fn best_split(data: &TrainingSet, samples: &[usize], candidates: &[u32]) -> Option<Split> {
    if samples.len() < 2 {
        return None;
    }
    let mut weights = vec![0u32; data.len()];
    for &s in samples {
        weights[s] += 1;
    }
    let rows: Vec<u32> = (0..data.len() as u32)
        .filter(|&r| weights[r as usize] > 0)
        .collect();
    let mut parent = vec![0u64; data.n_classes()];
    for &r in &rows {
        parent[data.label(r) as usize] += u64::from(weights[r as usize]);
    }
    let mut cands = candidates.to_vec();
    cands.sort_unstable();
    cands.dedup();
    Splitter::new(data, &weights).find(&rows, &parent, &cands)
}

fn sum_sq(counts: &[u64]) -> u64 {
    counts.iter().map(|c| c * c).sum()
}

/// Scratch state for split search on one tree. `weights[r]` is the
/// multiplicity of row `r` in the tree's sample (0 = absent).
pub(crate) struct Splitter<'a> {
    data: &'a TrainingSet,
    weights: &'a [u32],
    stamp: Vec<u32>,
    stamp_id: u32,
    /// Nonzero `(value, row)` pairs of the current feature within the node.
    gathered: Vec<(u32, u32)>,
    left: Vec<u64>,
    right: Vec<u64>,
    nonzero: Vec<u64>,
}

impl<'a> Splitter<'a> {
    pub(crate) fn new(data: &'a TrainingSet, weights: &'a [u32]) -> Self {
        let k = data.n_classes();
        Self {
            data,
            weights,
            stamp: vec![0; data.len()],
            stamp_id: 0,
            gathered: Vec::new(),
            left: vec![0; k],
            right: vec![0; k],
            nonzero: vec![0; k],
        }
    }

    fn mark(&mut self, rows: &[u32]) -> u32 {
        self.stamp_id += 1;
        for &r in rows {
            self.stamp[r as usize] = self.stamp_id;
        }
        self.stamp_id
    }

    /// Collects nonzero values of `feature` for the rows stamped `id`. Walks
    /// the column when it is short relative to the node, otherwise does a
    /// binary search per row.
    fn gather(&mut self, rows: &[u32], id: u32, feature: u32) {
        self.gathered.clear();
        let (col_rows, col_vals) = self.data.column(feature);
        if col_rows.len() <= rows.len() * 8 {
            for (&r, &v) in col_rows.iter().zip(col_vals) {
                if self.stamp[r as usize] == id {
                    self.gathered.push((v, r));
                }
            }
        } else {
            for &r in rows {
                let v = self.data.value(r, feature);
                if v > 0 {
                    self.gathered.push((v, r));
                }
            }
        }
    }

    /// Best split of the node made of `rows` (distinct, ascending) whose
    /// weighted class counts are `parent`. `candidates` must be ascending.
    pub(crate) fn find(
        &mut self,
        rows: &[u32],
        parent: &[u64],
        candidates: &[u32],
    ) -> Option<Split> {
        let n: u64 = parent.iter().sum();
        if n < 2 {
            return None;
        }
        let parent_sq = sum_sq(parent);
        let id = self.mark(rows);
        // (numerator, denominator, feature, threshold)
        let mut best: Option<(u128, u128, u32, f64)> = None;

        for &feature in candidates {
            self.gather(rows, id, feature);
            if self.gathered.is_empty() {
                continue;
            }
            self.gathered.sort_unstable();

            self.nonzero.iter_mut().for_each(|c| *c = 0);
            for &(_, r) in &self.gathered {
                self.nonzero[self.data.label(r) as usize] += u64::from(self.weights[r as usize]);
            }
            self.left.iter_mut().for_each(|c| *c = 0);
            self.right.copy_from_slice(parent);
            let mut left_sq = 0u64;
            let mut right_sq = parent_sq;
            let mut n_left = 0u64;
            let mut prev: Option<u32> = None;

            let zero_weight = n - self.nonzero.iter().sum::<u64>();
            if zero_weight > 0 {
                for (c, &p) in parent.iter().enumerate() {
                    let w = p - self.nonzero[c];
                    if w > 0 {
                        left_sq += w * (2 * self.left[c] + w);
                        right_sq -= w * (2 * self.right[c] - w);
                        self.left[c] += w;
                        self.right[c] -= w;
                    }
                }
                n_left = zero_weight;
                prev = Some(0);
            }

            for i in 0..self.gathered.len() {
                let (v, r) = self.gathered[i];
                if let Some(p) = prev {
                    if p != v {
                        let n_right = n - n_left;
                        let num = u128::from(left_sq) * u128::from(n_right)
                            + u128::from(right_sq) * u128::from(n_left);
                        let den = u128::from(n_left) * u128::from(n_right);
                        let better = match best {
                            None => true,
                            Some((bn, bd, _, _)) => num * bd > bn * den,
                        };
                        if better {
                            best = Some((num, den, feature, (f64::from(p) + f64::from(v)) / 2.0));
                        }
                    }
                }
                let c = self.data.label(r) as usize;
                let w = u64::from(self.weights[r as usize]);
                left_sq += w * (2 * self.left[c] + w);
                right_sq -= w * (2 * self.right[c] - w);
                self.left[c] += w;
                self.right[c] -= w;
                n_left += w;
                prev = Some(v);
            }
        }

        let (num, den, feature, threshold) = best?;
        if num * u128::from(n) <= u128::from(parent_sq) * den {
            return None;
        }
        let nf = n as f64;
        let gain = (num as f64 / den as f64) / nf - parent_sq as f64 / (nf * nf);
        Some(Split {
            feature,
            threshold,
            gain,
        })
    }

    /// Splits `rows` into `(left, right)`, both ascending.
    pub(crate) fn partition(&mut self, rows: &[u32], split: &Split) -> (Vec<u32>, Vec<u32>) {
        let id = self.mark(rows);
        self.gather(rows, id, split.feature);
        let mut right: Vec<u32> = self
            .gathered
            .iter()
            .filter(|&&(v, _)| f64::from(v) > split.threshold)
            .map(|&(_, r)| r)
            .collect();
        right.sort_unstable();
        let right_id = self.mark(&right);
        let left = rows
            .iter()
            .copied()
            .filter(|&r| self.stamp[r as usize] != right_id)
            .collect();
        (left, right)
    }
}
