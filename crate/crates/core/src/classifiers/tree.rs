//! Decision-tree internals shared by the single tree (gain ratio, C4.5
//! style), the random forest (Gini) and indirectly the boosting stumps.
//!
//! Trees are grown iteratively with an explicit work stack (no recursion, so
//! memorizing deep trees cannot overflow the call stack) and stored as flat
//! node arrays for cheap serialization and traversal.

use rand::seq::index::sample as index_sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Impurity measure of a class-count vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Impurity {
    EntropyBits,
    Gini,
}

/// Shannon entropy in bits (`0 log 0 := 0`) or Gini impurity of the
/// distribution given by `counts`. All-zero counts have no distribution.
pub fn impurity(counts: &[f64], kind: Impurity) -> Result<f64> {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return Err(Error::EmptyInput);
    }
    match kind {
        Impurity::EntropyBits => {
            let mut h = 0.0;
            for &c in counts {
                if c > 0.0 {
                    let p = c / total;
                    h -= p * p.log2();
                }
            }
            Ok(h)
        }
        Impurity::Gini => {
            let mut sum_sq = 0.0;
            for &c in counts {
                let p = c / total;
                sum_sq += p * p;
            }
            Ok(1.0 - sum_sq)
        }
    }
}

/// Split quality measure: C4.5 gain ratio or CART Gini decrease.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitCriterion {
    GainRatio,
    GiniDecrease,
}

/// A candidate binary split: `x[feature] < threshold` goes left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub criterion_value: f64,
}

/// Improvements at or below this are treated as "no gain": a split must beat
/// floating-point dust to be worth taking (and a pure node never splits).
const MIN_IMPROVEMENT: f64 = 1e-12;

/// Midpoint between two consecutive distinct values, nudged up to `hi` when
/// the values are so close that their midpoint rounds onto `lo` (the split
/// predicate is strict `<`, so `hi` still separates the two).
#[inline]
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid > lo {
        mid
    } else {
        hi
    }
}

/// Finds the best threshold for one feature over `(value, label)` pairs, or
/// `None` when no candidate improves the criterion (constant feature, pure
/// labels, fewer than two samples). Ties prefer the smaller threshold.
pub fn best_split(
    feature: usize,
    values: &[f64],
    labels: &[u32],
    n_classes: usize,
    criterion: SplitCriterion,
) -> Option<SplitCandidate> {
    let n = values.len();
    if n < 2 || labels.len() != n {
        return None;
    }
    let mut pairs: Vec<(f64, u32)> = values.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut total_counts = vec![0.0f64; n_classes];
    for &(_, l) in &pairs {
        total_counts[l as usize] += 1.0;
    }
    let imp_kind = match criterion {
        SplitCriterion::GainRatio => Impurity::EntropyBits,
        SplitCriterion::GiniDecrease => Impurity::Gini,
    };
    let parent = impurity(&total_counts, imp_kind).ok()?;

    let nf = n as f64;
    let mut left_counts = vec![0.0f64; n_classes];
    let mut best: Option<SplitCandidate> = None;
    for i in 0..n - 1 {
        left_counts[pairs[i].1 as usize] += 1.0;
        if pairs[i].0 == pairs[i + 1].0 {
            continue; // not a boundary between distinct values
        }
        let nl = (i + 1) as f64;
        let nr = nf - nl;
        let right_counts: Vec<f64> = total_counts
            .iter()
            .zip(&left_counts)
            .map(|(&t, &l)| t - l)
            .collect();
        let il = impurity(&left_counts, imp_kind).expect("left side non-empty");
        let ir = impurity(&right_counts, imp_kind).expect("right side non-empty");
        let gain = parent - (nl * il + nr * ir) / nf;
        if gain <= MIN_IMPROVEMENT {
            continue;
        }
        let value = match criterion {
            SplitCriterion::GainRatio => {
                let split_info = impurity(&[nl, nr], Impurity::EntropyBits)
                    .expect("both sides non-empty");
                gain / split_info
            }
            SplitCriterion::GiniDecrease => gain,
        };
        // Strict > keeps the first (smallest) threshold on ties.
        if best.map_or(true, |b| value > b.criterion_value) {
            best = Some(SplitCandidate {
                feature,
                threshold: midpoint(pairs[i].0, pairs[i + 1].0),
                criterion_value: value,
            });
        }
    }
    best
}

/// One node of a flat tree array. Children are indices into the array; the
/// root is node 0. `x[feature] < threshold` descends left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        /// Training class counts at this leaf (indices into the model's
        /// class list); prediction is the argmax, earliest class on ties.
        dist: Vec<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub n_features: usize,
    pub nodes: Vec<TreeNode>,
}

impl TreeModel {
    pub fn predict_one(&self, row: &[f64]) -> u32 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature as usize] < *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
                TreeNode::Leaf { dist } => return argmax_u32(dist),
            }
        }
    }

    pub fn depth(&self) -> usize {
        // Iterative depth over the flat array.
        let mut depths = vec![0usize; self.nodes.len()];
        let mut max = 0;
        for (i, node) in self.nodes.iter().enumerate() {
            if let TreeNode::Split { left, right, .. } = node {
                depths[*left as usize] = depths[i] + 1;
                depths[*right as usize] = depths[i] + 1;
                max = max.max(depths[i] + 1);
            }
        }
        max
    }
}

pub(crate) fn argmax_u32(counts: &[u32]) -> u32 {
    let mut best = 0usize;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best as u32
}

pub(crate) fn argmax_f64(scores: &[f64]) -> u32 {
    let mut best = 0usize;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best as u32
}

/// Tree-growing knobs. `max_depth: None` means unlimited; `min_samples_split`
/// is the smallest node that may still be split; `features_per_split: None`
/// considers every feature, `Some(m)` draws `m` without replacement per node
/// (requires an RNG).
#[derive(Debug, Clone)]
pub struct GrowConfig {
    pub criterion: SplitCriterion,
    pub max_depth: Option<u32>,
    pub min_samples_split: usize,
    pub features_per_split: Option<usize>,
}

struct WorkItem {
    slot: usize,
    indices: Vec<u32>,
    depth: u32,
}

/// Grows a tree on the rows selected by `indices` (duplicates allowed, e.g.
/// bootstrap samples). Deterministic given the RNG state; candidate features
/// are always evaluated in ascending ordinal order so ties resolve to the
/// smallest feature ordinal, then the smallest threshold.
pub fn grow_tree(
    x: &[&[f64]],
    y: &[u32],
    n_classes: usize,
    config: &GrowConfig,
    indices: Vec<u32>,
    mut rng: Option<&mut ChaCha8Rng>,
) -> TreeModel {
    let n_features = x.first().map_or(0, |r| r.len());
    let mut nodes: Vec<TreeNode> = vec![TreeNode::Leaf { dist: Vec::new() }];
    let mut stack = vec![WorkItem {
        slot: 0,
        indices,
        depth: 0,
    }];
    while let Some(item) = stack.pop() {
        let mut counts = vec![0u32; n_classes];
        for &i in &item.indices {
            counts[y[i as usize] as usize] += 1;
        }
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = config.max_depth.is_some_and(|d| item.depth >= d);
        if pure || depth_capped || item.indices.len() < config.min_samples_split {
            nodes[item.slot] = TreeNode::Leaf { dist: counts };
            continue;
        }

        let candidates: Vec<usize> = match (config.features_per_split, rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < n_features => {
                let mut picked: Vec<usize> =
                    index_sample(rng, n_features, m).into_iter().collect();
                picked.sort_unstable();
                picked
            }
            _ => (0..n_features).collect(),
        };

        let labels: Vec<u32> = item.indices.iter().map(|&i| y[i as usize]).collect();
        let mut best: Option<SplitCandidate> = None;
        for &f in &candidates {
            let column: Vec<f64> = item.indices.iter().map(|&i| x[i as usize][f]).collect();
            if let Some(cand) = best_split(f, &column, &labels, n_classes, config.criterion) {
                // Features are scanned in ascending order, so strict > keeps
                // the smallest feature ordinal on criterion ties.
                if best.map_or(true, |b| cand.criterion_value > b.criterion_value) {
                    best = Some(cand);
                }
            }
        }
        let Some(split) = best else {
            nodes[item.slot] = TreeNode::Leaf { dist: counts };
            continue;
        };

        let mut left_idx = Vec::new();
        let mut right_idx = Vec::new();
        for &i in &item.indices {
            if x[i as usize][split.feature] < split.threshold {
                left_idx.push(i);
            } else {
                right_idx.push(i);
            }
        }
        if left_idx.is_empty() || right_idx.is_empty() {
            // Cannot happen for a threshold strictly between observed values,
            // but a leaf is a safe answer if numeric edge cases conspire.
            nodes[item.slot] = TreeNode::Leaf { dist: counts };
            continue;
        }
        let left_slot = nodes.len();
        nodes.push(TreeNode::Leaf { dist: Vec::new() });
        let right_slot = nodes.len();
        nodes.push(TreeNode::Leaf { dist: Vec::new() });
        nodes[item.slot] = TreeNode::Split {
            feature: split.feature as u32,
            threshold: split.threshold,
            left: left_slot as u32,
            right: right_slot as u32,
        };
        stack.push(WorkItem {
            slot: right_slot,
            indices: right_idx,
            depth: item.depth + 1,
        });
        stack.push(WorkItem {
            slot: left_slot,
            indices: left_idx,
            depth: item.depth + 1,
        });
    }
    TreeModel { n_features, nodes }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_and_gini_basics() {
        assert_eq!(impurity(&[4.0, 4.0], Impurity::EntropyBits).unwrap(), 1.0);
        assert_eq!(impurity(&[8.0, 0.0], Impurity::EntropyBits).unwrap(), 0.0);
        assert_eq!(impurity(&[5.0, 5.0], Impurity::Gini).unwrap(), 0.5);
        assert!(matches!(
            impurity(&[0.0, 0.0], Impurity::EntropyBits),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn entropy_of_uniform_k_classes_is_log2_k() {
        let h = impurity(&[2.0, 2.0, 2.0, 2.0], Impurity::EntropyBits).unwrap();
        assert!((h - 2.0).abs() < 1e-12);
    }

    #[test]
    fn best_split_perfect_separation() {
        let cand = best_split(
            0,
            &[1.0, 2.0, 10.0, 11.0],
            &[0, 0, 1, 1],
            2,
            SplitCriterion::GainRatio,
        )
        .unwrap();
        assert_eq!(cand.threshold, 6.0);
        assert!((cand.criterion_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn best_split_none_cases() {
        // Constant feature: no candidate thresholds.
        assert!(best_split(0, &[3.0; 4], &[0, 0, 1, 1], 2, SplitCriterion::GainRatio).is_none());
        // Pure labels: zero gain everywhere.
        assert!(best_split(
            0,
            &[1.0, 2.0, 3.0],
            &[1, 1, 1],
            2,
            SplitCriterion::GainRatio
        )
        .is_none());
        // Fewer than two samples.
        assert!(best_split(0, &[1.0], &[0], 2, SplitCriterion::GainRatio).is_none());
    }

    #[test]
    fn best_split_tie_prefers_smaller_threshold() {
        // Symmetric data: boundaries at 1.5 and 2.5 give the same criterion.
        let cand = best_split(
            0,
            &[1.0, 2.0, 3.0],
            &[0, 1, 0],
            2,
            SplitCriterion::GiniDecrease,
        )
        .unwrap();
        assert_eq!(cand.threshold, 1.5);
    }

    #[test]
    fn midpoint_of_adjacent_floats_stays_separating() {
        let lo = 1.0f64;
        let hi = lo.next_up();
        let th = midpoint(lo, hi);
        assert!(lo < th && th <= hi);
    }

    fn rows(data: &[&[f64]]) -> Vec<Vec<f64>> {
        data.iter().map(|r| r.to_vec()).collect()
    }

    #[test]
    fn grow_tree_memorizes_conflict_free_data() {
        let data = rows(&[
            &[0.1, 5.0],
            &[0.9, 4.0],
            &[0.4, 1.0],
            &[0.7, 9.0],
            &[0.2, 7.0],
            &[0.6, 3.0],
        ]);
        let x: Vec<&[f64]> = data.iter().map(|r| r.as_slice()).collect();
        let y = vec![0, 1, 0, 2, 1, 2];
        let cfg = GrowConfig {
            criterion: SplitCriterion::GainRatio,
            max_depth: None,
            min_samples_split: 2,
            features_per_split: None,
        };
        let tree = grow_tree(&x, &y, 3, &cfg, (0..6).collect(), None);
        for (row, &label) in x.iter().zip(&y) {
            assert_eq!(tree.predict_one(row), label);
        }
    }

    #[test]
    fn grow_tree_depth_limit_is_respected() {
        let data = rows(&[&[1.0], &[2.0], &[3.0], &[4.0], &[5.0], &[6.0], &[7.0], &[8.0]]);
        let x: Vec<&[f64]> = data.iter().map(|r| r.as_slice()).collect();
        let y = vec![0, 1, 0, 1, 0, 1, 0, 1];
        let cfg = GrowConfig {
            criterion: SplitCriterion::GainRatio,
            max_depth: Some(2),
            min_samples_split: 2,
            features_per_split: None,
        };
        let tree = grow_tree(&x, &y, 2, &cfg, (0..8).collect(), None);
        assert!(tree.depth() <= 2, "depth {}", tree.depth());
    }

    #[test]
    fn single_sample_or_pure_node_becomes_leaf() {
        let data = rows(&[&[1.0], &[2.0]]);
        let x: Vec<&[f64]> = data.iter().map(|r| r.as_slice()).collect();
        let tree = grow_tree(
            &x,
            &[1, 1],
            2,
            &GrowConfig {
                criterion: SplitCriterion::GainRatio,
                max_depth: None,
                min_samples_split: 2,
                features_per_split: None,
            },
            vec![0, 1],
            None,
        );
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.predict_one(&[17.0]), 1);
    }

    #[test]
    fn leaf_tie_prefers_earliest_class() {
        assert_eq!(argmax_u32(&[3, 3, 1]), 0);
        assert_eq!(argmax_u32(&[1, 3, 3]), 1);
        assert_eq!(argmax_f64(&[0.5, 0.5]), 0);
    }

    #[test]
    fn tree_serialization_round_trip() {
        let data = rows(&[&[0.1], &[0.9], &[0.5], &[0.3]]);
        let x: Vec<&[f64]> = data.iter().map(|r| r.as_slice()).collect();
        let y = vec![0, 1, 1, 0];
        let tree = grow_tree(
            &x,
            &y,
            2,
            &GrowConfig {
                criterion: SplitCriterion::GiniDecrease,
                max_depth: None,
                min_samples_split: 2,
                features_per_split: None,
            },
            (0..4).collect(),
            None,
        );
        let json = serde_json::to_string(&tree).unwrap();
        let back: TreeModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, tree);
    }
}
