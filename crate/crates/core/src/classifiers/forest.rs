//! Random forest: bagged Gini trees with per-node feature subsampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{argmax_u32, grow_tree, GrowConfig, SplitCriterion, TreeModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub n_features: usize,
    pub trees: Vec<TreeModel>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct ForestParams {
    pub trees: usize,
    pub max_depth: Option<u32>,
    pub min_samples_split: usize,
    pub bootstrap: bool,
    /// `None` means the usual floor(sqrt(d)) default.
    pub features_per_split: Option<usize>,
}

/// Trains the forest. Tree `t` owns an RNG seeded with `base_seed + t`, from
/// which it draws its bootstrap sample and then its per-node feature subsets,
/// so the assembled forest is identical however the trees are scheduled.
pub(crate) fn fit_forest(
    x: &[&[f64]],
    y: &[u32],
    n_classes: usize,
    params: &ForestParams,
    base_seed: u64,
) -> ForestModel {
    let n = y.len();
    let d = x.first().map_or(0, |r| r.len());
    let m = match params.features_per_split {
        Some(m) => m.min(d).max(1),
        None => ((d as f64).sqrt().floor() as usize).clamp(1, d.max(1)),
    };
    let config = GrowConfig {
        criterion: SplitCriterion::GiniDecrease,
        max_depth: params.max_depth,
        min_samples_split: params.min_samples_split,
        features_per_split: if m < d { Some(m) } else { None },
    };
    let trees: Vec<TreeModel> = (0..params.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(t as u64));
            let indices: Vec<u32> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n) as u32).collect()
            } else {
                (0..n as u32).collect()
            };
            grow_tree(x, y, n_classes, &config, indices, Some(&mut rng))
        })
        .collect();
    ForestModel {
        n_features: d,
        trees,
    }
}

impl ForestModel {
    /// Majority vote over the trees; vote ties resolve to the earliest class.
    pub fn predict_one(&self, row: &[f64], n_classes: usize) -> u32 {
        let mut votes = vec![0u32; n_classes];
        for tree in &self.trees {
            votes[tree.predict_one(row) as usize] += 1;
        }
        argmax_u32(&votes)
    }
}
