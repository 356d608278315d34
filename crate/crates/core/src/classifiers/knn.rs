//! K-nearest neighbors with Euclidean distance and unweighted voting.

use serde::{Deserialize, Serialize};

use super::tree::argmax_u32;

/// The "model" is the training data itself plus `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub n_features: usize,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<u32>,
}

impl KnnModel {
    /// Votes among the `k` nearest training points (all of them when the
    /// training set is smaller than `k`). Distance ties prefer the smaller
    /// training index; vote ties prefer the earliest class.
    pub fn predict_one(&self, row: &[f64], n_classes: usize) -> u32 {
        let mut dists: Vec<(f64, u32)> = self
            .x
            .iter()
            .enumerate()
            .map(|(i, train)| {
                let d2: f64 = train
                    .iter()
                    .zip(row)
                    .map(|(a, b)| {
                        let diff = a - b;
                        diff * diff
                    })
                    .sum();
                (d2, i as u32)
            })
            .collect();
        let k = self.k.min(dists.len());
        let cmp = |a: &(f64, u32), b: &(f64, u32)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dists.len() {
            dists.select_nth_unstable_by(k - 1, cmp);
        }
        let mut votes = vec![0u32; n_classes];
        for &(_, idx) in &dists[..k] {
            votes[self.y[idx as usize] as usize] += 1;
        }
        argmax_u32(&votes)
    }
}
