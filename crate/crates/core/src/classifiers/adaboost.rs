//! SAMME AdaBoost over depth-1 decision stumps.

use serde::{Deserialize, Serialize};

use super::tree::{argmax_f64, argmax_u32};

/// A weighted weak learner: `x[feature] < threshold` predicts `left`,
/// otherwise `right` (class indices into the model's class list).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostedStump {
    pub feature: u32,
    pub threshold: f64,
    pub left: u32,
    pub right: u32,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbModel {
    pub n_features: usize,
    pub stumps: Vec<BoostedStump>,
    /// Majority training class; answers when no stump survived boosting.
    pub fallback: u32,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct AbParams {
    pub rounds: usize,
    pub learning_rate: f64,
}

/// Per-round training diagnostics, kept for the boosting invariants tests.
#[derive(Debug, Clone, Copy)]
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) struct RoundInfo {
    pub error: f64,
    pub alpha: f64,
    pub weight_sum: f64,
}

struct StumpFit {
    feature: usize,
    threshold: f64,
    left: u32,
    right: u32,
    error: f64,
}

/// Minimum-weighted-error stump over all (feature, midpoint threshold)
/// candidates; each side predicts its weighted-majority class. Scan order is
/// ascending feature then ascending threshold, and only a strictly smaller
/// error replaces the incumbent, so ties resolve to the smallest feature
/// ordinal then the smallest threshold. `None` when every feature is
/// constant.
fn fit_stump(x: &[&[f64]], y: &[u32], n_classes: usize, weights: &[f64]) -> Option<StumpFit> {
    let n = x.len();
    let d = x.first().map_or(0, |r| r.len());
    let mut total = vec![0.0f64; n_classes];
    for (&label, &w) in y.iter().zip(weights) {
        total[label as usize] += w;
    }
    let total_sum: f64 = total.iter().sum();
    let mut best: Option<StumpFit> = None;
    let mut order: Vec<usize> = (0..n).collect();
    for f in 0..d {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
        let mut left = vec![0.0f64; n_classes];
        let mut left_sum = 0.0f64;
        for pos in 0..n - 1 {
            let i = order[pos];
            left[y[i] as usize] += weights[i];
            left_sum += weights[i];
            let lo = x[i][f];
            let hi = x[order[pos + 1]][f];
            if lo == hi {
                continue;
            }
            let mut threshold = lo + (hi - lo) / 2.0;
            if threshold <= lo {
                threshold = hi;
            }
            let (mut l_cls, mut r_cls) = (0usize, 0usize);
            let mut l_best = f64::NEG_INFINITY;
            let mut r_best = f64::NEG_INFINITY;
            for c in 0..n_classes {
                if left[c] > l_best {
                    l_best = left[c];
                    l_cls = c;
                }
                let right = total[c] - left[c];
                if right > r_best {
                    r_best = right;
                    r_cls = c;
                }
            }
            let error = (left_sum - l_best) + ((total_sum - left_sum) - r_best);
            if best.as_ref().is_none_or(|b| error < b.error) {
                best = Some(StumpFit {
                    feature: f,
                    threshold,
                    left: l_cls as u32,
                    right: r_cls as u32,
                    error,
                });
            }
        }
    }
    best
}

#[inline]
fn stump_predict(s: &BoostedStump, row: &[f64]) -> u32 {
    if row[s.feature as usize] < s.threshold {
        s.left
    } else {
        s.right
    }
}

pub(crate) fn fit_ab_traced(
    x: &[&[f64]],
    y: &[u32],
    n_classes: usize,
    params: &AbParams,
) -> (AbModel, Vec<RoundInfo>) {
    let n = x.len();
    let d = x.first().map_or(0, |r| r.len());
    let mut class_counts = vec![0u32; n_classes];
    for &label in y {
        class_counts[label as usize] += 1;
    }
    let fallback = argmax_u32(&class_counts);
    let mut model = AbModel {
        n_features: d,
        stumps: Vec::new(),
        fallback,
    };
    let mut trace = Vec::new();
    if n_classes < 2 {
        return (model, trace);
    }
    let c = n_classes as f64;
    let mut weights = vec![1.0 / n as f64; n];
    for _ in 0..params.rounds {
        let Some(fit) = fit_stump(x, y, n_classes, &weights) else {
            break;
        };
        // A stump no better than chance-level contributes nothing (or worse):
        // SAMME rejects error >= 1 - 1/C, and the selected-stump contract
        // additionally caps error at 1/2 for any class count.
        if fit.error >= 1.0 - 1.0 / c || fit.error > 0.5 {
            break;
        }
        let clamped = fit.error.max(1e-10);
        let alpha = params.learning_rate * (((1.0 - clamped) / clamped).ln() + (c - 1.0).ln());
        let stump = BoostedStump {
            feature: fit.feature as u32,
            threshold: fit.threshold,
            left: fit.left,
            right: fit.right,
            alpha,
        };
        model.stumps.push(stump);
        if fit.error <= 0.0 {
            trace.push(RoundInfo {
                error: fit.error,
                alpha,
                weight_sum: weights.iter().sum(),
            });
            break;
        }
        let boost = alpha.exp();
        let mut sum = 0.0;
        for (i, w) in weights.iter_mut().enumerate() {
            if stump_predict(&stump, x[i]) != y[i] {
                *w *= boost;
            }
            sum += *w;
        }
        for w in weights.iter_mut() {
            *w /= sum;
        }
        trace.push(RoundInfo {
            error: fit.error,
            alpha,
            weight_sum: weights.iter().sum(),
        });
    }
    (model, trace)
}

pub(crate) fn fit_ab(x: &[&[f64]], y: &[u32], n_classes: usize, params: &AbParams) -> AbModel {
    fit_ab_traced(x, y, n_classes, params).0
}

impl AbModel {
    /// Alpha-weighted vote of the stumps; ties prefer the earliest class.
    pub fn predict_one(&self, row: &[f64], n_classes: usize) -> u32 {
        if self.stumps.is_empty() {
            return self.fallback;
        }
        let mut scores = vec![0.0f64; n_classes];
        for s in &self.stumps {
            scores[stump_predict(s, row) as usize] += s.alpha;
        }
        argmax_f64(&scores)
    }
}
