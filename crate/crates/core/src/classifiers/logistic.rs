//! Multinomial (softmax) logistic regression trained by full-batch gradient
//! descent with L2 regularization on the non-bias weights.

use serde::{Deserialize, Serialize};

use super::tree::argmax_f64;

/// Weights are a flat row-major `n_classes x (n_features + 1)` matrix; the
/// last column of each row is the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrModel {
    pub n_features: usize,
    pub n_classes: usize,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LrParams {
    pub l2: f64,
    pub learning_rate: f64,
    pub max_iters: usize,
    pub tol: f64,
}

#[inline]
fn logits(weights: &[f64], n_classes: usize, stride: usize, row: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0f64; n_classes];
    for (c, zc) in z.iter_mut().enumerate() {
        let w = &weights[c * stride..(c + 1) * stride];
        let mut acc = w[stride - 1]; // bias
        for (j, &v) in row.iter().enumerate() {
            acc += w[j] * v;
        }
        *zc = acc;
    }
    z
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Mean cross-entropy plus the L2 penalty `l2/2 * sum(w^2)` over non-bias
/// weights. Exposed for the finite-difference gradient check.
pub fn lr_loss(x: &[&[f64]], y: &[u32], n_classes: usize, weights: &[f64], l2: f64) -> f64 {
    let n = x.len();
    let stride = x.first().map_or(0, |r| r.len()) + 1;
    let mut loss = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let mut p = logits(weights, n_classes, stride, row);
        softmax_in_place(&mut p);
        // Clamp away from zero: on wildly separable data probabilities can
        // underflow and ln(0) would poison the diagnostic value.
        loss -= p[label as usize].max(1e-300).ln();
    }
    loss /= n as f64;
    let mut penalty = 0.0;
    for c in 0..n_classes {
        for j in 0..stride - 1 {
            let w = weights[c * stride + j];
            penalty += w * w;
        }
    }
    loss + 0.5 * l2 * penalty
}

/// Analytic gradient of [`lr_loss`] with respect to every weight.
pub fn lr_gradient(x: &[&[f64]], y: &[u32], n_classes: usize, weights: &[f64], l2: f64) -> Vec<f64> {
    let n = x.len();
    let stride = x.first().map_or(0, |r| r.len()) + 1;
    let mut grad = vec![0.0f64; weights.len()];
    for (row, &label) in x.iter().zip(y) {
        let mut p = logits(weights, n_classes, stride, row);
        softmax_in_place(&mut p);
        for c in 0..n_classes {
            let mut residual = p[c];
            if c == label as usize {
                residual -= 1.0;
            }
            let g = &mut grad[c * stride..(c + 1) * stride];
            for (j, &v) in row.iter().enumerate() {
                g[j] += residual * v;
            }
            g[stride - 1] += residual;
        }
    }
    for v in grad.iter_mut() {
        *v /= n as f64;
    }
    for c in 0..n_classes {
        for j in 0..stride - 1 {
            grad[c * stride + j] += l2 * weights[c * stride + j];
        }
    }
    grad
}

/// Gradient descent from zero-initialized weights; stops early once the
/// largest single weight update falls below `tol`.
pub(crate) fn fit_lr(x: &[&[f64]], y: &[u32], n_classes: usize, params: &LrParams) -> LrModel {
    let d = x.first().map_or(0, |r| r.len());
    let stride = d + 1;
    let mut weights = vec![0.0f64; n_classes * stride];
    for _ in 0..params.max_iters {
        let grad = lr_gradient(x, y, n_classes, &weights, params.l2);
        let mut max_step = 0.0f64;
        for (w, g) in weights.iter_mut().zip(&grad) {
            let step = params.learning_rate * g;
            *w -= step;
            max_step = max_step.max(step.abs());
        }
        if max_step < params.tol {
            break;
        }
    }
    LrModel {
        n_features: d,
        n_classes,
        weights,
    }
}

impl LrModel {
    pub fn predict_one(&self, row: &[f64]) -> u32 {
        let z = logits(&self.weights, self.n_classes, self.n_features + 1, row);
        argmax_f64(&z)
    }
}
