//! Gaussian naive Bayes with variance smoothing.

use serde::{Deserialize, Serialize};

use super::tree::argmax_f64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbModel {
    pub n_features: usize,
    /// Class priors (relative frequencies), one per class.
    pub priors: Vec<f64>,
    /// Per-class, per-feature means.
    pub means: Vec<Vec<f64>>,
    /// Per-class, per-feature variances, already smoothed (strictly > 0).
    pub variances: Vec<Vec<f64>>,
}

/// Fits per-class Gaussians. Population variances get a smoothing floor of
/// `var_smoothing` times the largest per-feature variance of the whole
/// training set; when every feature is constant that product is zero, and the
/// raw `var_smoothing` value itself is used so variances stay positive.
pub(crate) fn fit_nb(x: &[&[f64]], y: &[u32], n_classes: usize, var_smoothing: f64) -> NbModel {
    let n = x.len();
    let d = x.first().map_or(0, |r| r.len());

    // Global per-feature variance, for the smoothing scale.
    let mut global_mean = vec![0.0f64; d];
    for row in x {
        for (j, &v) in row.iter().enumerate() {
            global_mean[j] += v;
        }
    }
    for m in &mut global_mean {
        *m /= n as f64;
    }
    let mut max_var = 0.0f64;
    for j in 0..d {
        let var: f64 = x
            .iter()
            .map(|row| {
                let diff = row[j] - global_mean[j];
                diff * diff
            })
            .sum::<f64>()
            / n as f64;
        if var > max_var {
            max_var = var;
        }
    }
    let mut epsilon = var_smoothing * max_var;
    if epsilon <= 0.0 {
        epsilon = var_smoothing;
    }

    let mut counts = vec![0usize; n_classes];
    let mut means = vec![vec![0.0f64; d]; n_classes];
    for (row, &label) in x.iter().zip(y) {
        counts[label as usize] += 1;
        for (j, &v) in row.iter().enumerate() {
            means[label as usize][j] += v;
        }
    }
    for (c, mean) in means.iter_mut().enumerate() {
        for m in mean.iter_mut() {
            *m /= counts[c] as f64;
        }
    }
    let mut variances = vec![vec![0.0f64; d]; n_classes];
    for (row, &label) in x.iter().zip(y) {
        let c = label as usize;
        for (j, &v) in row.iter().enumerate() {
            let diff = v - means[c][j];
            variances[c][j] += diff * diff;
        }
    }
    for (c, var) in variances.iter_mut().enumerate() {
        for v in var.iter_mut() {
            *v = *v / counts[c] as f64 + epsilon;
        }
    }
    NbModel {
        n_features: d,
        priors: counts.iter().map(|&c| c as f64 / n as f64).collect(),
        means,
        variances,
    }
}

impl NbModel {
    /// Maximum log-posterior class; ties prefer the earliest class.
    pub fn predict_one(&self, row: &[f64]) -> u32 {
        const LN_2PI: f64 = 1.837877066409345;
        let scores: Vec<f64> = self
            .priors
            .iter()
            .enumerate()
            .map(|(c, &prior)| {
                let mut score = prior.ln();
                for (j, &v) in row.iter().enumerate() {
                    let var = self.variances[c][j];
                    let diff = v - self.means[c][j];
                    score -= 0.5 * ((LN_2PI + var.ln()) + diff * diff / var);
                }
                score
            })
            .collect();
        argmax_f64(&scores)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(data: &[&[f64]]) -> Vec<Vec<f64>> {
        data.iter().map(|r| r.to_vec()).collect()
    }

    #[test]
    fn well_separated_gaussians_classify_between_means() {
        // Class 0 around 0.05, class 1 around 1.05, equal priors.
        let data = rows(&[&[0.0], &[0.1], &[1.0], &[1.1]]);
        let x: Vec<&[f64]> = data.iter().map(|r| r.as_slice()).collect();
        let model = fit_nb(&x, &[0, 0, 1, 1], 2, 1e-9);
        assert_eq!(model.predict_one(&[0.05]), 0);
        assert_eq!(model.predict_one(&[1.05]), 1);
    }

    #[test]
    fn fitted_parameters_are_population_statistics() {
        let data = rows(&[&[1.0], &[3.0], &[10.0], &[10.0]]);
        let x: Vec<&[f64]> = data.iter().map(|r| r.as_slice()).collect();
        let model = fit_nb(&x, &[0, 0, 1, 1], 2, 1e-9);
        assert_eq!(model.means[0][0], 2.0);
        assert_eq!(model.means[1][0], 10.0);
        // Population variance of {1,3} is 1; class 1 is constant so only the
        // smoothing epsilon remains.
        let eps = model.variances[1][0];
        assert!(eps > 0.0 && eps < 1e-6);
        assert!((model.variances[0][0] - 1.0 - eps).abs() < 1e-12);
        assert_eq!(model.priors, vec![0.5, 0.5]);
    }

    #[test]
    fn variances_stay_positive_even_on_constant_data() {
        let data = rows(&[&[2.0, 2.0], &[2.0, 2.0], &[2.0, 2.0]]);
        let x: Vec<&[f64]> = data.iter().map(|r| r.as_slice()).collect();
        let model = fit_nb(&x, &[0, 0, 1], 2, 1e-9);
        for var in &model.variances {
            assert!(var.iter().all(|&v| v > 0.0));
        }
        // Degenerate but defined: prediction falls back to the prior.
        assert_eq!(model.predict_one(&[2.0, 2.0]), 0);
    }

    #[test]
    fn unbalanced_priors_break_likelihood_ties() {
        let data = rows(&[&[0.0], &[2.0], &[2.0], &[4.0]]);
        let x: Vec<&[f64]> = data.iter().map(|r| r.as_slice()).collect();
        // Class 1 has mean 2 from both sides; class 0 mean 2 as well but
        // bigger spread. A query at the shared mean goes to the tighter class.
        let model = fit_nb(&x, &[0, 1, 1, 0], 2, 1e-9);
        assert_eq!(model.predict_one(&[2.0]), 1);
    }
}
