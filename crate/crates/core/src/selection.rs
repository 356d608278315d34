//! Chi2 and mutual-information feature scoring, threshold selection and
//! dataset projection.
//!
//! Both scorers rank every feature, the threshold rule keeps the top
//! percentage (ceiling), and [`apply_mask`] projects a dataset (and its
//! schema) down to the kept columns. Scores are deterministic and features
//! are scored independently, so scoring runs in parallel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Task};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionMethod {
    #[serde(rename = "chi2")]
    Chi2,
    #[serde(rename = "mi")]
    Mi,
}

impl SelectionMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMethod::Chi2 => "chi2",
            SelectionMethod::Mi => "mi",
        }
    }
}

impl std::fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SelectionMethod {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "chi2" => Ok(SelectionMethod::Chi2),
            "mi" => Ok(SelectionMethod::Mi),
            other => Err(format!("unknown selection method {other:?} (chi2|mi)")),
        }
    }
}

pub const DEFAULT_MI_BINS: usize = 10;

fn default_bins() -> usize {
    DEFAULT_MI_BINS
}

/// A selection request: method, top-percent threshold, and bin count for the
/// MI estimator (ignored by chi2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub method: SelectionMethod,
    pub threshold_percent: u32,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

impl SelectionConfig {
    pub fn new(method: SelectionMethod, threshold_percent: u32) -> SelectionConfig {
        SelectionConfig {
            method,
            threshold_percent,
            bins: DEFAULT_MI_BINS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    /// Position of the feature in the schema the ranking was computed on.
    pub ordinal: usize,
    pub id: String,
    pub name: String,
    pub score: f64,
}

/// All features sorted by score descending; ties broken by ascending ordinal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub method: SelectionMethod,
    /// Bin count used by the MI estimator; absent for chi2.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bins: Option<usize>,
    pub schema_fingerprint: String,
    pub entries: Vec<RankEntry>,
}

/// Kept feature ordinals (ascending) plus the provenance of the choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMask {
    pub ordinals: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub method: Option<SelectionMethod>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub threshold_percent: Option<u32>,
    /// Fingerprint of the schema the mask applies to (the unprojected one).
    pub schema_fingerprint: String,
}

impl FeatureMask {
    pub fn from_json(doc: &str) -> Result<FeatureMask> {
        let mask: FeatureMask = serde_json::from_str(doc)?;
        if mask.ordinals.is_empty() {
            return Err(Error::EmptyMask);
        }
        Ok(mask)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("mask serialization cannot fail")
    }
}

/// Equal-frequency discretization. Values are ranked; each run of equal
/// values is one block, and a block starting at sorted position `p` lands in
/// bin `p * bins / n`. Ties therefore never straddle a bin boundary, and at
/// most `bins` distinct bins occur.
pub fn bin_equal_frequency(values: &[f64], bins: usize) -> Vec<usize> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    let bins = bins.max(1);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0usize; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let bin = i * bins / n;
        for &k in &order[i..=j] {
            out[k] = bin;
        }
        i = j + 1;
    }
    out
}

/// Compacts arbitrary label values to indices `0..k` and returns the count of
/// each compact class.
fn compact_labels(labels: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut distinct: Vec<usize> = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let mut compact = Vec::with_capacity(labels.len());
    let mut counts = vec![0usize; distinct.len()];
    for &l in labels {
        let c = distinct.binary_search(&l).expect("label present");
        compact.push(c);
        counts[c] += 1;
    }
    (compact, counts)
}

/// Chi-squared score of one nonnegative feature against the labels:
/// per class, observed is the class sum of the feature and expected is the
/// total scaled by the class share; the score sums `(O-E)^2 / E`. A feature
/// with zero total (or any constant feature) scores exactly 0.
pub fn chi2_statistic(values: &[f64], labels: &[usize]) -> Result<f64> {
    if values.len() != labels.len() {
        return Err(Error::LengthMismatch {
            truths: labels.len(),
            predictions: values.len(),
        });
    }
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if values.iter().any(|&v| v < 0.0) {
        return Err(Error::NegativeFeatureValue {
            feature: "input".to_string(),
        });
    }
    let (compact, class_counts) = compact_labels(labels);
    if class_counts.len() < 2 {
        return Err(Error::TooFewClasses {
            found: class_counts.len(),
        });
    }
    // A constant feature is independent of the labels by construction; return
    // an exact zero rather than accumulated rounding noise.
    if values.iter().all(|&v| v == values[0]) {
        return Ok(0.0);
    }
    let n = values.len() as f64;
    let mut observed = vec![0.0f64; class_counts.len()];
    for (&v, &c) in values.iter().zip(&compact) {
        observed[c] += v;
    }
    let total: f64 = observed.iter().sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let mut score = 0.0;
    for (c, &obs) in observed.iter().enumerate() {
        let expected = total * class_counts[c] as f64 / n;
        let diff = obs - expected;
        score += diff * diff / expected;
    }
    Ok(score)
}

/// Plug-in mutual information (in bits) between a feature, discretized by
/// [`bin_equal_frequency`], and the labels.
pub fn mutual_information(values: &[f64], labels: &[usize], bins: usize) -> Result<f64> {
    if values.len() != labels.len() {
        return Err(Error::LengthMismatch {
            truths: labels.len(),
            predictions: values.len(),
        });
    }
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if bins < 2 {
        return Err(Error::TooFewBins { bins });
    }
    let (compact, class_counts) = compact_labels(labels);
    let n_classes = class_counts.len();
    if n_classes < 2 {
        return Err(Error::TooFewClasses { found: n_classes });
    }
    let assignment = bin_equal_frequency(values, bins);
    let n_bins = assignment.iter().copied().max().unwrap_or(0) + 1;
    let mut joint = vec![0usize; n_bins * n_classes];
    let mut bin_counts = vec![0usize; n_bins];
    for (&b, &c) in assignment.iter().zip(&compact) {
        joint[b * n_classes + c] += 1;
        bin_counts[b] += 1;
    }
    let n = values.len() as f64;
    let mut mi = 0.0;
    for b in 0..n_bins {
        for c in 0..n_classes {
            let count = joint[b * n_classes + c];
            if count == 0 {
                continue;
            }
            let p_xy = count as f64 / n;
            let p_x = bin_counts[b] as f64 / n;
            let p_y = class_counts[c] as f64 / n;
            mi += p_xy * (p_xy / (p_x * p_y)).log2();
        }
    }
    // MI is nonnegative; tiny negative values are floating-point dust.
    Ok(mi.max(0.0))
}

/// Scores every column of a raw matrix and returns `(ordinal, score)` sorted
/// descending by score, ties by ascending ordinal. Columns are scored in
/// parallel; the result is schedule-independent.
pub(crate) fn rank_matrix(
    rows: &[Vec<f64>],
    labels: &[usize],
    method: SelectionMethod,
    bins: usize,
) -> Result<Vec<(usize, f64)>> {
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let width = rows[0].len();
    let scores: Vec<f64> = (0..width)
        .into_par_iter()
        .map(|ord| {
            let column: Vec<f64> = rows.iter().map(|r| r[ord]).collect();
            match method {
                SelectionMethod::Chi2 => chi2_statistic(&column, labels),
                SelectionMethod::Mi => mutual_information(&column, labels, bins),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut ranked: Vec<(usize, f64)> = scores.into_iter().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked)
}

fn rank_dataset(
    dataset: &Dataset,
    task: Task,
    method: SelectionMethod,
    bins: usize,
) -> Result<FeatureRanking> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some((sample, feature)) = dataset.first_non_finite() {
        return Err(Error::NonFiniteValue { sample, feature });
    }
    let labels: Vec<usize> = dataset.samples().iter().map(|s| task.label_of(s)).collect();
    let rows: Vec<Vec<f64>> = dataset.samples().iter().map(|s| s.values.clone()).collect();
    let ranked = rank_matrix(&rows, &labels, method, bins).map_err(|e| match e {
        // Attach the feature name to negativity complaints; the matrix level
        // cannot know it, but every column shares the same check.
        Error::NegativeFeatureValue { .. } => Error::NegativeFeatureValue {
            feature: first_negative_feature(dataset).unwrap_or_else(|| "?".to_string()),
        },
        other => other,
    })?;
    let schema = dataset.schema();
    Ok(FeatureRanking {
        method,
        bins: match method {
            SelectionMethod::Chi2 => None,
            SelectionMethod::Mi => Some(bins),
        },
        schema_fingerprint: schema.fingerprint().to_string(),
        entries: ranked
            .into_iter()
            .map(|(ordinal, score)| RankEntry {
                ordinal,
                id: schema.feature(ordinal).id.clone(),
                name: schema.feature(ordinal).name.clone(),
                score,
            })
            .collect(),
    })
}

fn first_negative_feature(dataset: &Dataset) -> Option<String> {
    for s in dataset.samples() {
        if let Some(j) = s.values.iter().position(|&v| v < 0.0) {
            return Some(dataset.schema().feature(j).name.clone());
        }
    }
    None
}

/// Chi-squared ranking of every feature against the `task` labels.
pub fn score_chi2(dataset: &Dataset, task: Task) -> Result<FeatureRanking> {
    rank_dataset(dataset, task, SelectionMethod::Chi2, DEFAULT_MI_BINS)
}

/// Mutual-information ranking of every feature against the `task` labels.
pub fn score_mi(dataset: &Dataset, task: Task, bins: usize) -> Result<FeatureRanking> {
    rank_dataset(dataset, task, SelectionMethod::Mi, bins)
}

/// Number of features kept at `percent`: `ceil(percent * total / 100)`.
/// For the 141-feature schema this gives 29/57/85/113/141 at 20..100%.
pub fn threshold_count(percent: u32, total: usize) -> Result<usize> {
    if percent == 0 || percent > 100 {
        return Err(Error::InvalidThreshold { percent });
    }
    if total == 0 {
        return Err(Error::EmptyInput);
    }
    Ok((percent as usize * total).div_ceil(100))
}

/// Keeps the first `count` ranking entries.
pub fn select_top(ranking: &FeatureRanking, count: usize) -> Result<FeatureMask> {
    if count == 0 || count > ranking.entries.len() {
        return Err(Error::CountOutOfRange {
            count,
            max: ranking.entries.len(),
        });
    }
    let mut ordinals: Vec<usize> = ranking.entries[..count].iter().map(|e| e.ordinal).collect();
    ordinals.sort_unstable();
    Ok(FeatureMask {
        ordinals,
        method: Some(ranking.method),
        threshold_percent: None,
        schema_fingerprint: ranking.schema_fingerprint.clone(),
    })
}

/// Keeps the top `percent` of the ranking per the ceiling threshold rule.
pub fn select_threshold(ranking: &FeatureRanking, percent: u32) -> Result<FeatureMask> {
    let count = threshold_count(percent, ranking.entries.len())?;
    let mut mask = select_top(ranking, count)?;
    mask.threshold_percent = Some(percent);
    Ok(mask)
}

/// Projects rows down to the masked columns (ascending ordinal order).
pub fn project_rows(rows: &[Vec<f64>], ordinals: &[usize]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| ordinals.iter().map(|&o| r[o]).collect())
        .collect()
}

/// Projects a dataset: samples keep only the masked columns and the schema is
/// replaced by its projection (which records the mask in its fingerprint).
pub fn apply_mask(dataset: &Dataset, mask: &FeatureMask) -> Result<Dataset> {
    if mask.schema_fingerprint != dataset.schema().fingerprint() {
        return Err(Error::FingerprintMismatch {
            expected: dataset.schema().fingerprint().to_string(),
            found: mask.schema_fingerprint.clone(),
        });
    }
    let projected = std::sync::Arc::new(dataset.schema().project(&mask.ordinals)?);
    let samples = dataset
        .samples()
        .iter()
        .map(|s| crate::data::Sample {
            id: s.id.clone(),
            values: mask.ordinals.iter().map(|&o| s.values[o]).collect(),
            category: s.category,
            family: s.family,
        })
        .collect();
    Dataset::new(
        projected,
        std::sync::Arc::clone(dataset.taxonomy()),
        samples,
    )
}

/// Ranking as a CSV table: rank, feature id, feature name, score.
pub fn ranking_to_csv(ranking: &FeatureRanking) -> String {
    let mut out = String::from("Rank,Id,Name,Score\n");
    for (i, e) in ranking.entries.iter().enumerate() {
        use std::fmt::Write;
        let _ = writeln!(out, "{},{},{},{}", i + 1, e.id, e.name, e.score);
    }
    out
}
