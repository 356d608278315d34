//! Stratified cross-validation, confusion matrices, metric reports and the
//! threshold × classifier accuracy sweep.
//!
//! The evaluation protocol is: stratified K-fold assignment per repeat, with
//! scaling and feature selection re-fitted on each training fold by default
//! (leak-free); fold predictions pool into one confusion matrix per repeat;
//! the final report is the arithmetic mean of the per-repeat metrics.
//! Accuracy is micro (trace over total); recall, FPR and FNR are macro
//! averages of per-class one-vs-rest rates.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifiers::{
    fit_rows, predict_batch, ClassifierKind, ClassifierSpec,
};
use crate::data::{Dataset, Task};
use crate::error::{Error, Result};
use crate::preprocess::{apply_minmax_rows, fit_minmax_slices};
use crate::selection::{
    project_rows, rank_matrix, threshold_count, SelectionConfig, SelectionMethod,
};

/// Where scaling parameters are fitted during cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingPolicy {
    /// Fit min/max on each training fold only (leak-free default).
    #[default]
    FitOnTrainFold,
    /// Fit min/max once on the full dataset (diagnostic mode that lets the
    /// held-out fold influence scaling).
    FitOnFullData,
}

/// Where feature-selection scores are computed during cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionScope {
    /// Score features on each training fold only (leak-free default).
    #[default]
    ScoreOnTrainFold,
    /// Score features once on the full dataset (diagnostic mode).
    ScoreOnFullData,
}

fn default_k() -> usize {
    10
}

fn default_repeats() -> usize {
    10
}

fn default_cv_seed() -> u64 {
    7
}

/// Cross-validation protocol: fold count, repeat count, base seed, and the
/// two fitting policies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvConfig {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_cv_seed")]
    pub seed: u64,
    #[serde(default)]
    pub scaling: ScalingPolicy,
    #[serde(default)]
    pub selection_scope: SelectionScope,
}

impl Default for CvConfig {
    fn default() -> CvConfig {
        CvConfig {
            k: default_k(),
            repeats: default_repeats(),
            seed: default_cv_seed(),
            scaling: ScalingPolicy::default(),
            selection_scope: SelectionScope::default(),
        }
    }
}

impl CvConfig {
    pub fn new(seed: u64) -> CvConfig {
        CvConfig {
            seed,
            ..CvConfig::default()
        }
    }
}

/// Square tally of truth rows × prediction columns over a fixed class list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    /// `counts[truth][predicted]`.
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<String>) -> ConfusionMatrix {
        let n = classes.len();
        ConfusionMatrix {
            classes,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn count(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn diagonal_total(&self) -> u64 {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }

    /// Adds another matrix over the same class list into this one.
    pub(crate) fn merge(&mut self, other: &ConfusionMatrix) {
        debug_assert_eq!(self.classes, other.classes);
        for (row, other_row) in self.counts.iter_mut().zip(&other.counts) {
            for (c, o) in row.iter_mut().zip(other_row) {
                *c += o;
            }
        }
    }
}

/// Tallies truth/prediction pairs. Both sequences hold indices into
/// `classes`.
pub fn confusion(
    truths: &[usize],
    predictions: &[usize],
    classes: &[String],
) -> Result<ConfusionMatrix> {
    if truths.len() != predictions.len() {
        return Err(Error::LengthMismatch {
            truths: truths.len(),
            predictions: predictions.len(),
        });
    }
    if truths.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = classes.len();
    let mut cm = ConfusionMatrix::new(classes.to_vec());
    for (&t, &p) in truths.iter().zip(predictions) {
        for label in [t, p] {
            if label >= n {
                return Err(Error::UnknownLabel { label, classes: n });
            }
        }
        cm.record(t, p);
    }
    Ok(cm)
}

/// One-vs-rest rates for a single class. `recall` is `None` when the class
/// never occurs as truth; `fpr` is `None` when it has no negatives. `fnr` is
/// always the exact complement of `recall`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    /// Truth count of the class in the evaluated pool.
    pub support: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub recall: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fpr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fnr: Option<f64>,
}

/// Wall-clock cost of an evaluation, split into training, prediction and
/// feature-selection time. Kept out of serialized reports so report files are
/// byte-reproducible; callers wanting it persist it separately.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timing {
    pub train_seconds: f64,
    pub predict_seconds: f64,
    pub selection_seconds: f64,
}

impl Timing {
    pub fn total(&self) -> f64 {
        self.train_seconds + self.predict_seconds + self.selection_seconds
    }

    fn merge(&mut self, other: &Timing) {
        self.train_seconds += other.train_seconds;
        self.predict_seconds += other.predict_seconds;
        self.selection_seconds += other.selection_seconds;
    }
}

/// What produced a report: task, classifier and protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEcho {
    pub task: String,
    pub classifier: ClassifierSpec,
    pub cv: CvConfig,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub selection: Option<SelectionConfig>,
}

/// Headline metrics of one repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatMetrics {
    pub repeat: usize,
    pub accuracy: f64,
    pub macro_recall: f64,
    pub macro_fpr: f64,
    pub macro_fnr: f64,
}

/// Evaluation result: micro accuracy, macro recall/FPR/FNR, per-class rates,
/// and (for cross-validation runs) per-repeat metrics plus the confusion
/// matrix pooled over all repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub macro_recall: f64,
    pub macro_fpr: f64,
    pub macro_fnr: f64,
    pub classes: Vec<String>,
    pub per_class: Vec<ClassMetrics>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub per_repeat: Option<Vec<RepeatMetrics>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pooled_confusion: Option<ConfusionMatrix>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config: Option<RunEcho>,
    /// Wall time is not a function of the inputs, so it never enters the
    /// serialized report.
    #[serde(skip, default)]
    pub timing: Timing,
}

/// Derives per-class one-vs-rest rates and their macro averages from a
/// confusion matrix.
///
/// Per class `c`: `TP = counts[c][c]`, `FN = row_c − TP`, `FP = col_c − TP`,
/// `TN = total − TP − FN − FP`; recall `TP/(TP+FN)`, FPR `FP/(FP+TN)`, FNR
/// `1 − recall`. Classes with zero truth count are skipped by the recall/FNR
/// macros; classes with no negatives are skipped by the FPR macro. The macro
/// FNR is computed as `1 − macro recall`, making the complement exact.
pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let n = cm.n_classes();
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyInput);
    }
    let accuracy = cm.diagonal_total() as f64 / total as f64;

    let mut per_class = Vec::with_capacity(n);
    let mut recall_sum = 0.0;
    let mut recall_n = 0u64;
    let mut fpr_sum = 0.0;
    let mut fpr_n = 0u64;
    for c in 0..n {
        let tp = cm.counts[c][c];
        let row: u64 = cm.counts[c].iter().sum();
        let col: u64 = cm.counts.iter().map(|r| r[c]).sum();
        let fn_ = row - tp;
        let fp = col - tp;
        let tn = total - tp - fn_ - fp;
        let recall = if row > 0 {
            Some(tp as f64 / (tp + fn_) as f64)
        } else {
            None
        };
        let fpr = if fp + tn > 0 {
            Some(fp as f64 / (fp + tn) as f64)
        } else {
            None
        };
        if let Some(r) = recall {
            recall_sum += r;
            recall_n += 1;
        }
        if let Some(f) = fpr {
            fpr_sum += f;
            fpr_n += 1;
        }
        per_class.push(ClassMetrics {
            class: cm.classes[c].clone(),
            support: row,
            recall,
            fpr,
            fnr: recall.map(|r| 1.0 - r),
        });
    }
    let macro_recall = if recall_n > 0 {
        recall_sum / recall_n as f64
    } else {
        0.0
    };
    let macro_fpr = if fpr_n > 0 { fpr_sum / fpr_n as f64 } else { 0.0 };
    Ok(MetricsReport {
        accuracy,
        macro_recall,
        macro_fpr,
        macro_fnr: 1.0 - macro_recall,
        classes: cm.classes.clone(),
        per_class,
        per_repeat: None,
        pooled_confusion: Some(cm.clone()),
        config: None,
        timing: Timing::default(),
    })
}

/// Assigns every sample to a fold: within each class, indices are shuffled by
/// a per-class stream of the seed, then dealt round-robin starting at fold 0.
/// Fold sizes within a class therefore differ by at most one, and a class
/// with fewer samples than folds occupies exactly that many folds.
pub fn stratified_folds(
    dataset: &Dataset,
    task: Task,
    k: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::TooFewFolds { k });
    }
    let n = dataset.len();
    if k > n {
        return Err(Error::TooManyFolds { k, n });
    }
    let mut assignment = vec![0usize; n];
    for class in 0..task.class_count(dataset.taxonomy()) {
        let mut members: Vec<usize> = dataset
            .samples()
            .iter()
            .enumerate()
            .filter(|(_, s)| task.label_of(s) == class)
            .map(|(i, _)| i)
            .collect();
        if members.is_empty() {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(class as u64);
        members.shuffle(&mut rng);
        for (j, &i) in members.iter().enumerate() {
            assignment[i] = j % k;
        }
    }
    Ok(assignment)
}

/// SplitMix64 finalizer over (repeat seed, fold), XORed with the classifier's
/// base seed, so every (repeat, fold) cell trains with a distinct,
/// schedule-independent seed.
fn fold_seed(base: u64, repeat_seed: u64, fold: u64) -> u64 {
    let mut z = repeat_seed ^ fold.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    base ^ (z ^ (z >> 31))
}

/// Ranks features on the given rows and returns the kept ordinals
/// (ascending) for the config's threshold.
pub(crate) fn selection_mask(
    rows: &[Vec<f64>],
    labels: &[usize],
    sel: &SelectionConfig,
) -> Result<Vec<usize>> {
    let ranked = rank_matrix(rows, labels, sel.method, sel.bins)?;
    let count = threshold_count(sel.threshold_percent, ranked.len())?;
    let mut ordinals: Vec<usize> = ranked[..count].iter().map(|&(o, _)| o).collect();
    ordinals.sort_unstable();
    Ok(ordinals)
}

/// Runs one repeat of K-fold evaluation and returns the confusion matrix
/// pooled over its folds (classes = those present in the dataset, ascending
/// label order) plus the wall time spent.
pub(crate) fn run_one_repeat(
    dataset: &Dataset,
    task: Task,
    spec: &ClassifierSpec,
    selection: Option<&SelectionConfig>,
    cv: &CvConfig,
    repeat_seed: u64,
) -> Result<(ConfusionMatrix, Timing)> {
    let assignment = stratified_folds(dataset, task, cv.k, repeat_seed)?;
    let samples = dataset.samples();
    let labels: Vec<usize> = samples.iter().map(|s| task.label_of(s)).collect();
    let schema = dataset.schema();
    let taxonomy = dataset.taxonomy();

    let counts = dataset.class_counts(task);
    let present: Vec<usize> = (0..counts.len()).filter(|&c| counts[c] > 0).collect();
    let class_names: Vec<String> = present
        .iter()
        .map(|&g| task.class_name(taxonomy, g))
        .collect();
    let pos_of = |g: usize| present.binary_search(&g).expect("label seen in dataset");

    let mut timing = Timing::default();

    // Diagnostic full-data modes fit once up front.
    let full_scale = if cv.scaling == ScalingPolicy::FitOnFullData {
        let slices: Vec<&[f64]> = samples.iter().map(|s| s.values.as_slice()).collect();
        Some(fit_minmax_slices(&slices, schema.fingerprint())?)
    } else {
        None
    };
    let full_mask: Option<Vec<usize>> = match selection {
        Some(sel) if cv.selection_scope == SelectionScope::ScoreOnFullData => {
            let params = match &full_scale {
                Some(p) => p.clone(),
                None => {
                    let slices: Vec<&[f64]> =
                        samples.iter().map(|s| s.values.as_slice()).collect();
                    fit_minmax_slices(&slices, schema.fingerprint())?
                }
            };
            let mut rows: Vec<Vec<f64>> = samples.iter().map(|s| s.values.clone()).collect();
            apply_minmax_rows(&mut rows, &params)?;
            let started = Instant::now();
            let mask = selection_mask(&rows, &labels, sel)?;
            timing.selection_seconds += started.elapsed().as_secs_f64();
            Some(mask)
        }
        _ => None,
    };

    let mut cm = ConfusionMatrix::new(class_names);
    for fold in 0..cv.k {
        let test_idx: Vec<usize> = (0..samples.len())
            .filter(|&i| assignment[i] == fold)
            .collect();
        if test_idx.is_empty() {
            continue;
        }
        let train_idx: Vec<usize> = (0..samples.len())
            .filter(|&i| assignment[i] != fold)
            .collect();
        let mut train_rows: Vec<Vec<f64>> =
            train_idx.iter().map(|&i| samples[i].values.clone()).collect();
        let mut test_rows: Vec<Vec<f64>> =
            test_idx.iter().map(|&i| samples[i].values.clone()).collect();
        let train_labels: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();

        let params = match cv.scaling {
            ScalingPolicy::FitOnTrainFold => {
                let slices: Vec<&[f64]> = train_rows.iter().map(|r| r.as_slice()).collect();
                fit_minmax_slices(&slices, schema.fingerprint())?
            }
            ScalingPolicy::FitOnFullData => full_scale.clone().expect("fitted above"),
        };
        apply_minmax_rows(&mut train_rows, &params)?;
        apply_minmax_rows(&mut test_rows, &params)?;

        let fingerprint;
        if let Some(sel) = selection {
            let ordinals = match &full_mask {
                Some(m) => m.clone(),
                None => {
                    let started = Instant::now();
                    let mask = selection_mask(&train_rows, &train_labels, sel)?;
                    timing.selection_seconds += started.elapsed().as_secs_f64();
                    mask
                }
            };
            fingerprint = schema.project(&ordinals)?.fingerprint().to_string();
            train_rows = project_rows(&train_rows, &ordinals);
            test_rows = project_rows(&test_rows, &ordinals);
        } else {
            fingerprint = schema.fingerprint().to_string();
        }

        let fold_spec = ClassifierSpec {
            kind: spec.kind,
            params: spec.params.clone(),
            seed: fold_seed(spec.seed, repeat_seed, fold as u64),
        };
        let train_slices: Vec<&[f64]> = train_rows.iter().map(|r| r.as_slice()).collect();
        let model = fit_rows(
            &fold_spec,
            &train_slices,
            &train_labels,
            &|g| task.class_name(taxonomy, g),
            &fingerprint,
        )?;
        timing.train_seconds += model.train_seconds;

        let started = Instant::now();
        let local_preds = predict_batch(&model, &test_rows, &fingerprint)?;
        timing.predict_seconds += started.elapsed().as_secs_f64();

        // The model's local class indices map back through the labels present
        // in its training fold.
        let mut train_present = train_labels.clone();
        train_present.sort_unstable();
        train_present.dedup();
        for (&i, &local) in test_idx.iter().zip(&local_preds) {
            cm.record(pos_of(labels[i]), pos_of(train_present[local]));
        }
    }
    Ok((cm, timing))
}

/// Repeated stratified K-fold cross-validation.
///
/// Repeat `r` uses fold seed `cv.seed + r`; each fold's classifier seed is
/// derived from (classifier seed, repeat seed, fold index). Fold predictions
/// pool into one confusion matrix per repeat; the report carries the
/// arithmetic mean of the per-repeat metrics, the per-repeat breakdown, and
/// the confusion matrix summed over all repeats.
pub fn cross_validate(
    dataset: &Dataset,
    task: Task,
    spec: &ClassifierSpec,
    selection: Option<&SelectionConfig>,
    cv: &CvConfig,
) -> Result<MetricsReport> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some((sample, feature)) = dataset.first_non_finite() {
        return Err(Error::NonFiniteValue { sample, feature });
    }
    if cv.repeats == 0 {
        return Err(Error::InvalidHyperparameter {
            name: "repeats".to_string(),
            detail: "must be at least 1".to_string(),
        });
    }

    let mut timing = Timing::default();
    let mut reports = Vec::with_capacity(cv.repeats);
    let mut pooled: Option<ConfusionMatrix> = None;
    for r in 0..cv.repeats {
        let repeat_seed = cv.seed.wrapping_add(r as u64);
        let (cm, t) = run_one_repeat(dataset, task, spec, selection, cv, repeat_seed)?;
        timing.merge(&t);
        match &mut pooled {
            Some(p) => p.merge(&cm),
            None => pooled = Some(cm.clone()),
        }
        reports.push(compute_metrics(&cm)?);
    }

    let r = cv.repeats as f64;
    let accuracy = reports.iter().map(|m| m.accuracy).sum::<f64>() / r;
    let macro_recall = reports.iter().map(|m| m.macro_recall).sum::<f64>() / r;
    let macro_fpr = reports.iter().map(|m| m.macro_fpr).sum::<f64>() / r;
    let classes = reports[0].classes.clone();
    let per_class = (0..classes.len())
        .map(|i| {
            let recalls: Option<Vec<f64>> =
                reports.iter().map(|m| m.per_class[i].recall).collect();
            let fprs: Option<Vec<f64>> = reports.iter().map(|m| m.per_class[i].fpr).collect();
            let recall = recalls.map(|v| v.iter().sum::<f64>() / r);
            ClassMetrics {
                class: classes[i].clone(),
                support: reports[0].per_class[i].support,
                recall,
                fpr: fprs.map(|v| v.iter().sum::<f64>() / r),
                fnr: recall.map(|x| 1.0 - x),
            }
        })
        .collect();
    let per_repeat = reports
        .iter()
        .enumerate()
        .map(|(i, m)| RepeatMetrics {
            repeat: i,
            accuracy: m.accuracy,
            macro_recall: m.macro_recall,
            macro_fpr: m.macro_fpr,
            macro_fnr: m.macro_fnr,
        })
        .collect();
    Ok(MetricsReport {
        accuracy,
        macro_recall,
        macro_fpr,
        macro_fnr: 1.0 - macro_recall,
        classes,
        per_class,
        per_repeat: Some(per_repeat),
        pooled_confusion: pooled,
        config: Some(RunEcho {
            task: task.to_string(),
            classifier: spec.clone(),
            cv: cv.clone(),
            selection: selection.cloned(),
        }),
        timing,
    })
}

/// Thresholds swept, ascending.
pub const SWEEP_THRESHOLDS: [u32; 5] = [20, 40, 60, 80, 100];

/// Classifiers swept, in tie-break precedence order.
pub const SWEEP_CLASSIFIERS: [ClassifierKind; 4] = [
    ClassifierKind::Rf,
    ClassifierKind::Knn,
    ClassifierKind::J48,
    ClassifierKind::Nb,
];

/// One cell of the sweep grid. A failed cell records the error instead of
/// metrics; the rest of the grid still runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub threshold_percent: u32,
    pub classifier: ClassifierKind,
    /// Features kept at this threshold.
    pub features: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub macro_recall: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

/// The winning cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepBest {
    pub threshold_percent: u32,
    pub classifier: ClassifierKind,
    pub accuracy: f64,
}

/// Full 5×4 sweep result: accuracy per (threshold, classifier) cell plus the
/// best cell under the tie-break (higher accuracy, then smaller threshold,
/// then classifier order RF, KNN, J48, NB).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub task: String,
    pub method: SelectionMethod,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bins: Option<usize>,
    pub thresholds: Vec<u32>,
    pub classifiers: Vec<ClassifierKind>,
    pub cells: Vec<SweepCell>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub best: Option<SweepBest>,
    pub cv: CvConfig,
    /// Same exclusion rationale as [`MetricsReport::timing`].
    #[serde(skip, default)]
    pub timing: Timing,
}

/// Cross-validates every (threshold, classifier) cell of the fixed grid with
/// default hyperparameters and the cv seed. Cell failures are recorded, not
/// propagated; the best cell is the first strict accuracy maximum in
/// threshold-major scan order.
pub fn sweep(
    dataset: &Dataset,
    task: Task,
    method: SelectionMethod,
    bins: usize,
    cv: &CvConfig,
) -> Result<SweepReport> {
    let total_features = dataset.schema().len();
    let mut cells = Vec::with_capacity(SWEEP_THRESHOLDS.len() * SWEEP_CLASSIFIERS.len());
    let mut best: Option<SweepBest> = None;
    let mut timing = Timing::default();
    for &threshold in &SWEEP_THRESHOLDS {
        for &kind in &SWEEP_CLASSIFIERS {
            let sel = SelectionConfig {
                method,
                threshold_percent: threshold,
                bins,
            };
            let spec = ClassifierSpec::new(kind, cv.seed);
            let features = threshold_count(threshold, total_features)?;
            match cross_validate(dataset, task, &spec, Some(&sel), cv) {
                Ok(report) => {
                    timing.merge(&report.timing);
                    if best
                        .as_ref()
                        .is_none_or(|b| report.accuracy > b.accuracy)
                    {
                        best = Some(SweepBest {
                            threshold_percent: threshold,
                            classifier: kind,
                            accuracy: report.accuracy,
                        });
                    }
                    cells.push(SweepCell {
                        threshold_percent: threshold,
                        classifier: kind,
                        features,
                        accuracy: Some(report.accuracy),
                        macro_recall: Some(report.macro_recall),
                        error: None,
                    });
                }
                Err(e) => cells.push(SweepCell {
                    threshold_percent: threshold,
                    classifier: kind,
                    features,
                    accuracy: None,
                    macro_recall: None,
                    error: Some(e.to_string()),
                }),
            }
        }
    }
    Ok(SweepReport {
        task: task.to_string(),
        method,
        bins: match method {
            SelectionMethod::Chi2 => None,
            SelectionMethod::Mi => Some(bins),
        },
        thresholds: SWEEP_THRESHOLDS.to_vec(),
        classifiers: SWEEP_CLASSIFIERS.to_vec(),
        cells,
        best,
        cv: cv.clone(),
        timing,
    })
}

/// Renders a report as a one-row CSV table
/// (`Classifier,Accuracy,Recall,FPR,FNR,Time (seconds)`). The time column is
/// training + prediction wall time and is the one column that varies between
/// otherwise identical runs.
pub fn metrics_to_csv(report: &MetricsReport) -> String {
    let classifier = report
        .config
        .as_ref()
        .map_or_else(|| "-".to_string(), |c| c.classifier.kind.to_string());
    let mut out = String::from("Classifier,Accuracy,Recall,FPR,FNR,Time (seconds)\n");
    out.push_str(&format!(
        "{},{:.4},{:.4},{:.4},{:.4},{:.2}\n",
        classifier,
        report.accuracy,
        report.macro_recall,
        report.macro_fpr,
        report.macro_fnr,
        report.timing.train_seconds + report.timing.predict_seconds,
    ));
    out
}

/// Renders the sweep grid as a CSV table: one row per threshold, one column
/// per classifier, accuracies to four decimals (errored cells are empty).
pub fn sweep_to_csv(report: &SweepReport) -> String {
    let mut out = String::from("Threshold (%)");
    for kind in &report.classifiers {
        out.push(',');
        out.push_str(kind.as_str());
    }
    out.push('\n');
    for &threshold in &report.thresholds {
        out.push_str(&threshold.to_string());
        for &kind in &report.classifiers {
            out.push(',');
            let cell = report
                .cells
                .iter()
                .find(|c| c.threshold_percent == threshold && c.classifier == kind);
            if let Some(acc) = cell.and_then(|c| c.accuracy) {
                out.push_str(&format!("{acc:.4}"));
            }
        }
        out.push('\n');
    }
    out
}
