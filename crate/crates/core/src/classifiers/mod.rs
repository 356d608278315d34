//! Six supervised classifiers behind one fit/predict contract.
//!
//! Every classifier takes a [`ClassifierSpec`] (kind + hyperparameter table +
//! seed), trains on a dataset for one of the two label tasks, and yields a
//! [`TrainedModel`] that predicts deterministically and serializes to a
//! versioned JSON envelope. Hyperparameters are name→value pairs validated
//! against a per-kind table; unknown names are rejected rather than ignored.

pub mod adaboost;
pub mod forest;
pub mod knn;
pub mod logistic;
pub mod naive_bayes;
pub mod tree;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Task};
use crate::error::{Error, Result};

use adaboost::{AbModel, AbParams};
use forest::{ForestModel, ForestParams};
use knn::KnnModel;
use logistic::{LrModel, LrParams};
use naive_bayes::NbModel;
use tree::{grow_tree, GrowConfig, SplitCriterion, TreeModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassifierKind {
    J48,
    #[serde(rename = "RF")]
    Rf,
    #[serde(rename = "KNN")]
    Knn,
    #[serde(rename = "NB")]
    Nb,
    #[serde(rename = "LR")]
    Lr,
    #[serde(rename = "AB")]
    Ab,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 6] = [
        ClassifierKind::J48,
        ClassifierKind::Rf,
        ClassifierKind::Knn,
        ClassifierKind::Nb,
        ClassifierKind::Lr,
        ClassifierKind::Ab,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::J48 => "J48",
            ClassifierKind::Rf => "RF",
            ClassifierKind::Knn => "KNN",
            ClassifierKind::Nb => "NB",
            ClassifierKind::Lr => "LR",
            ClassifierKind::Ab => "AB",
        }
    }

    /// Recognized hyperparameter names and their defaults.
    pub fn default_params(self) -> &'static [(&'static str, f64)] {
        match self {
            ClassifierKind::J48 => &[("min_samples_split", 2.0), ("max_depth", 0.0)],
            ClassifierKind::Rf => &[
                ("trees", 100.0),
                ("max_depth", 0.0),
                ("min_samples_split", 2.0),
                ("bootstrap", 1.0),
                ("features_per_split", 0.0),
            ],
            ClassifierKind::Knn => &[("k", 5.0)],
            ClassifierKind::Nb => &[("var_smoothing", 1e-9)],
            ClassifierKind::Lr => &[
                ("l2", 1e-4),
                ("learning_rate", 0.1),
                ("max_iters", 500.0),
                ("tol", 1e-6),
            ],
            ClassifierKind::Ab => &[("rounds", 100.0), ("learning_rate", 1.0)],
        }
    }
}

impl std::fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_uppercase().as_str() {
            "J48" => Ok(ClassifierKind::J48),
            "RF" => Ok(ClassifierKind::Rf),
            "KNN" => Ok(ClassifierKind::Knn),
            "NB" => Ok(ClassifierKind::Nb),
            "LR" => Ok(ClassifierKind::Lr),
            "AB" => Ok(ClassifierKind::Ab),
            other => Err(format!(
                "unknown classifier {other:?} (expected J48, RF, KNN, NB, LR or AB)"
            )),
        }
    }
}

/// What to train: the algorithm, hyperparameter overrides (missing entries
/// take defaults) and the seed driving any randomized part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn new(kind: ClassifierKind, seed: u64) -> ClassifierSpec {
        ClassifierSpec {
            kind,
            params: BTreeMap::new(),
            seed,
        }
    }

    pub fn with_param(mut self, name: &str, value: f64) -> ClassifierSpec {
        self.params.insert(name.to_string(), value);
        self
    }
}

fn require_integer(name: &str, v: f64) -> Result<u64> {
    if !v.is_finite() || v < 0.0 || v.fract() != 0.0 {
        return Err(Error::InvalidHyperparameter {
            name: name.to_string(),
            detail: format!("expected a nonnegative integer, got {v}"),
        });
    }
    Ok(v as u64)
}

fn require_at_least(name: &str, v: f64, min: u64) -> Result<u64> {
    let n = require_integer(name, v)?;
    if n < min {
        return Err(Error::InvalidHyperparameter {
            name: name.to_string(),
            detail: format!("must be at least {min}, got {n}"),
        });
    }
    Ok(n)
}

fn require_positive(name: &str, v: f64) -> Result<f64> {
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::InvalidHyperparameter {
            name: name.to_string(),
            detail: format!("must be positive and finite, got {v}"),
        });
    }
    Ok(v)
}

fn require_nonnegative(name: &str, v: f64) -> Result<f64> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::InvalidHyperparameter {
            name: name.to_string(),
            detail: format!("must be nonnegative and finite, got {v}"),
        });
    }
    Ok(v)
}

fn depth_option(v: u64) -> Option<u32> {
    if v == 0 {
        None
    } else {
        Some(v.min(u32::MAX as u64) as u32)
    }
}

enum ResolvedParams {
    J48 {
        min_samples_split: usize,
        max_depth: Option<u32>,
    },
    Rf(ForestParams),
    Knn {
        k: usize,
    },
    Nb {
        var_smoothing: f64,
    },
    Lr(LrParams),
    Ab(AbParams),
}

/// Merges overrides onto defaults and validates every value. Rejects names
/// the kind does not recognize.
fn resolve_params(spec: &ClassifierSpec) -> Result<ResolvedParams> {
    let table = spec.kind.default_params();
    for name in spec.params.keys() {
        if !table.iter().any(|(known, _)| known == name) {
            return Err(Error::UnknownHyperparameter {
                kind: spec.kind.to_string(),
                name: name.clone(),
            });
        }
    }
    let get = |name: &str| -> f64 {
        spec.params.get(name).copied().unwrap_or_else(|| {
            table
                .iter()
                .find(|(known, _)| *known == name)
                .expect("name drawn from the table")
                .1
        })
    };
    Ok(match spec.kind {
        ClassifierKind::J48 => ResolvedParams::J48 {
            min_samples_split: require_at_least("min_samples_split", get("min_samples_split"), 1)?
                as usize,
            max_depth: depth_option(require_integer("max_depth", get("max_depth"))?),
        },
        ClassifierKind::Rf => {
            let features = require_integer("features_per_split", get("features_per_split"))?;
            let bootstrap = require_integer("bootstrap", get("bootstrap"))?;
            if bootstrap > 1 {
                return Err(Error::InvalidHyperparameter {
                    name: "bootstrap".to_string(),
                    detail: format!("must be 0 or 1, got {bootstrap}"),
                });
            }
            ResolvedParams::Rf(ForestParams {
                trees: require_at_least("trees", get("trees"), 1)? as usize,
                max_depth: depth_option(require_integer("max_depth", get("max_depth"))?),
                min_samples_split: require_at_least(
                    "min_samples_split",
                    get("min_samples_split"),
                    1,
                )? as usize,
                bootstrap: bootstrap == 1,
                features_per_split: match features {
                    0 => None,
                    m => Some(m as usize),
                },
            })
        }
        ClassifierKind::Knn => ResolvedParams::Knn {
            k: require_at_least("k", get("k"), 1)? as usize,
        },
        ClassifierKind::Nb => ResolvedParams::Nb {
            var_smoothing: require_positive("var_smoothing", get("var_smoothing"))?,
        },
        ClassifierKind::Lr => ResolvedParams::Lr(LrParams {
            l2: require_nonnegative("l2", get("l2"))?,
            learning_rate: require_positive("learning_rate", get("learning_rate"))?,
            max_iters: require_at_least("max_iters", get("max_iters"), 1)? as usize,
            tol: require_nonnegative("tol", get("tol"))?,
        }),
        ClassifierKind::Ab => ResolvedParams::Ab(AbParams {
            rounds: require_at_least("rounds", get("rounds"), 1)? as usize,
            learning_rate: require_positive("learning_rate", get("learning_rate"))?,
        }),
    })
}

/// Learned state, tagged per algorithm for the JSON envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelState {
    Tree(TreeModel),
    Forest(ForestModel),
    Knn(KnnModel),
    NaiveBayes(NbModel),
    Logistic(LrModel),
    Adaboost(AbModel),
}

impl ModelState {
    fn n_features(&self) -> usize {
        match self {
            ModelState::Tree(m) => m.n_features,
            ModelState::Forest(m) => m.n_features,
            ModelState::Knn(m) => m.n_features,
            ModelState::NaiveBayes(m) => m.n_features,
            ModelState::Logistic(m) => m.n_features,
            ModelState::Adaboost(m) => m.n_features,
        }
    }
}

/// A fitted classifier: the [`ClassifierSpec`] that produced it, the
/// fingerprint of the schema it was trained against, the class names it can
/// emit (only classes seen in training) and the learned state.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub spec: ClassifierSpec,
    pub schema_fingerprint: String,
    pub classes: Vec<String>,
    pub state: ModelState,
    /// Wall-clock training time. Informational only: deliberately excluded
    /// from the serialized envelope so model files are byte-reproducible.
    pub train_seconds: f64,
}

/// Trains `spec` on the dataset's `task` labels.
pub fn fit(spec: &ClassifierSpec, dataset: &Dataset, task: Task) -> Result<TrainedModel> {
    let labels: Vec<usize> = dataset.samples().iter().map(|s| task.label_of(s)).collect();
    let rows: Vec<&[f64]> = dataset.samples().iter().map(|s| s.values.as_slice()).collect();
    let taxonomy = dataset.taxonomy();
    fit_rows(
        spec,
        &rows,
        &labels,
        &|g| task.class_name(taxonomy, g),
        dataset.schema().fingerprint(),
    )
}

/// Matrix-level training shared by [`fit`] and the cross-validation loop.
/// `labels` are global label indices; `class_name` renders them for the
/// model's class list.
pub(crate) fn fit_rows(
    spec: &ClassifierSpec,
    rows: &[&[f64]],
    labels: &[usize],
    class_name: &dyn Fn(usize) -> String,
    schema_fingerprint: &str,
) -> Result<TrainedModel> {
    let params = resolve_params(spec)?;
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for (i, row) in rows.iter().enumerate() {
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                sample: i,
                feature: j,
            });
        }
    }
    let mut present: Vec<usize> = labels.to_vec();
    present.sort_unstable();
    present.dedup();
    let y: Vec<u32> = labels
        .iter()
        .map(|g| present.binary_search(g).expect("label present") as u32)
        .collect();
    let classes: Vec<String> = present.iter().map(|&g| class_name(g)).collect();
    let n_classes = classes.len();

    let started = Instant::now();
    let state = match params {
        ResolvedParams::J48 {
            min_samples_split,
            max_depth,
        } => {
            let config = GrowConfig {
                criterion: SplitCriterion::GainRatio,
                max_depth,
                min_samples_split,
                features_per_split: None,
            };
            ModelState::Tree(grow_tree(
                rows,
                &y,
                n_classes,
                &config,
                (0..rows.len() as u32).collect(),
                None,
            ))
        }
        ResolvedParams::Rf(p) => {
            ModelState::Forest(forest::fit_forest(rows, &y, n_classes, &p, spec.seed))
        }
        ResolvedParams::Knn { k } => ModelState::Knn(KnnModel {
            k,
            n_features: rows[0].len(),
            x: rows.iter().map(|r| r.to_vec()).collect(),
            y,
        }),
        ResolvedParams::Nb { var_smoothing } => {
            ModelState::NaiveBayes(naive_bayes::fit_nb(rows, &y, n_classes, var_smoothing))
        }
        ResolvedParams::Lr(p) => ModelState::Logistic(logistic::fit_lr(rows, &y, n_classes, &p)),
        ResolvedParams::Ab(p) => ModelState::Adaboost(adaboost::fit_ab(rows, &y, n_classes, &p)),
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        schema_fingerprint: schema_fingerprint.to_string(),
        classes,
        state,
        train_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Predicts a batch of rows. `schema_fingerprint` must match the fingerprint
/// the model was trained against (for selected-feature models that is the
/// projected schema's fingerprint). Returns indices into `model.classes`.
pub fn predict_batch(
    model: &TrainedModel,
    rows: &[Vec<f64>],
    schema_fingerprint: &str,
) -> Result<Vec<usize>> {
    if schema_fingerprint != model.schema_fingerprint {
        return Err(Error::FingerprintMismatch {
            expected: model.schema_fingerprint.clone(),
            found: schema_fingerprint.to_string(),
        });
    }
    let width = model.state.n_features();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(Error::SampleLengthMismatch {
                index: i,
                expected: width,
                found: row.len(),
            });
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                sample: i,
                feature: j,
            });
        }
    }
    let n_classes = model.classes.len();
    let predict_one = |row: &Vec<f64>| -> usize {
        match &model.state {
            ModelState::Tree(m) => m.predict_one(row) as usize,
            ModelState::Forest(m) => m.predict_one(row, n_classes) as usize,
            ModelState::Knn(m) => m.predict_one(row, n_classes) as usize,
            ModelState::NaiveBayes(m) => m.predict_one(row) as usize,
            ModelState::Logistic(m) => m.predict_one(row) as usize,
            ModelState::Adaboost(m) => m.predict_one(row, n_classes) as usize,
        }
    };
    // Rows are independent; order is preserved by the parallel map.
    Ok(rows.par_iter().map(predict_one).collect())
}

/// Like [`predict_batch`] but resolves indices to class names.
pub fn predict_labels(
    model: &TrainedModel,
    rows: &[Vec<f64>],
    schema_fingerprint: &str,
) -> Result<Vec<String>> {
    Ok(predict_batch(model, rows, schema_fingerprint)?
        .into_iter()
        .map(|i| model.classes[i].clone())
        .collect())
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelEnvelope {
    format_version: u32,
    spec: ClassifierSpec,
    schema_fingerprint: String,
    class_list: Vec<String>,
    state: ModelState,
}

/// Serializes a model to the versioned JSON envelope. Output is a pure
/// function of (spec, training data): no timestamps, no wall time.
pub fn model_to_json(model: &TrainedModel) -> String {
    let envelope = ModelEnvelope {
        format_version: MODEL_FORMAT_VERSION,
        spec: model.spec.clone(),
        schema_fingerprint: model.schema_fingerprint.clone(),
        class_list: model.classes.clone(),
        state: model.state.clone(),
    };
    serde_json::to_string_pretty(&envelope).expect("model serialization cannot fail")
}

pub fn model_from_json(doc: &str) -> Result<TrainedModel> {
    let envelope: ModelEnvelope = serde_json::from_str(doc)?;
    if envelope.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: envelope.format_version,
            supported: MODEL_FORMAT_VERSION,
        });
    }
    Ok(TrainedModel {
        spec: envelope.spec,
        schema_fingerprint: envelope.schema_fingerprint,
        classes: envelope.class_list,
        state: envelope.state,
        train_seconds: 0.0,
    })
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_json(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let doc = std::fs::read_to_string(path)?;
    model_from_json(&doc)
}
