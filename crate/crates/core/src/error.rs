//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema document is empty")]
    EmptySchema,
    #[error("duplicate feature name {name:?}")]
    DuplicateFeature { name: String },
    #[error("empty feature name at position {position}")]
    EmptyFeatureName { position: usize },
    #[error("unknown feature group {group:?} (expected Memory, API, Network, Battery, Logcat or Process)")]
    UnknownGroup { group: String },
    #[error("feature id {id:?} at position {position} does not match its ordinal (expected {expected:?})")]
    FeatureIdMismatch {
        id: String,
        position: usize,
        expected: String,
    },

    #[error("taxonomy has no categories")]
    EmptyTaxonomy,
    #[error("duplicate category name {name:?}")]
    DuplicateCategory { name: String },
    #[error("duplicate family name {name:?}")]
    DuplicateFamily { name: String },
    #[error("unknown category {name:?}")]
    UnknownCategory { name: String },
    #[error("unknown family {name:?}")]
    UnknownFamily { name: String },
    #[error("family {family:?} belongs to category {expected:?}, not {found:?}")]
    FamilyCategoryMismatch {
        family: String,
        expected: String,
        found: String,
    },

    #[error("CSV header mismatch: {detail}")]
    HeaderMismatch { detail: String },
    #[error("row {row}: bad value {value:?} in column {column:?}")]
    BadCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: expected {expected} fields, found {found}")]
    BadRowLength {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("sample {index} has {found} values, schema has {expected} features")]
    SampleLengthMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },

    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset contains a non-finite value (sample {sample}, feature {feature})")]
    NonFiniteValue { sample: usize, feature: usize },
    #[error("schema fingerprint mismatch: expected {expected}, found {found}")]
    FingerprintMismatch { expected: String, found: String },
    #[error("invalid synthetic spec: {detail}")]
    InvalidSyntheticSpec { detail: String },

    #[error("feature {feature} has a negative value; chi2 requires nonnegative inputs")]
    NegativeFeatureValue { feature: String },
    #[error("need at least 2 distinct classes, found {found}")]
    TooFewClasses { found: usize },
    #[error("threshold percent {percent} out of range 1..=100")]
    InvalidThreshold { percent: u32 },
    #[error("selection count {count} out of range 1..={max}")]
    CountOutOfRange { count: usize, max: usize },
    #[error("feature mask is empty")]
    EmptyMask,
    #[error("mask ordinal {ordinal} out of range for schema of {size} features")]
    MaskOutOfRange { ordinal: usize, size: usize },
    #[error("MI binning needs at least 2 bins, got {bins}")]
    TooFewBins { bins: usize },

    #[error("unknown hyperparameter {name:?} for classifier {kind}")]
    UnknownHyperparameter { kind: String, name: String },
    #[error("invalid hyperparameter {name:?}: {detail}")]
    InvalidHyperparameter { name: String, detail: String },

    #[error("fold count {k} exceeds sample count {n}")]
    TooManyFolds { k: usize, n: usize },
    #[error("fold count must be at least 2, got {k}")]
    TooFewFolds { k: usize },
    #[error("truth/prediction length mismatch: {truths} vs {predictions}")]
    LengthMismatch { truths: usize, predictions: usize },
    #[error("label index {label} not in class list of {classes} classes")]
    UnknownLabel { label: usize, classes: usize },
    #[error("empty input")]
    EmptyInput,

    #[error("unsupported model format version {found} (supported: {supported})")]
    VersionMismatch { found: u32, supported: u32 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
