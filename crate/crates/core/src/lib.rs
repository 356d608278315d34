//! Dynamic-feature malware classification library.
//!
//! The crate implements a full tabular classification pipeline for Android
//! runtime telemetry: a fixed 141-feature schema in six observation groups, a
//! 14-category / 180-family label taxonomy, CSV ingestion, MinMax scaling,
//! chi-squared and mutual-information feature selection with top-percent
//! thresholds, six classical classifiers (J48-style decision tree, random
//! forest, k-nearest-neighbors, Gaussian naive Bayes, multinomial logistic
//! regression, and SAMME boosted stumps), and repeated stratified
//! cross-validation with micro accuracy and macro recall/FPR/FNR reporting.
//!
//! Everything is deterministic given the configured seeds: datasets, models,
//! rankings and evaluation reports reproduce byte-for-byte across runs.
//! Artifacts that depend on a column layout (scale parameters, feature masks,
//! trained models) carry the schema fingerprint they were built against and
//! refuse to apply to anything else.

pub mod classifiers;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod preprocess;
pub mod schema;
pub mod selection;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
