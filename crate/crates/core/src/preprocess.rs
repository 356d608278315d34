//! Cleaning and MinMax scaling.
//!
//! The fixed pipeline order is: drop rows with non-finite values, collapse
//! exact duplicates, then fit and apply per-feature MinMax scaling. Scaling
//! parameters carry the schema fingerprint so models never see data scaled
//! against a different column layout.

use serde::{Deserialize, Serialize};

use crate::data::{sample_key, Dataset};
use crate::error::{Error, Result};

/// Per-feature minima and maxima from a training set, used to rescale every
/// value to `[0,1]` via `(x - min) / (max - min)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub schema_fingerprint: String,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScaleParams {
    pub fn from_json(doc: &str) -> Result<ScaleParams> {
        let params: ScaleParams = serde_json::from_str(doc)?;
        if params.min.len() != params.max.len() {
            return Err(Error::LengthMismatch {
                truths: params.min.len(),
                predictions: params.max.len(),
            });
        }
        Ok(params)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scale params serialization cannot fail")
    }
}

/// Removes rows containing any non-finite value. Returns the surviving
/// dataset plus the number of rows dropped; dropping everything is an error
/// (nothing downstream can run on zero rows).
pub fn drop_incomplete(dataset: &Dataset) -> Result<(Dataset, usize)> {
    let kept: Vec<_> = dataset
        .samples()
        .iter()
        .filter(|s| s.values.iter().all(|v| v.is_finite()))
        .cloned()
        .collect();
    if kept.is_empty() && !dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dropped = dataset.len() - kept.len();
    Ok((dataset.with_samples(kept)?, dropped))
}

/// Collapses rows whose values (bit-for-bit) and both labels coincide,
/// keeping the first occurrence. Sample ids do not participate in the key:
/// re-submissions of the same measurements under new names are duplicates.
pub fn dedupe(dataset: &Dataset) -> Result<(Dataset, usize)> {
    let mut seen = std::collections::HashSet::with_capacity(dataset.len());
    let mut kept = Vec::with_capacity(dataset.len());
    for s in dataset.samples() {
        if seen.insert(sample_key(s)) {
            kept.push(s.clone());
        }
    }
    let removed = dataset.len() - kept.len();
    Ok((dataset.with_samples(kept)?, removed))
}

/// Computes per-feature min/max over all samples.
pub fn fit_minmax(dataset: &Dataset) -> Result<ScaleParams> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some((sample, feature)) = dataset.first_non_finite() {
        return Err(Error::NonFiniteValue { sample, feature });
    }
    let d = dataset.schema().len();
    let mut min = vec![f64::INFINITY; d];
    let mut max = vec![f64::NEG_INFINITY; d];
    for s in dataset.samples() {
        for (j, &v) in s.values.iter().enumerate() {
            if v < min[j] {
                min[j] = v;
            }
            if v > max[j] {
                max[j] = v;
            }
        }
    }
    Ok(ScaleParams {
        schema_fingerprint: dataset.schema().fingerprint().to_string(),
        min,
        max,
    })
}

/// Computes per-feature min/max over borrowed rows. The cross-validation loop
/// fits scaling on a training fold without materializing it as a dataset.
pub(crate) fn fit_minmax_slices(rows: &[&[f64]], schema_fingerprint: &str) -> Result<ScaleParams> {
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = rows[0].len();
    let mut min = vec![f64::INFINITY; d];
    let mut max = vec![f64::NEG_INFINITY; d];
    for (i, row) in rows.iter().enumerate() {
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                sample: i,
                feature: j,
            });
        }
        for (j, &v) in row.iter().enumerate() {
            if v < min[j] {
                min[j] = v;
            }
            if v > max[j] {
                max[j] = v;
            }
        }
    }
    Ok(ScaleParams {
        schema_fingerprint: schema_fingerprint.to_string(),
        min,
        max,
    })
}

/// How many values fell outside the fitted `[min,max]` range and were clamped
/// (only possible when params come from a different dataset, e.g. a training
/// fold applied to held-out rows).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClampReport {
    pub clamped_low: u64,
    pub clamped_high: u64,
}

impl ClampReport {
    pub fn total(&self) -> u64 {
        self.clamped_low + self.clamped_high
    }
}

/// Scales one value. A degenerate feature (max == min) maps to 0 so
/// uninformative columns stay silent instead of going NaN.
#[inline]
fn scale_value(x: f64, min: f64, max: f64, report: &mut ClampReport) -> f64 {
    if max == min {
        return 0.0;
    }
    let y = (x - min) / (max - min);
    if y < 0.0 {
        report.clamped_low += 1;
        0.0
    } else if y > 1.0 {
        report.clamped_high += 1;
        1.0
    } else {
        y
    }
}

/// Rescales raw rows in place. Width must match the params; non-finite inputs
/// are rejected.
pub fn apply_minmax_rows(rows: &mut [Vec<f64>], params: &ScaleParams) -> Result<ClampReport> {
    let mut report = ClampReport::default();
    for (i, row) in rows.iter_mut().enumerate() {
        if row.len() != params.min.len() {
            return Err(Error::SampleLengthMismatch {
                index: i,
                expected: params.min.len(),
                found: row.len(),
            });
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                sample: i,
                feature: j,
            });
        }
        for (j, v) in row.iter_mut().enumerate() {
            *v = scale_value(*v, params.min[j], params.max[j], &mut report);
        }
    }
    Ok(report)
}

/// Rescales a dataset with previously fitted parameters. The params
/// fingerprint must match the dataset schema.
pub fn apply_minmax(dataset: &Dataset, params: &ScaleParams) -> Result<(Dataset, ClampReport)> {
    if params.schema_fingerprint != dataset.schema().fingerprint() {
        return Err(Error::FingerprintMismatch {
            expected: dataset.schema().fingerprint().to_string(),
            found: params.schema_fingerprint.clone(),
        });
    }
    if let Some((sample, feature)) = dataset.first_non_finite() {
        return Err(Error::NonFiniteValue { sample, feature });
    }
    let mut report = ClampReport::default();
    let mut samples = dataset.samples().to_vec();
    for s in &mut samples {
        for (j, v) in s.values.iter_mut().enumerate() {
            *v = scale_value(*v, params.min[j], params.max[j], &mut report);
        }
    }
    Ok((dataset.with_samples(samples)?, report))
}

/// Row counts removed by each cleaning stage.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PreprocessSummary {
    pub rows_in: usize,
    pub dropped_incomplete: usize,
    pub removed_duplicates: usize,
    pub rows_out: usize,
}

/// Full cleaning pipeline: drop incomplete rows, dedupe, fit MinMax on what
/// remains, apply it. Fitting and applying on the same rows never clamps.
pub fn preprocess(dataset: &Dataset) -> Result<(Dataset, ScaleParams, PreprocessSummary)> {
    let rows_in = dataset.len();
    let (complete, dropped_incomplete) = drop_incomplete(dataset)?;
    let (unique, removed_duplicates) = dedupe(&complete)?;
    if unique.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let params = fit_minmax(&unique)?;
    let (scaled, _clamp) = apply_minmax(&unique, &params)?;
    let summary = PreprocessSummary {
        rows_in,
        dropped_incomplete,
        removed_duplicates,
        rows_out: scaled.len(),
    };
    Ok((scaled, params, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ingest_csv, Sample};
    use crate::schema::{FeatureSchema, LabelTaxonomy};
    use std::sync::Arc;

    fn schema1() -> Arc<FeatureSchema> {
        Arc::new(
            FeatureSchema::from_json(r#"[{"id": "F1", "name": "x", "group": "Memory"}]"#).unwrap(),
        )
    }

    fn schema2() -> Arc<FeatureSchema> {
        Arc::new(
            FeatureSchema::from_json(
                r#"[{"id": "F1", "name": "x", "group": "Memory"},
                    {"id": "F2", "name": "y", "group": "API"}]"#,
            )
            .unwrap(),
        )
    }

    fn taxonomy() -> Arc<LabelTaxonomy> {
        Arc::new(
            LabelTaxonomy::from_json(
                r#"{"categories": ["A", "B"],
                    "families": [{"name": "fa", "category": "A"},
                                 {"name": "fb", "category": "B"}]}"#,
            )
            .unwrap(),
        )
    }

    fn ds1(values: &[f64]) -> Dataset {
        let samples = values
            .iter()
            .map(|&v| Sample {
                id: None,
                values: vec![v],
                category: 0,
                family: 0,
            })
            .collect();
        Dataset::new(schema1(), taxonomy(), samples).unwrap()
    }

    #[test]
    fn drop_incomplete_removes_only_bad_rows() {
        let ds = ds1(&[1.0, f64::NAN, 3.0, f64::INFINITY]);
        let (out, dropped) = drop_incomplete(&ds).unwrap();
        assert_eq!(dropped, 2);
        assert_eq!(out.len(), 2);
        assert_eq!(out.samples()[0].values[0], 1.0);
        assert_eq!(out.samples()[1].values[0], 3.0);
    }

    #[test]
    fn drop_incomplete_everything_gone_is_an_error() {
        let ds = ds1(&[f64::NAN, f64::NAN]);
        assert!(matches!(drop_incomplete(&ds), Err(Error::EmptyDataset)));
    }

    #[test]
    fn drop_incomplete_is_idempotent() {
        let ds = ds1(&[1.0, f64::NAN, 3.0]);
        let (once, _) = drop_incomplete(&ds).unwrap();
        let (twice, dropped) = drop_incomplete(&once).unwrap();
        assert_eq!(dropped, 0);
        assert_eq!(once.samples(), twice.samples());
    }

    #[test]
    fn dedupe_keeps_first_of_identical_rows() {
        let csv = "x,Category,Family\n1,A,fa\n1,A,fa\n2,A,fa\n";
        let ds = ingest_csv(csv.as_bytes(), schema1(), taxonomy(), None).unwrap();
        let (out, removed) = dedupe(&ds).unwrap();
        assert_eq!(removed, 1);
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn dedupe_respects_labels() {
        // Same values, different family: different samples.
        let csv = "x,Category,Family\n1,A,fa\n1,B,fb\n";
        let ds = ingest_csv(csv.as_bytes(), schema1(), taxonomy(), None).unwrap();
        let (out, removed) = dedupe(&ds).unwrap();
        assert_eq!(removed, 0);
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn dedupe_without_duplicates_is_identity() {
        let ds = ds1(&[1.0, 2.0, 3.0]);
        let (out, removed) = dedupe(&ds).unwrap();
        assert_eq!(removed, 0);
        assert_eq!(out.samples(), ds.samples());
    }

    #[test]
    fn cleaning_filters_commute() {
        let csv = "x,Category,Family\n1,A,fa\n1,A,fa\nNaN,A,fa\n2,B,fb\nNaN,A,fa\n";
        let ds = ingest_csv(csv.as_bytes(), schema1(), taxonomy(), None).unwrap();
        let a = dedupe(&drop_incomplete(&ds).unwrap().0).unwrap().0;
        let b = drop_incomplete(&dedupe(&ds).unwrap().0).unwrap().0;
        assert_eq!(a.samples(), b.samples());
    }

    #[test]
    fn fit_minmax_basic_and_degenerate() {
        let ds = ds1(&[2.0, 4.0, 6.0]);
        let params = fit_minmax(&ds).unwrap();
        assert_eq!(params.min, vec![2.0]);
        assert_eq!(params.max, vec![6.0]);

        let constant = ds1(&[5.0, 5.0, 5.0]);
        let p = fit_minmax(&constant).unwrap();
        assert_eq!((p.min[0], p.max[0]), (5.0, 5.0));

        let single = ds1(&[3.5]);
        let p = fit_minmax(&single).unwrap();
        assert_eq!((p.min[0], p.max[0]), (3.5, 3.5));
    }

    #[test]
    fn fit_minmax_rejects_empty_and_non_finite() {
        let empty = ds1(&[]);
        assert!(matches!(fit_minmax(&empty), Err(Error::EmptyDataset)));
        let bad = ds1(&[1.0, f64::NAN]);
        assert!(matches!(fit_minmax(&bad), Err(Error::NonFiniteValue { .. })));
    }

    #[test]
    fn apply_minmax_rescales_into_unit_interval() {
        let ds = ds1(&[2.0, 4.0, 6.0]);
        let params = fit_minmax(&ds).unwrap();
        let (out, clamp) = apply_minmax(&ds, &params).unwrap();
        let vals: Vec<f64> = out.samples().iter().map(|s| s.values[0]).collect();
        assert_eq!(vals, vec![0.0, 0.5, 1.0]);
        assert_eq!(clamp.total(), 0);
    }

    #[test]
    fn apply_minmax_constant_column_maps_to_zero() {
        let ds = ds1(&[5.0, 5.0, 5.0]);
        let params = fit_minmax(&ds).unwrap();
        let (out, _) = apply_minmax(&ds, &params).unwrap();
        assert!(out.samples().iter().all(|s| s.values[0] == 0.0));
    }

    #[test]
    fn apply_minmax_clamps_out_of_range_values() {
        let train = ds1(&[2.0, 6.0]);
        let params = fit_minmax(&train).unwrap();
        let unseen = ds1(&[8.0, 1.0, 4.0]);
        let (out, clamp) = apply_minmax(&unseen, &params).unwrap();
        let vals: Vec<f64> = out.samples().iter().map(|s| s.values[0]).collect();
        assert_eq!(vals, vec![1.0, 0.0, 0.5]);
        assert_eq!(clamp.clamped_high, 1);
        assert_eq!(clamp.clamped_low, 1);
    }

    #[test]
    fn apply_minmax_checks_fingerprint() {
        let ds = ds1(&[1.0, 2.0]);
        let mut params = fit_minmax(&ds).unwrap();
        params.schema_fingerprint = "feedbeef".into();
        assert!(matches!(
            apply_minmax(&ds, &params),
            Err(Error::FingerprintMismatch { .. })
        ));
    }

    #[test]
    fn self_scaled_data_attains_both_endpoints() {
        let csv = "x,y,Category,Family\n1,10,A,fa\n3,30,A,fa\n2,20,B,fb\n";
        let ds = ingest_csv(csv.as_bytes(), schema2(), taxonomy(), None).unwrap();
        let params = fit_minmax(&ds).unwrap();
        let (out, clamp) = apply_minmax(&ds, &params).unwrap();
        assert_eq!(clamp.total(), 0);
        for j in 0..2 {
            let col: Vec<f64> = out.samples().iter().map(|s| s.values[j]).collect();
            assert!(col.iter().all(|&v| (0.0..=1.0).contains(&v)));
            assert!(col.contains(&0.0));
            assert!(col.contains(&1.0));
        }
    }

    #[test]
    fn rescaling_scaled_data_with_refit_params_is_identity() {
        let ds = ds1(&[2.0, 4.0, 6.0, 5.0]);
        let params = fit_minmax(&ds).unwrap();
        let (scaled, _) = apply_minmax(&ds, &params).unwrap();
        let refit = fit_minmax(&scaled).unwrap();
        let (rescaled, clamp) = apply_minmax(&scaled, &refit).unwrap();
        assert_eq!(clamp.total(), 0);
        for (a, b) in scaled.samples().iter().zip(rescaled.samples()) {
            assert_eq!(a.values, b.values);
        }
    }

    #[test]
    fn apply_minmax_rows_matches_dataset_path() {
        let train = ds1(&[2.0, 6.0]);
        let params = fit_minmax(&train).unwrap();
        let mut rows = vec![vec![8.0], vec![1.0], vec![4.0]];
        let clamp = apply_minmax_rows(&mut rows, &params).unwrap();
        assert_eq!(rows, vec![vec![1.0], vec![0.0], vec![0.5]]);
        assert_eq!(clamp.total(), 2);

        let mut bad = vec![vec![1.0, 2.0]];
        assert!(matches!(
            apply_minmax_rows(&mut bad, &params),
            Err(Error::SampleLengthMismatch { .. })
        ));
        let mut nan = vec![vec![f64::NAN]];
        assert!(matches!(
            apply_minmax_rows(&mut nan, &params),
            Err(Error::NonFiniteValue { .. })
        ));
    }

    #[test]
    fn full_pipeline_cleans_then_scales() {
        let csv = "x,Category,Family\n1,A,fa\n1,A,fa\nNaN,B,fb\n5,B,fb\n";
        let ds = ingest_csv(csv.as_bytes(), schema1(), taxonomy(), None).unwrap();
        let (clean, params, summary) = preprocess(&ds).unwrap();
        assert_eq!(summary.rows_in, 4);
        assert_eq!(summary.dropped_incomplete, 1);
        assert_eq!(summary.removed_duplicates, 1);
        assert_eq!(summary.rows_out, 2);
        assert_eq!(params.min, vec![1.0]);
        assert_eq!(params.max, vec![5.0]);
        let vals: Vec<f64> = clean.samples().iter().map(|s| s.values[0]).collect();
        assert_eq!(vals, vec![0.0, 1.0]);
    }

    #[test]
    fn scale_params_json_round_trip() {
        let ds = ds1(&[2.0, 6.0]);
        let params = fit_minmax(&ds).unwrap();
        let back = ScaleParams::from_json(&params.to_json()).unwrap();
        assert_eq!(back, params);
    }
}
