//! Small fixture builders shared across unit tests.

use std::sync::Arc;

use crate::data::{Dataset, Sample};
use crate::schema::{FeatureDescriptor, FeatureGroup, FeatureSchema, LabelTaxonomy};

/// A schema of `width` features named `feat_1..feat_width`, groups rotating
/// through the full roster.
pub(crate) fn schema_of(width: usize) -> Arc<FeatureSchema> {
    let features = (0..width)
        .map(|i| FeatureDescriptor {
            id: format!("F{}", i + 1),
            name: format!("feat_{}", i + 1),
            group: FeatureGroup::ALL[i % FeatureGroup::ALL.len()],
        })
        .collect();
    Arc::new(FeatureSchema::new(features).expect("fixture schema is valid"))
}

/// A taxonomy of `classes` categories `C0..C{n-1}`, each owning exactly one
/// family `C{i}.fam` (so family index == category index).
pub(crate) fn taxonomy_n(classes: usize) -> Arc<LabelTaxonomy> {
    let categories: Vec<String> = (0..classes).map(|i| format!("C{i}")).collect();
    let families: Vec<serde_json::Value> = categories
        .iter()
        .map(|c| serde_json::json!({ "name": format!("{c}.fam"), "category": c }))
        .collect();
    let doc = serde_json::json!({ "categories": categories, "families": families });
    Arc::new(LabelTaxonomy::from_json(&doc.to_string()).expect("fixture taxonomy is valid"))
}

/// Builds a dataset from raw rows and category labels. Families mirror the
/// categories one-to-one, so `Task::Category` and `Task::Family` agree.
pub(crate) fn dataset_from_rows(rows: &[Vec<f64>], labels: &[usize]) -> Dataset {
    assert_eq!(rows.len(), labels.len(), "one label per row");
    let width = rows.first().map_or(1, Vec::len);
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1).max(2);
    let samples = rows
        .iter()
        .zip(labels)
        .map(|(r, &c)| Sample {
            id: None,
            values: r.clone(),
            category: c,
            family: c,
        })
        .collect();
    Dataset::new(schema_of(width), taxonomy_n(classes), samples)
        .expect("fixture dataset is valid")
}
