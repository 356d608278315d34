//! Dataset container, CSV ingest/serialization and synthetic data.
//!
//! A dataset is a list of samples bound to a [`FeatureSchema`] and a
//! [`LabelTaxonomy`]. Every sample carries both labels of the two
//! classification tasks: its malware category and its family, and the family
//! must belong to the category. Values are `f64`; non-finite entries are
//! permitted at ingest time (they represent failed measurements) and are
//! removed by preprocessing before anything downstream runs.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{FeatureSchema, LabelTaxonomy};

/// Which label a model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Category,
    Family,
}

impl Task {
    /// Label index of `sample` under this task.
    pub fn label_of(self, sample: &Sample) -> usize {
        match self {
            Task::Category => sample.category,
            Task::Family => sample.family,
        }
    }

    pub fn class_count(self, taxonomy: &LabelTaxonomy) -> usize {
        match self {
            Task::Category => taxonomy.category_count(),
            Task::Family => taxonomy.family_count(),
        }
    }

    pub fn class_name(self, taxonomy: &LabelTaxonomy, idx: usize) -> String {
        match self {
            Task::Category => taxonomy.category_name(idx).to_string(),
            Task::Family => taxonomy.family_name(idx).to_string(),
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Task::Category => f.write_str("category"),
            Task::Family => f.write_str("family"),
        }
    }
}

/// One labelled observation: feature vector plus category and family indices
/// into the owning taxonomy.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: Option<String>,
    pub values: Vec<f64>,
    pub category: usize,
    pub family: usize,
}

/// Bit-exact identity key of a sample's payload (values and labels; the id is
/// deliberately excluded so renamed duplicates still collapse).
pub(crate) fn sample_key(sample: &Sample) -> (Vec<u64>, usize, usize) {
    (
        sample.values.iter().map(|v| v.to_bits()).collect(),
        sample.category,
        sample.family,
    )
}

#[derive(Debug, Clone)]
pub struct Dataset {
    schema: Arc<FeatureSchema>,
    taxonomy: Arc<LabelTaxonomy>,
    samples: Vec<Sample>,
}

impl Dataset {
    /// Builds a dataset, checking vector widths, label ranges and
    /// family/category agreement. Empty sample lists are allowed here — they
    /// fall out of filters — but most consumers reject them.
    pub fn new(
        schema: Arc<FeatureSchema>,
        taxonomy: Arc<LabelTaxonomy>,
        samples: Vec<Sample>,
    ) -> Result<Dataset> {
        for (idx, s) in samples.iter().enumerate() {
            if s.values.len() != schema.len() {
                return Err(Error::SampleLengthMismatch {
                    index: idx,
                    expected: schema.len(),
                    found: s.values.len(),
                });
            }
            if s.category >= taxonomy.category_count() {
                return Err(Error::UnknownLabel {
                    label: s.category,
                    classes: taxonomy.category_count(),
                });
            }
            if s.family >= taxonomy.family_count() {
                return Err(Error::UnknownLabel {
                    label: s.family,
                    classes: taxonomy.family_count(),
                });
            }
            let owner = taxonomy.category_of_family(s.family);
            if owner != s.category {
                return Err(Error::FamilyCategoryMismatch {
                    family: taxonomy.family_name(s.family).to_string(),
                    expected: taxonomy.category_name(owner).to_string(),
                    found: taxonomy.category_name(s.category).to_string(),
                });
            }
        }
        Ok(Dataset {
            schema,
            taxonomy,
            samples,
        })
    }

    pub fn schema(&self) -> &Arc<FeatureSchema> {
        &self.schema
    }

    pub fn taxonomy(&self) -> &Arc<LabelTaxonomy> {
        &self.taxonomy
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Replaces the sample list (used by preprocessing filters). The new list
    /// is re-validated against schema and taxonomy.
    pub fn with_samples(&self, samples: Vec<Sample>) -> Result<Dataset> {
        Dataset::new(Arc::clone(&self.schema), Arc::clone(&self.taxonomy), samples)
    }

    /// Per-class sample counts under `task` (length = number of classes).
    pub fn class_counts(&self, task: Task) -> Vec<usize> {
        let mut counts = vec![0usize; task.class_count(&self.taxonomy)];
        for s in &self.samples {
            counts[task.label_of(s)] += 1;
        }
        counts
    }

    /// True when every value of every sample is finite.
    pub fn all_finite(&self) -> bool {
        self.samples
            .iter()
            .all(|s| s.values.iter().all(|v| v.is_finite()))
    }

    /// First (sample, feature) holding a non-finite value, if any.
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        for (i, s) in self.samples.iter().enumerate() {
            if let Some(j) = s.values.iter().position(|v| !v.is_finite()) {
                return Some((i, j));
            }
        }
        None
    }
}

/// Optional header translation for external CSVs: maps the column names found
/// in the file to canonical names (feature names, `Category`, `Family`,
/// `SampleId`). Columns not mentioned pass through unchanged.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ColumnMap(pub HashMap<String, String>);

impl ColumnMap {
    pub fn from_json(doc: &str) -> Result<ColumnMap> {
        Ok(ColumnMap(serde_json::from_str(doc)?))
    }

    fn resolve<'a>(&'a self, raw: &'a str) -> &'a str {
        self.0.get(raw).map(String::as_str).unwrap_or(raw)
    }
}

const COL_SAMPLE_ID: &str = "SampleId";
const COL_CATEGORY: &str = "Category";
const COL_FAMILY: &str = "Family";

struct HeaderLayout {
    /// Column index per schema feature ordinal.
    feature_cols: Vec<usize>,
    sample_id_col: Option<usize>,
    category_col: Option<usize>,
    family_col: Option<usize>,
}

fn resolve_header(
    headers: &csv::StringRecord,
    schema: &FeatureSchema,
    column_map: Option<&ColumnMap>,
    want_labels: bool,
) -> Result<HeaderLayout> {
    let identity = ColumnMap::default();
    let map = column_map.unwrap_or(&identity);
    let mut feature_cols = vec![usize::MAX; schema.len()];
    let mut sample_id_col = None;
    let mut category_col = None;
    let mut family_col = None;
    for (col, raw) in headers.iter().enumerate() {
        let name = map.resolve(raw.trim());
        match name {
            COL_SAMPLE_ID => {
                if sample_id_col.replace(col).is_some() {
                    return Err(Error::HeaderMismatch {
                        detail: format!("column {COL_SAMPLE_ID:?} appears twice"),
                    });
                }
            }
            COL_CATEGORY => {
                if category_col.replace(col).is_some() {
                    return Err(Error::HeaderMismatch {
                        detail: format!("column {COL_CATEGORY:?} appears twice"),
                    });
                }
            }
            COL_FAMILY => {
                if family_col.replace(col).is_some() {
                    return Err(Error::HeaderMismatch {
                        detail: format!("column {COL_FAMILY:?} appears twice"),
                    });
                }
            }
            other => {
                let ord = schema.position_of(other).ok_or_else(|| Error::HeaderMismatch {
                    detail: format!("unrecognized column {raw:?}"),
                })?;
                if feature_cols[ord] != usize::MAX {
                    return Err(Error::HeaderMismatch {
                        detail: format!("feature column {other:?} appears twice"),
                    });
                }
                feature_cols[ord] = col;
            }
        }
    }
    if let Some(missing) = feature_cols.iter().position(|&c| c == usize::MAX) {
        return Err(Error::HeaderMismatch {
            detail: format!(
                "missing feature column {:?}",
                schema.feature(missing).name
            ),
        });
    }
    if want_labels {
        if category_col.is_none() {
            return Err(Error::HeaderMismatch {
                detail: format!("missing column {COL_CATEGORY:?}"),
            });
        }
        if family_col.is_none() {
            return Err(Error::HeaderMismatch {
                detail: format!("missing column {COL_FAMILY:?}"),
            });
        }
    } else if category_col.is_some() || family_col.is_some() {
        // Feature-only readers tolerate label columns; they are just ignored.
    }
    Ok(HeaderLayout {
        feature_cols,
        sample_id_col,
        category_col,
        family_col,
    })
}

/// Parses one numeric cell. Empty cells and the spellings `NaN`/`nan`/`NAN`
/// denote a missing measurement and map to `f64::NAN`.
fn parse_cell(raw: &str, row: usize, column: &str) -> Result<f64> {
    let t = raw.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("nan") {
        return Ok(f64::NAN);
    }
    t.parse::<f64>().map_err(|_| Error::BadCell {
        row,
        column: column.to_string(),
        value: raw.to_string(),
    })
}

/// Reads a labelled CSV into a dataset.
///
/// The header must contain every schema feature name exactly once (any column
/// order, optionally translated through `column_map`) plus `Category` and
/// `Family`; a `SampleId` column is optional. Label cells are matched
/// case-insensitively after trimming. Row numbers in errors are 1-based data
/// rows, header excluded.
pub fn ingest_csv<R: Read>(
    reader: R,
    schema: Arc<FeatureSchema>,
    taxonomy: Arc<LabelTaxonomy>,
    column_map: Option<&ColumnMap>,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let layout = resolve_header(rdr.headers()?, &schema, column_map, true)?;
    let category_col = layout.category_col.expect("checked by resolve_header");
    let family_col = layout.family_col.expect("checked by resolve_header");

    let mut samples = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let mut values = Vec::with_capacity(schema.len());
        for (ord, &col) in layout.feature_cols.iter().enumerate() {
            let raw = record.get(col).ok_or(Error::BadRowLength {
                row,
                expected: layout.feature_cols.len(),
                found: record.len(),
            })?;
            values.push(parse_cell(raw, row, &schema.feature(ord).name)?);
        }
        let raw_family = record.get(family_col).unwrap_or("");
        let family = taxonomy.resolve_family(raw_family)?;
        let raw_category = record.get(category_col).unwrap_or("");
        let category = taxonomy.resolve_category(raw_category)?;
        let owner = taxonomy.category_of_family(family);
        if owner != category {
            return Err(Error::FamilyCategoryMismatch {
                family: taxonomy.family_name(family).to_string(),
                expected: taxonomy.category_name(owner).to_string(),
                found: taxonomy.category_name(category).to_string(),
            });
        }
        let id = layout
            .sample_id_col
            .and_then(|c| record.get(c))
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string);
        samples.push(Sample {
            id,
            values,
            category,
            family,
        });
    }
    Dataset::new(schema, taxonomy, samples)
}

/// Reads a feature-only CSV (no labels required; `Category`/`Family` columns
/// are ignored if present). Returns per-row optional ids and value vectors in
/// schema order.
pub fn ingest_features_csv<R: Read>(
    reader: R,
    schema: &FeatureSchema,
    column_map: Option<&ColumnMap>,
) -> Result<(Vec<Option<String>>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let layout = resolve_header(rdr.headers()?, schema, column_map, false)?;
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let mut values = Vec::with_capacity(schema.len());
        for (ord, &col) in layout.feature_cols.iter().enumerate() {
            let raw = record.get(col).ok_or(Error::BadRowLength {
                row,
                expected: layout.feature_cols.len(),
                found: record.len(),
            })?;
            values.push(parse_cell(raw, row, &schema.feature(ord).name)?);
        }
        ids.push(
            layout
                .sample_id_col
                .and_then(|c| record.get(c))
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string),
        );
        rows.push(values);
    }
    Ok((ids, rows))
}

fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        // `Display` for f64 is shortest-round-trip: parsing the text gives
        // back the identical bits, so ingest(write(d)) == d holds exactly.
        format!("{v}")
    }
}

/// Writes a dataset as CSV in canonical column order: optional `SampleId`,
/// features in schema order, `Category`, `Family`. The id column is emitted
/// only when at least one sample carries an id.
pub fn write_csv<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().from_writer(writer);
    let schema = dataset.schema();
    let taxonomy = dataset.taxonomy();
    let with_ids = dataset.samples().iter().any(|s| s.id.is_some());
    let mut header = Vec::with_capacity(schema.len() + 3);
    if with_ids {
        header.push(COL_SAMPLE_ID.to_string());
    }
    header.extend(schema.features().iter().map(|f| f.name.clone()));
    header.push(COL_CATEGORY.to_string());
    header.push(COL_FAMILY.to_string());
    wtr.write_record(&header)?;
    for s in dataset.samples() {
        let mut record = Vec::with_capacity(header.len());
        if with_ids {
            record.push(s.id.clone().unwrap_or_default());
        }
        record.extend(s.values.iter().map(|&v| format_value(v)));
        record.push(taxonomy.category_name(s.category).to_string());
        record.push(taxonomy.family_name(s.family).to_string());
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Summary statistics over a dataset, suitable for JSON output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub samples: usize,
    pub features: usize,
    pub schema_fingerprint: String,
    pub category_counts: Vec<LabelCount>,
    /// Families with at least one sample.
    pub family_counts: Vec<LabelCount>,
    pub families_present: usize,
    pub rows_with_non_finite: usize,
    pub non_finite_cells: usize,
    pub duplicate_rows: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelCount {
    pub name: String,
    pub count: usize,
}

/// Computes per-label counts, missing-value and duplicate statistics.
pub fn validate_dataset(dataset: &Dataset) -> ValidationReport {
    let taxonomy = dataset.taxonomy();
    let cat_counts = dataset.class_counts(Task::Category);
    let fam_counts = dataset.class_counts(Task::Family);
    let mut rows_with_non_finite = 0;
    let mut non_finite_cells = 0;
    for s in dataset.samples() {
        let bad = s.values.iter().filter(|v| !v.is_finite()).count();
        if bad > 0 {
            rows_with_non_finite += 1;
            non_finite_cells += bad;
        }
    }
    let mut seen = std::collections::HashSet::with_capacity(dataset.len());
    let mut duplicate_rows = 0;
    for s in dataset.samples() {
        if !seen.insert(sample_key(s)) {
            duplicate_rows += 1;
        }
    }
    ValidationReport {
        samples: dataset.len(),
        features: dataset.schema().len(),
        schema_fingerprint: dataset.schema().fingerprint().to_string(),
        category_counts: cat_counts
            .iter()
            .enumerate()
            .map(|(i, &count)| LabelCount {
                name: taxonomy.category_name(i).to_string(),
                count,
            })
            .collect(),
        family_counts: fam_counts
            .iter()
            .enumerate()
            .filter(|&(_, &count)| count > 0)
            .map(|(i, &count)| LabelCount {
                name: taxonomy.family_name(i).to_string(),
                count,
            })
            .collect(),
        families_present: fam_counts.iter().filter(|&&c| c > 0).count(),
        rows_with_non_finite,
        non_finite_cells,
        duplicate_rows,
    }
}

/// Recipe for a deterministic synthetic dataset.
///
/// Classes are the first `classes` taxonomy categories; each sample of class
/// `c` draws informative features from `Normal(c * class_separation,
/// noise_scale)` and the remaining features from `Normal(0, noise_scale)`.
/// After generation every feature is shifted so its minimum is nonnegative,
/// matching the value range of real measurement data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub samples_per_class: usize,
    /// Feature ordinals that carry class signal; the rest are pure noise.
    pub informative: Vec<usize>,
    pub class_separation: f64,
    pub noise_scale: f64,
    pub seed: u64,
}

pub fn generate_synthetic(
    spec: &SyntheticSpec,
    schema: Arc<FeatureSchema>,
    taxonomy: Arc<LabelTaxonomy>,
) -> Result<Dataset> {
    if spec.classes == 0 || spec.classes > taxonomy.category_count() {
        return Err(Error::InvalidSyntheticSpec {
            detail: format!(
                "classes must be 1..={}, got {}",
                taxonomy.category_count(),
                spec.classes
            ),
        });
    }
    if spec.samples_per_class == 0 {
        return Err(Error::InvalidSyntheticSpec {
            detail: "samples_per_class must be at least 1".to_string(),
        });
    }
    if !spec.class_separation.is_finite() || !spec.noise_scale.is_finite() {
        return Err(Error::InvalidSyntheticSpec {
            detail: "class_separation and noise_scale must be finite".to_string(),
        });
    }
    if spec.noise_scale < 0.0 {
        return Err(Error::InvalidSyntheticSpec {
            detail: "noise_scale must be nonnegative".to_string(),
        });
    }
    let mut informative = vec![false; schema.len()];
    for &ord in &spec.informative {
        if ord >= schema.len() {
            return Err(Error::InvalidSyntheticSpec {
                detail: format!(
                    "informative ordinal {ord} out of range for {} features",
                    schema.len()
                ),
            });
        }
        informative[ord] = true;
    }
    // Each class is labelled with the first family of its category so the
    // family task is well-defined on synthetic data too.
    let mut first_family = vec![None; taxonomy.category_count()];
    for fam in 0..taxonomy.family_count() {
        let cat = taxonomy.category_of_family(fam);
        if first_family[cat].is_none() {
            first_family[cat] = Some(fam);
        }
    }
    for c in 0..spec.classes {
        if first_family[c].is_none() {
            return Err(Error::InvalidSyntheticSpec {
                detail: format!(
                    "category {:?} has no family to label samples with",
                    taxonomy.category_name(c)
                ),
            });
        }
    }

    let noise = Normal::new(0.0, spec.noise_scale).map_err(|e| Error::InvalidSyntheticSpec {
        detail: format!("bad noise distribution: {e}"),
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut samples = Vec::with_capacity(spec.classes * spec.samples_per_class);
    for c in 0..spec.classes {
        let family = first_family[c].expect("checked above");
        for s in 0..spec.samples_per_class {
            let mut values = Vec::with_capacity(schema.len());
            for (ord, &inf) in informative.iter().enumerate() {
                let _ = ord;
                let mean = if inf {
                    c as f64 * spec.class_separation
                } else {
                    0.0
                };
                values.push(mean + noise.sample(&mut rng));
            }
            samples.push(Sample {
                id: Some(format!("syn-{c}-{s}")),
                values,
                category: c,
                family,
            });
        }
    }
    // Shift every feature so its minimum is >= 0.
    for ord in 0..schema.len() {
        let min = samples
            .iter()
            .map(|s| s.values[ord])
            .fold(f64::INFINITY, f64::min);
        if min < 0.0 {
            for s in &mut samples {
                s.values[ord] -= min;
            }
        }
    }
    Dataset::new(schema, taxonomy, samples)
}
