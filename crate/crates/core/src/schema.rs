//! Feature schema and label taxonomy.
//!
//! The canonical schema describes the 141 dynamic-analysis features (memory,
//! API-call, network, battery, logcat and process groups) and the canonical
//! taxonomy the 14 malware categories and 180 families they break into. Both
//! are embedded in the binary; alternate documents can be loaded from JSON for
//! experiments on other feature sets.

use std::collections::HashMap;
use std::sync::Arc;

use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const CANONICAL_SCHEMA: &str = include_str!("../assets/schema.json");
const CANONICAL_TAXONOMY: &str = include_str!("../assets/taxonomy.json");

/// Feature group a descriptor belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureGroup {
    Memory,
    #[serde(rename = "API")]
    Api,
    Network,
    Battery,
    Logcat,
    Process,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 6] = [
        FeatureGroup::Memory,
        FeatureGroup::Api,
        FeatureGroup::Network,
        FeatureGroup::Battery,
        FeatureGroup::Logcat,
        FeatureGroup::Process,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureGroup::Memory => "Memory",
            FeatureGroup::Api => "API",
            FeatureGroup::Network => "Network",
            FeatureGroup::Battery => "Battery",
            FeatureGroup::Logcat => "Logcat",
            FeatureGroup::Process => "Process",
        }
    }

    fn parse(s: &str) -> Result<FeatureGroup> {
        FeatureGroup::ALL
            .iter()
            .copied()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| Error::UnknownGroup {
                group: s.to_string(),
            })
    }
}

impl std::fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One feature column: ordinal id token (`F1`, `F2`, ...), unique name, group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub id: String,
    pub name: String,
    pub group: FeatureGroup,
}

#[derive(Deserialize)]
struct RawDescriptor {
    id: String,
    name: String,
    group: String,
}

/// Ordered list of feature descriptors plus a fingerprint of the name
/// sequence. The fingerprint travels with scale parameters, rankings and
/// trained models so that artifacts produced against one column layout are
/// never silently applied to another.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSchema {
    features: Vec<FeatureDescriptor>,
    fingerprint: String,
}

fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part);
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        use std::fmt::Write;
        let _ = write!(out, "{byte:02x}");
    }
    out
}

fn fingerprint_names(names: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for name in names {
        hasher.update(name.as_bytes());
        // NUL keeps ["ab","c"] and ["a","bc"] from colliding.
        hasher.update([0u8]);
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        use std::fmt::Write;
        let _ = write!(out, "{byte:02x}");
    }
    out
}

impl FeatureSchema {
    /// Builds a schema from descriptors, enforcing uniqueness and the
    /// `F{ordinal}` id convention.
    pub fn new(features: Vec<FeatureDescriptor>) -> Result<FeatureSchema> {
        if features.is_empty() {
            return Err(Error::EmptySchema);
        }
        let mut seen: HashMap<&str, usize> = HashMap::with_capacity(features.len());
        for (pos, feat) in features.iter().enumerate() {
            if feat.name.is_empty() {
                return Err(Error::EmptyFeatureName { position: pos });
            }
            let expected = format!("F{}", pos + 1);
            if feat.id != expected {
                return Err(Error::FeatureIdMismatch {
                    id: feat.id.clone(),
                    position: pos,
                    expected,
                });
            }
            if seen.insert(feat.name.as_str(), pos).is_some() {
                return Err(Error::DuplicateFeature {
                    name: feat.name.clone(),
                });
            }
        }
        let names: Vec<&str> = features.iter().map(|f| f.name.as_str()).collect();
        let fingerprint = fingerprint_names(&names);
        Ok(FeatureSchema {
            features,
            fingerprint,
        })
    }

    /// Parses and validates a schema JSON document: either
    /// `{"features": [...]}` or a bare array of descriptors.
    pub fn from_json(doc: &str) -> Result<FeatureSchema> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum RawSchemaDoc {
            Wrapped { features: Vec<RawDescriptor> },
            Bare(Vec<RawDescriptor>),
        }
        let raw = match serde_json::from_str(doc)? {
            RawSchemaDoc::Wrapped { features } => features,
            RawSchemaDoc::Bare(features) => features,
        };
        let mut features = Vec::with_capacity(raw.len());
        for r in raw {
            features.push(FeatureDescriptor {
                id: r.id,
                name: r.name,
                group: FeatureGroup::parse(&r.group)?,
            });
        }
        FeatureSchema::new(features)
    }

    /// The embedded 141-feature schema.
    pub fn canonical() -> Arc<FeatureSchema> {
        static CANONICAL: Lazy<Arc<FeatureSchema>> = Lazy::new(|| {
            Arc::new(
                FeatureSchema::from_json(CANONICAL_SCHEMA)
                    .expect("embedded schema must be valid"),
            )
        });
        Arc::clone(&CANONICAL)
    }

    pub fn features(&self) -> &[FeatureDescriptor] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn feature(&self, ordinal: usize) -> &FeatureDescriptor {
        &self.features[ordinal]
    }

    /// Position of a feature by exact name, if present.
    pub fn position_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Restricts the schema to `ordinals` (ascending, in-range, non-empty).
    ///
    /// The projection is a new schema: features are renumbered `F1..` and the
    /// fingerprint is derived from the parent fingerprint plus the kept
    /// ordinals, so even a keep-everything projection is distinguishable from
    /// its parent.
    pub fn project(&self, ordinals: &[usize]) -> Result<FeatureSchema> {
        if ordinals.is_empty() {
            return Err(Error::EmptyMask);
        }
        let mut features = Vec::with_capacity(ordinals.len());
        for (pos, &ord) in ordinals.iter().enumerate() {
            if ord >= self.features.len() {
                return Err(Error::MaskOutOfRange {
                    ordinal: ord,
                    size: self.features.len(),
                });
            }
            let src = &self.features[ord];
            features.push(FeatureDescriptor {
                id: format!("F{}", pos + 1),
                name: src.name.clone(),
                group: src.group,
            });
        }
        let mut suffix = String::from("|mask:");
        for (i, ord) in ordinals.iter().enumerate() {
            if i > 0 {
                suffix.push(',');
            }
            use std::fmt::Write;
            let _ = write!(suffix, "{ord}");
        }
        let fingerprint = sha256_hex(&[self.fingerprint.as_bytes(), suffix.as_bytes()]);
        Ok(FeatureSchema {
            features,
            fingerprint,
        })
    }

    /// Serializes back to the wrapped JSON document form.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            features: &'a [FeatureDescriptor],
        }
        serde_json::to_string_pretty(&Doc {
            features: &self.features,
        })
        .expect("schema serialization cannot fail")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawFamily {
    name: String,
    category: String,
}

#[derive(Deserialize)]
struct RawTaxonomy {
    categories: Vec<String>,
    families: Vec<RawFamily>,
}

/// Malware category / family taxonomy with case-insensitive label lookup.
///
/// Families are nested: every family belongs to exactly one category, and a
/// sample labelled with a family must carry that family's category.
#[derive(Debug, Clone)]
pub struct LabelTaxonomy {
    categories: Vec<String>,
    /// (family name, owning category index), in document order.
    families: Vec<(String, usize)>,
    category_lookup: HashMap<String, usize>,
    family_lookup: HashMap<String, usize>,
}

impl LabelTaxonomy {
    pub fn from_json(doc: &str) -> Result<LabelTaxonomy> {
        let raw: RawTaxonomy = serde_json::from_str(doc)?;
        if raw.categories.is_empty() {
            return Err(Error::EmptyTaxonomy);
        }
        let mut category_lookup = HashMap::with_capacity(raw.categories.len());
        for (idx, name) in raw.categories.iter().enumerate() {
            if category_lookup
                .insert(name.trim().to_lowercase(), idx)
                .is_some()
            {
                return Err(Error::DuplicateCategory { name: name.clone() });
            }
        }
        let mut families = Vec::with_capacity(raw.families.len());
        let mut family_lookup = HashMap::with_capacity(raw.families.len());
        for fam in &raw.families {
            let cat_idx = *category_lookup
                .get(&fam.category.trim().to_lowercase())
                .ok_or_else(|| Error::UnknownCategory {
                    name: fam.category.clone(),
                })?;
            if family_lookup
                .insert(fam.name.trim().to_lowercase(), families.len())
                .is_some()
            {
                return Err(Error::DuplicateFamily {
                    name: fam.name.clone(),
                });
            }
            families.push((fam.name.clone(), cat_idx));
        }
        Ok(LabelTaxonomy {
            categories: raw.categories,
            families,
            category_lookup,
            family_lookup,
        })
    }

    /// The embedded 14-category / 180-family taxonomy.
    pub fn canonical() -> Arc<LabelTaxonomy> {
        static CANONICAL: Lazy<Arc<LabelTaxonomy>> = Lazy::new(|| {
            Arc::new(
                LabelTaxonomy::from_json(CANONICAL_TAXONOMY)
                    .expect("embedded taxonomy must be valid"),
            )
        });
        Arc::clone(&CANONICAL)
    }

    pub fn category_count(&self) -> usize {
        self.categories.len()
    }

    pub fn family_count(&self) -> usize {
        self.families.len()
    }

    pub fn category_name(&self, idx: usize) -> &str {
        &self.categories[idx]
    }

    pub fn family_name(&self, idx: usize) -> &str {
        &self.families[idx].0
    }

    /// Owning category of a family.
    pub fn category_of_family(&self, family_idx: usize) -> usize {
        self.families[family_idx].1
    }

    pub fn category_names(&self) -> Vec<String> {
        self.categories.clone()
    }

    pub fn family_names(&self) -> Vec<String> {
        self.families.iter().map(|(n, _)| n.clone()).collect()
    }

    /// Case-insensitive, whitespace-trimmed category lookup.
    pub fn resolve_category(&self, label: &str) -> Result<usize> {
        self.category_lookup
            .get(&label.trim().to_lowercase())
            .copied()
            .ok_or_else(|| Error::UnknownCategory {
                name: label.to_string(),
            })
    }

    /// Case-insensitive, whitespace-trimmed family lookup.
    pub fn resolve_family(&self, label: &str) -> Result<usize> {
        self.family_lookup
            .get(&label.trim().to_lowercase())
            .copied()
            .ok_or_else(|| Error::UnknownFamily {
                name: label.to_string(),
            })
    }

    pub fn to_json(&self) -> String {
        let raw = RawTaxonomy {
            categories: self.categories.clone(),
            families: self
                .families
                .iter()
                .map(|(name, cat)| RawFamily {
                    name: name.clone(),
                    category: self.categories[*cat].clone(),
                })
                .collect(),
        };
        #[derive(Serialize)]
        struct Doc<'a> {
            categories: &'a [String],
            families: &'a [RawFamily],
        }
        serde_json::to_string_pretty(&Doc {
            categories: &raw.categories,
            families: &raw.families,
        })
        .expect("taxonomy serialization cannot fail")
    }
}
