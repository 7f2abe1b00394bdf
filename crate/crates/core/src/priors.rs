//! Prior files, the regularization target vector, and prompt generation.
//!
//! A prior file is JSON of the form
//!
//! ```json
//! {
//!   "provenance": "gpt-4, 2023-09-20",
//!   "columns": {
//!     "Glucose": {"correlation": 1},
//!     "ChestPainType": {"ordering": ["TA", "ATA", "NAP", "ASY"]}
//!   }
//! }
//! ```
//!
//! Orderings list categories most-influential-first; combined with the
//! rank-0-maps-to-0 ordinal encoding this means higher encoded values are
//! less influential, so an ordering without an explicit `correlation` implies
//! a prior sign of -1. Add `"correlation"` next to the ordering to override.
//! Columns absent from the file default to no correlation. An ambiguous LLM
//! answer should be transcribed as correlation 0; the optional
//! `"raw_response"` field keeps the answer text for audit.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{validate_permutation, ColumnKind, EncodedKind, EncodedMatrix, Schema};
use crate::error::{Error, Result};

/// The prior for one column: a correlation sign, a category ordering, or
/// both.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PriorEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation: Option<i8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordering: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_response: Option<String>,
}

/// Validated per-column priors plus a free-text provenance note.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    #[serde(default)]
    pub provenance: String,
    #[serde(default)]
    pub columns: BTreeMap<String, PriorEntry>,
}

impl PriorSpec {
    pub fn validate(&self, schema: &Schema) -> Result<()> {
        for (name, entry) in &self.columns {
            let col = schema.column(name).ok_or_else(|| Error::InvalidPrior {
                column: name.clone(),
                detail: "column not in schema".into(),
            })?;
            if let Some(c) = entry.correlation {
                if !matches!(c, -1 | 0 | 1) {
                    return Err(Error::InvalidPrior {
                        column: name.clone(),
                        detail: format!("correlation {c} outside {{-1, 0, 1}}"),
                    });
                }
            }
            if let Some(ordering) = &entry.ordering {
                if col.kind != ColumnKind::Categorical {
                    return Err(Error::InvalidPrior {
                        column: name.clone(),
                        detail: "ordering given for a non-categorical column".into(),
                    });
                }
                validate_permutation(name, ordering, &col.categories)?;
            }
            if entry.correlation.is_none() && entry.ordering.is_none() {
                return Err(Error::InvalidPrior {
                    column: name.clone(),
                    detail: "entry has neither correlation nor ordering".into(),
                });
            }
        }
        Ok(())
    }

    /// Category rankings for [`crate::data::encode_table`].
    pub fn orderings(&self) -> BTreeMap<String, Vec<String>> {
        self.columns
            .iter()
            .filter_map(|(name, e)| e.ordering.clone().map(|o| (name.clone(), o)))
            .collect()
    }

    /// The declared sign for a column, applying the ordering-implies(-1)
    /// convention.
    fn sign_for(&self, column: &str) -> f64 {
        match self.columns.get(column) {
            Some(entry) => match (entry.correlation, &entry.ordering) {
                (Some(c), _) => c as f64,
                (None, Some(_)) => -1.0,
                (None, None) => 0.0,
            },
            None => 0.0,
        }
    }
}

/// Loads and validates a prior file against a schema.
pub fn load_prior_file(path: impl AsRef<Path>, schema: &Schema) -> Result<PriorSpec> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let spec: PriorSpec =
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
    spec.validate(schema)?;
    Ok(spec)
}

/// Expands a prior spec into one regularization target per encoded column:
/// continuous and ordinal columns get their declared sign (ordinal columns
/// with only an ordering get -1), one-hot columns get 0.
pub fn prior_vector(spec: &PriorSpec, matrix: &EncodedMatrix) -> Vec<f64> {
    matrix
        .column_map
        .iter()
        .map(|enc| match enc.kind {
            EncodedKind::Onehot { .. } => 0.0,
            EncodedKind::Continuous | EncodedKind::Ordinal { .. } => spec.sign_for(&enc.source),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Prompt generation
// ---------------------------------------------------------------------------

/// Human-readable dataset descriptions used to instantiate the query
/// templates. `categories` maps a categorical column to its category display
/// names in schema order.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub goal: String,
    pub label_description: String,
    pub domains: Vec<String>,
    pub column_descriptions: BTreeMap<String, String>,
    pub target_description: String,
    #[serde(default)]
    pub categories: BTreeMap<String, Vec<String>>,
}

impl DatasetMeta {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    fn description(&self, column: &str) -> Result<&str> {
        self.column_descriptions
            .get(column)
            .map(|s| s.as_str())
            .ok_or_else(|| Error::MissingMeta {
                column: column.to_string(),
                what: "a column description".into(),
            })
    }
}

/// The correlation-sign query for a continuous column.
pub fn generate_correlation_prompt(meta: &DatasetMeta, column: &str) -> Result<String> {
    let description = meta.description(column)?;
    if meta.goal.is_empty() {
        log::warn!("dataset goal is empty; prompt for {column:?} will have a blank slot");
    }
    Ok(format!(
        "I'm creating a system to {goal}. There are many factors that determine if \
         {label}, but I am interested in averaging over the unknown factors. Keep your \
         answers short. Based on your domain knowledge of {domains}, does {description} \
         positively or negatively correlate with the probability of {target}?",
        goal = meta.goal,
        label = meta.label_description,
        domains = meta.domains.join(", "),
        description = description,
        target = meta.target_description,
    ))
}

/// The category-ranking query for a categorical column; the final line lists
/// the category display names, comma-separated, in schema order.
pub fn generate_ordering_prompt(meta: &DatasetMeta, column: &str) -> Result<String> {
    let description = meta.description(column)?;
    let categories = meta
        .categories
        .get(column)
        .filter(|c| !c.is_empty())
        .ok_or_else(|| Error::MissingMeta {
            column: column.to_string(),
            what: "category display names".into(),
        })?;
    if meta.goal.is_empty() {
        log::warn!("dataset goal is empty; prompt for {column:?} will have a blank slot");
    }
    Ok(format!(
        "I'm creating a system to {goal}. There are many factors that determine if \
         {label}, but I am interested in averaging over the unknown factors. Keep your \
         answers short. Based on your domain knowledge of {domains}, rank the following \
         {description} by how likely they are to influence {target}:\n{list}",
        goal = meta.goal,
        label = meta.label_description,
        domains = meta.domains.join(", "),
        description = description,
        target = meta.target_description,
        list = categories.join(", "),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{encode_table, CellValue, ColumnSchema, DatasetTable, Encoding};
    use std::io::Write;

    fn heart_schema() -> Schema {
        Schema {
            target: "HeartDisease".into(),
            columns: vec![
                ColumnSchema {
                    name: "Glucose".into(),
                    kind: ColumnKind::Continuous,
                    categories: vec![],
                },
                ColumnSchema {
                    name: "ChestPainType".into(),
                    kind: ColumnKind::Categorical,
                    categories: vec!["TA".into(), "ATA".into(), "NAP".into(), "ASY".into()],
                },
            ],
        }
    }

    fn write_priors(json: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(json.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_prior_file_accepts_correlations() {
        let f = write_priors(r#"{"provenance": "test", "columns": {"Glucose": {"correlation": 1}}}"#);
        let spec = load_prior_file(f.path(), &heart_schema()).unwrap();
        assert_eq!(spec.columns["Glucose"].correlation, Some(1));
        assert_eq!(spec.sign_for("Glucose"), 1.0);
    }

    #[test]
    fn empty_prior_file_means_all_zero() {
        let f = write_priors(r#"{}"#);
        let spec = load_prior_file(f.path(), &heart_schema()).unwrap();
        assert!(spec.columns.is_empty());
        assert_eq!(spec.sign_for("Glucose"), 0.0);
    }

    #[test]
    fn load_prior_file_rejects_bad_entries() {
        let schema = heart_schema();
        let f = write_priors(r#"{"columns": {"ChestPainType": {"ordering": ["TA","ATA","NAP"]}}}"#);
        assert!(matches!(
            load_prior_file(f.path(), &schema).unwrap_err(),
            Error::InvalidPrior { .. }
        ));
        let f = write_priors(r#"{"columns": {"Glucose": {"correlation": 2}}}"#);
        assert!(load_prior_file(f.path(), &schema).is_err());
        let f = write_priors(r#"{"columns": {"Mystery": {"correlation": 1}}}"#);
        assert!(load_prior_file(f.path(), &schema).is_err());
    }

    #[test]
    fn validation_is_idempotent() {
        let f = write_priors(
            r#"{"columns": {"Glucose": {"correlation": 1},
                "ChestPainType": {"ordering": ["TA","ATA","NAP","ASY"]}}}"#,
        );
        let schema = heart_schema();
        let spec = load_prior_file(f.path(), &schema).unwrap();
        spec.validate(&schema).unwrap();
        spec.validate(&schema).unwrap();
    }

    fn demo_table() -> DatasetTable {
        DatasetTable {
            schema: vec![
                ColumnSchema {
                    name: "Glucose".into(),
                    kind: ColumnKind::Continuous,
                    categories: vec![],
                },
                ColumnSchema {
                    name: "ChestPainType".into(),
                    kind: ColumnKind::Categorical,
                    categories: vec!["TA".into(), "ATA".into(), "NAP".into(), "ASY".into()],
                },
                ColumnSchema {
                    name: "BMI".into(),
                    kind: ColumnKind::Continuous,
                    categories: vec![],
                },
            ],
            target_name: "y".into(),
            rows: vec![
                vec![CellValue::Number(1.0), CellValue::Category(0), CellValue::Number(20.0)],
                vec![CellValue::Number(2.0), CellValue::Category(3), CellValue::Number(30.0)],
            ],
            target: vec![0, 1],
        }
    }

    #[test]
    fn prior_vector_expansion_rule() {
        let table = demo_table();
        let spec = PriorSpec {
            provenance: String::new(),
            columns: BTreeMap::from([
                (
                    "Glucose".to_string(),
                    PriorEntry {
                        correlation: Some(1),
                        ..Default::default()
                    },
                ),
                (
                    "ChestPainType".to_string(),
                    PriorEntry {
                        ordering: Some(vec!["TA".into(), "ATA".into(), "NAP".into(), "ASY".into()]),
                        ..Default::default()
                    },
                ),
            ]),
        };
        let matrix = encode_table(&table, Encoding::Ordered, Some(&spec.orderings())).unwrap();
        assert_eq!(prior_vector(&spec, &matrix), vec![1.0, -1.0, 0.0]);

        let zero = PriorSpec::default();
        assert_eq!(prior_vector(&zero, &matrix), vec![0.0; 3]);

        let onehot = encode_table(&table, Encoding::Onehot, None).unwrap();
        let v = prior_vector(&spec, &onehot);
        assert_eq!(v.len(), onehot.n_cols());
        // One-hot columns are zero regardless of the entry.
        for (enc, &value) in onehot.column_map.iter().zip(&v) {
            if matches!(enc.kind, EncodedKind::Onehot { .. }) {
                assert_eq!(value, 0.0);
            }
        }
        assert!(v.iter().all(|x| [-1.0, 0.0, 1.0].contains(x)));
    }

    #[test]
    fn explicit_correlation_overrides_ordering_sign() {
        let spec = PriorSpec {
            provenance: String::new(),
            columns: BTreeMap::from([(
                "ChestPainType".to_string(),
                PriorEntry {
                    correlation: Some(1),
                    ordering: Some(vec!["TA".into(), "ATA".into(), "NAP".into(), "ASY".into()]),
                    ..Default::default()
                },
            )]),
        };
        assert_eq!(spec.sign_for("ChestPainType"), 1.0);
    }

    fn diabetes_meta() -> DatasetMeta {
        DatasetMeta {
            goal: "diagnostically predict whether or not a patient has diabetes, based on \
                   certain diagnostic measurements included in the dataset"
                .into(),
            label_description: "the person will have diabetes".into(),
            domains: vec!["medicine".into()],
            column_descriptions: BTreeMap::from([(
                "Glucose".to_string(),
                "a person's level of plasma glucose concentration 2 hours after an oral \
                 glucose tolerance test"
                    .to_string(),
            )]),
            target_description: "that person having diabetes".into(),
            categories: BTreeMap::new(),
        }
    }

    #[test]
    fn correlation_prompt_matches_template() {
        let prompt = generate_correlation_prompt(&diabetes_meta(), "Glucose").unwrap();
        assert!(prompt.starts_with(
            "I'm creating a system to diagnostically predict whether or not a patient has diabetes"
        ));
        assert!(prompt.contains("Keep your answers short."));
        assert!(prompt.ends_with(
            "positively or negatively correlate with the probability of that person having diabetes?"
        ));
    }

    #[test]
    fn correlation_prompt_requires_description() {
        assert!(matches!(
            generate_correlation_prompt(&diabetes_meta(), "BMI").unwrap_err(),
            Error::MissingMeta { .. }
        ));
    }

    #[test]
    fn ordering_prompt_lists_categories_in_schema_order() {
        let mut meta = DatasetMeta {
            goal: "build an early detection system for heart failure".into(),
            label_description: "a person will experience heart failure".into(),
            domains: vec!["medicine".into()],
            column_descriptions: BTreeMap::from([(
                "ChestPainType".to_string(),
                "chest pain types".to_string(),
            )]),
            target_description: "heart failure".into(),
            categories: BTreeMap::from([(
                "ChestPainType".to_string(),
                vec![
                    "Typical Angina".to_string(),
                    "Atypical Angina".to_string(),
                    "Non-Anginal Pain".to_string(),
                    "Asymptomatic".to_string(),
                ],
            )]),
        };
        let prompt = generate_ordering_prompt(&meta, "ChestPainType").unwrap();
        assert!(prompt.contains("rank the following chest pain types"));
        assert!(prompt.ends_with(
            "Typical Angina, Atypical Angina, Non-Anginal Pain, Asymptomatic"
        ));
        // Prompt generation is a pure function of (meta, column).
        assert_eq!(prompt, generate_ordering_prompt(&meta, "ChestPainType").unwrap());

        let two = vec!["Yes".to_string(), "No".to_string()];
        meta.categories.insert("ChestPainType".into(), two);
        let prompt = generate_ordering_prompt(&meta, "ChestPainType").unwrap();
        assert!(prompt.ends_with("Yes, No"));

        meta.categories.insert("ChestPainType".into(), vec![]);
        assert!(matches!(
            generate_ordering_prompt(&meta, "ChestPainType").unwrap_err(),
            Error::MissingMeta { .. }
        ));
    }
}
