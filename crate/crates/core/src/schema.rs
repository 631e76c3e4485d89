//! Declarative cohort schema: predictor features with their kinds, label
//! columns, and the stage code map. Loaded from a JSON config file.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ingest::Stage;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Ordinal,
    Nominal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDef {
    pub name: String,
    pub kind: FeatureKind,
}

/// Names of the three outcome-bearing columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelColumns {
    pub vital_status: String,
    pub survival_months: String,
    pub cause_of_death: String,
}

/// Cohort schema mirroring the predictor table: an ordered feature list,
/// label columns, the stage column with its code map, and the cancer type
/// whose deaths count as events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub cancer_type: String,
    pub features: Vec<FeatureDef>,
    pub label_columns: LabelColumns,
    pub stage_column: String,
    /// Raw stage-column values mapped to the three summary stages.
    /// Unmapped codes are hard errors during the stage split.
    pub stage_map: BTreeMap<String, Stage>,
    /// Cause-of-death values that count as death from `cancer_type`.
    /// Empty means "exactly `cancer_type`".
    #[serde(default)]
    pub cause_codes: Vec<String>,
}

impl FeatureSchema {
    pub fn from_json(text: &str) -> Result<Self> {
        let schema: FeatureSchema = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::InvalidSchema(
                "at least one predictor feature is required".into(),
            ));
        }
        let mut seen = HashSet::new();
        for feature in &self.features {
            if !seen.insert(feature.name.as_str()) {
                return Err(Error::InvalidSchema(format!(
                    "duplicate feature name '{}'",
                    feature.name
                )));
            }
        }
        let reserved = [
            self.label_columns.vital_status.as_str(),
            self.label_columns.survival_months.as_str(),
            self.label_columns.cause_of_death.as_str(),
            self.stage_column.as_str(),
        ];
        for column in reserved {
            if seen.contains(column) {
                return Err(Error::InvalidSchema(format!(
                    "column '{column}' is both a predictor and a label/stage column"
                )));
            }
        }
        if self.stage_map.is_empty() {
            return Err(Error::InvalidSchema("stage_map is empty".into()));
        }
        Ok(())
    }

    /// Cause-of-death values treated as death from this cancer.
    pub fn matching_causes(&self) -> Vec<&str> {
        if self.cause_codes.is_empty() {
            vec![self.cancer_type.as_str()]
        } else {
            self.cause_codes.iter().map(String::as_str).collect()
        }
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Columns the input file must contain: predictors, labels, stage.
    pub fn required_columns(&self) -> Vec<&str> {
        let mut columns: Vec<&str> = self.features.iter().map(|f| f.name.as_str()).collect();
        columns.push(&self.label_columns.vital_status);
        columns.push(&self.label_columns.survival_months);
        columns.push(&self.label_columns.cause_of_death);
        columns.push(&self.stage_column);
        columns
    }
}
