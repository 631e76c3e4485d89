//! CSV ingest: parse and clean SEER-shaped rows, derive five-year survival
//! labels, and split the cohort by summary stage.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::schema::{FeatureKind, FeatureSchema};
use crate::{Error, Result};

/// SEER summary stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Localized,
    Regional,
    Distant,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Localized, Stage::Regional, Stage::Distant];

    /// Lowercase name used in file names and CLI flags.
    pub fn slug(self) -> &'static str {
        match self {
            Stage::Localized => "localized",
            Stage::Regional => "regional",
            Stage::Distant => "distant",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Localized => "Localized",
            Stage::Regional => "Regional",
            Stage::Distant => "Distant",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "localized" => Ok(Stage::Localized),
            "regional" => Ok(Stage::Regional),
            "distant" => Ok(Stage::Distant),
            other => Err(format!("unknown stage '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VitalStatus {
    Alive,
    Dead,
}

/// One cleaned input row. Feature cells stay as text, aligned with the
/// schema's feature order; encoding interprets them later.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub feature_values: Vec<String>,
    pub vital_status: VitalStatus,
    pub survival_months: i64,
    pub cause_of_death: String,
    pub stage_code: String,
}

impl RawRecord {
    pub fn value<'a>(&'a self, schema: &FeatureSchema, feature: &str) -> Option<&'a str> {
        schema
            .feature_index(feature)
            .map(|i| self.feature_values[i].as_str())
    }
}

/// Five-year survival outcome of one record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurvivalLabel {
    Survived,
    NotSurvived,
    Excluded,
}

/// Record with its resolved binary outcome. Excluded records never reach
/// this type.
#[derive(Debug, Clone)]
pub struct LabeledRecord {
    pub record: RawRecord,
    pub survived: bool,
}

/// Per-row drop reasons plus summary counts from parsing.
#[derive(Debug, Clone, Default)]
pub struct CleaningReport {
    pub kept: usize,
    /// (1-based data row, reason)
    pub dropped: Vec<(usize, String)>,
}

impl CleaningReport {
    pub fn dropped_count(&self) -> usize {
        self.dropped.len()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (row, reason) in &self.dropped {
            out.push_str(&format!("row {row}: dropped ({reason})\n"));
        }
        out.push_str(&format!(
            "kept {} rows, dropped {} rows\n",
            self.kept,
            self.dropped.len()
        ));
        out
    }
}

/// Parse a CSV source against the schema, keeping only rows with every
/// schema column present, non-empty, and type-valid. Input order is
/// preserved; every drop is recorded with its reason.
pub fn parse_dataset<R: Read>(
    source: R,
    schema: &FeatureSchema,
) -> Result<(Vec<RawRecord>, CleaningReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);

    let headers = reader.headers()?.clone();
    let index_of = |name: &str| headers.iter().position(|h| h == name);
    for column in schema.required_columns() {
        if index_of(column).is_none() {
            return Err(Error::MissingColumn(column.to_string()));
        }
    }
    let feature_idx: Vec<usize> = schema
        .features
        .iter()
        .map(|f| index_of(&f.name).unwrap())
        .collect();
    let vital_idx = index_of(&schema.label_columns.vital_status).unwrap();
    let months_idx = index_of(&schema.label_columns.survival_months).unwrap();
    let cause_idx = index_of(&schema.label_columns.cause_of_death).unwrap();
    let stage_idx = index_of(&schema.stage_column).unwrap();

    let mut records = Vec::new();
    let mut report = CleaningReport::default();

    'rows: for (row_number, row) in reader.records().enumerate() {
        let row = row?;
        let row_number = row_number + 1;
        let cell = |idx: usize| row.get(idx).map(str::trim).unwrap_or("");

        let mut feature_values = Vec::with_capacity(schema.features.len());
        for (feature, &idx) in schema.features.iter().zip(&feature_idx) {
            let value = cell(idx);
            if value.is_empty() {
                report
                    .dropped
                    .push((row_number, format!("empty cell in '{}'", feature.name)));
                continue 'rows;
            }
            if matches!(feature.kind, FeatureKind::Numeric | FeatureKind::Ordinal)
                && value.parse::<f64>().is_err()
            {
                report.dropped.push((
                    row_number,
                    format!("unparseable numeric cell '{value}' in '{}'", feature.name),
                ));
                continue 'rows;
            }
            feature_values.push(value.to_string());
        }

        let vital_raw = cell(vital_idx);
        let months_raw = cell(months_idx);
        let cause = cell(cause_idx);
        let stage_code = cell(stage_idx);
        if vital_raw.is_empty() || months_raw.is_empty() || stage_code.is_empty() {
            report
                .dropped
                .push((row_number, "empty label or stage cell".to_string()));
            continue;
        }
        let vital_status = match vital_raw.to_ascii_lowercase().as_str() {
            "alive" => VitalStatus::Alive,
            "dead" => VitalStatus::Dead,
            other => {
                report
                    .dropped
                    .push((row_number, format!("unrecognized vital status '{other}'")));
                continue;
            }
        };
        let survival_months = match months_raw.parse::<i64>() {
            Ok(months) => months,
            Err(_) => {
                report.dropped.push((
                    row_number,
                    format!("unparseable survival months '{months_raw}'"),
                ));
                continue;
            }
        };

        records.push(RawRecord {
            feature_values,
            vital_status,
            survival_months,
            cause_of_death: cause.to_string(),
            stage_code: stage_code.to_string(),
        });
        report.kept += 1;
    }

    Ok((records, report))
}

/// Five-year survival rule: sixty-plus months alive is survived; under
/// sixty months with a matching cause of death is not survived; anything
/// else is excluded.
pub fn label_survival(record: &RawRecord, matching_causes: &[&str]) -> Result<SurvivalLabel> {
    if record.survival_months < 0 {
        return Err(Error::NegativeMonths(record.survival_months));
    }
    if record.survival_months >= 60 && record.vital_status == VitalStatus::Alive {
        Ok(SurvivalLabel::Survived)
    } else if record.survival_months < 60
        && matching_causes.contains(&record.cause_of_death.as_str())
    {
        Ok(SurvivalLabel::NotSurvived)
    } else {
        Ok(SurvivalLabel::Excluded)
    }
}

/// Label every record, dropping exclusions.
pub fn label_cohort(
    records: Vec<RawRecord>,
    schema: &FeatureSchema,
) -> Result<(Vec<LabeledRecord>, LabelSummary)> {
    let causes = schema.matching_causes();
    let mut labeled = Vec::with_capacity(records.len());
    let mut summary = LabelSummary::default();
    for record in records {
        match label_survival(&record, &causes)? {
            SurvivalLabel::Survived => {
                summary.survived += 1;
                labeled.push(LabeledRecord {
                    record,
                    survived: true,
                });
            }
            SurvivalLabel::NotSurvived => {
                summary.not_survived += 1;
                labeled.push(LabeledRecord {
                    record,
                    survived: false,
                });
            }
            SurvivalLabel::Excluded => summary.excluded += 1,
        }
    }
    Ok((labeled, summary))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LabelSummary {
    pub survived: usize,
    pub not_survived: usize,
    pub excluded: usize,
}

/// Stage subsets in input order plus the size report.
#[derive(Debug, Clone)]
pub struct StageSplit {
    pub by_stage: BTreeMap<Stage, Vec<LabeledRecord>>,
}

impl StageSplit {
    pub fn counts(&self) -> BTreeMap<Stage, usize> {
        Stage::ALL
            .iter()
            .map(|&s| (s, self.by_stage.get(&s).map_or(0, Vec::len)))
            .collect()
    }

    /// Lines like `Localized 33.1% (n = 17,582)`.
    pub fn render(&self) -> String {
        let counts = self.counts();
        let total: usize = counts.values().sum();
        let mut out = String::new();
        for stage in Stage::ALL {
            let n = counts[&stage];
            let pct = if total == 0 {
                0.0
            } else {
                100.0 * n as f64 / total as f64
            };
            out.push_str(&format!(
                "{stage} {pct:.1}% (n = {})\n",
                group_thousands(n)
            ));
        }
        out
    }
}

/// Partition labeled records by their stage code through the schema's
/// stage map. Unmapped codes are hard errors.
pub fn split_by_stage(records: Vec<LabeledRecord>, schema: &FeatureSchema) -> Result<StageSplit> {
    let mut by_stage: BTreeMap<Stage, Vec<LabeledRecord>> =
        Stage::ALL.iter().map(|&s| (s, Vec::new())).collect();
    for labeled in records {
        let stage = schema
            .stage_map
            .get(&labeled.record.stage_code)
            .copied()
            .ok_or_else(|| Error::UnknownStageCode(labeled.record.stage_code.clone()))?;
        by_stage.get_mut(&stage).unwrap().push(labeled);
    }
    Ok(StageSplit { by_stage })
}

pub(crate) fn group_thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}
