//! Encoding labeled records into the design matrix the models consume:
//! one-hot expansion for nominals, pass-through codes for ordinals, and
//! z-score normalization (population std) for numerics.

use std::collections::BTreeSet;

use crate::ingest::{LabeledRecord, Stage};
use crate::schema::{FeatureKind, FeatureSchema};
use crate::{Error, Result};

/// One column of the encoded matrix and the source feature it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedColumn {
    pub source: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureEncoding {
    Numeric { mean: f64, std: f64, clamped: bool },
    Ordinal,
    Nominal { categories: Vec<String> },
}

/// Fitted encoding recipe, one entry per schema feature in order.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodingStats {
    pub per_feature: Vec<FeatureEncoding>,
}

/// Immutable encoded cohort: design matrix, binary outcomes (1 = survived),
/// and per-row stages.
#[derive(Debug, Clone)]
pub struct CohortTable {
    pub schema: FeatureSchema,
    pub encoded_columns: Vec<EncodedColumn>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub stages: Vec<Stage>,
    pub stats: EncodingStats,
    pub warnings: Vec<String>,
}

impl CohortTable {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.encoded_columns.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.encoded_columns.iter().position(|c| c.name == name)
    }

    /// Encoded column indices grouped by source feature, in schema order.
    pub fn source_groups(&self) -> Vec<(String, Vec<usize>)> {
        self.schema
            .features
            .iter()
            .map(|f| {
                let cols = self
                    .encoded_columns
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.source == f.name)
                    .map(|(i, _)| i)
                    .collect();
                (f.name.clone(), cols)
            })
            .collect()
    }

    /// A numeric feature's column in raw (de-normalized) units.
    pub fn raw_numeric_column(&self, feature: &str) -> Option<Vec<f64>> {
        let idx = self.schema.feature_index(feature)?;
        let col = self.column_index(feature)?;
        match &self.stats.per_feature[idx] {
            FeatureEncoding::Numeric { mean, std, .. } => {
                Some(self.rows.iter().map(|r| r[col] * std + mean).collect())
            }
            FeatureEncoding::Ordinal => Some(self.rows.iter().map(|r| r[col]).collect()),
            FeatureEncoding::Nominal { .. } => None,
        }
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }
}

fn parse_cell(value: &str, feature: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| Error::Internal(format!("unparseable cell '{value}' in '{feature}'")))
}

/// Encode records against the schema. Without `fit_stats` the encoding is
/// fitted on the records themselves; with it, the records are transformed
/// under the given recipe and unseen nominal categories become all-zero
/// indicator groups.
pub fn encode(
    records: &[LabeledRecord],
    schema: &FeatureSchema,
    fit_stats: Option<&EncodingStats>,
) -> Result<CohortTable> {
    if fit_stats.is_none() && records.is_empty() {
        return Err(Error::EmptyCohort);
    }

    let mut warnings = Vec::new();
    let stats = match fit_stats {
        Some(stats) => stats.clone(),
        None => fit_encoding(records, schema, &mut warnings)?,
    };

    let mut encoded_columns = Vec::new();
    for (feature, encoding) in schema.features.iter().zip(&stats.per_feature) {
        match encoding {
            FeatureEncoding::Numeric { .. } | FeatureEncoding::Ordinal => {
                encoded_columns.push(EncodedColumn {
                    source: feature.name.clone(),
                    name: feature.name.clone(),
                });
            }
            FeatureEncoding::Nominal { categories } => {
                for category in categories {
                    encoded_columns.push(EncodedColumn {
                        source: feature.name.clone(),
                        name: format!("{}={category}", feature.name),
                    });
                }
            }
        }
    }

    let mut rows = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    let mut stages = Vec::with_capacity(records.len());
    for labeled in records {
        let mut row = Vec::with_capacity(encoded_columns.len());
        for ((feature, encoding), value) in schema
            .features
            .iter()
            .zip(&stats.per_feature)
            .zip(&labeled.record.feature_values)
        {
            match encoding {
                FeatureEncoding::Numeric { mean, std, .. } => {
                    row.push((parse_cell(value, &feature.name)? - mean) / std);
                }
                FeatureEncoding::Ordinal => row.push(parse_cell(value, &feature.name)?),
                FeatureEncoding::Nominal { categories } => {
                    for category in categories {
                        row.push(if category == value { 1.0 } else { 0.0 });
                    }
                }
            }
        }
        rows.push(row);
        labels.push(u8::from(labeled.survived));
        let stage = schema
            .stage_map
            .get(&labeled.record.stage_code)
            .copied()
            .ok_or_else(|| Error::UnknownStageCode(labeled.record.stage_code.clone()))?;
        stages.push(stage);
    }

    Ok(CohortTable {
        schema: schema.clone(),
        encoded_columns,
        rows,
        labels,
        stages,
        stats,
        warnings,
    })
}

fn fit_encoding(
    records: &[LabeledRecord],
    schema: &FeatureSchema,
    warnings: &mut Vec<String>,
) -> Result<EncodingStats> {
    let mut per_feature = Vec::with_capacity(schema.features.len());
    for (idx, feature) in schema.features.iter().enumerate() {
        let cells = records.iter().map(|r| r.record.feature_values[idx].as_str());
        match feature.kind {
            FeatureKind::Numeric => {
                let values: Vec<f64> = cells
                    .map(|v| parse_cell(v, &feature.name))
                    .collect::<Result<_>>()?;
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let std = var.sqrt();
                let clamped = std < 1e-12;
                if clamped {
                    warnings.push(format!(
                        "feature '{}' has zero variance; std clamped to 1",
                        feature.name
                    ));
                }
                per_feature.push(FeatureEncoding::Numeric {
                    mean,
                    std: if clamped { 1.0 } else { std },
                    clamped,
                });
            }
            FeatureKind::Ordinal => per_feature.push(FeatureEncoding::Ordinal),
            FeatureKind::Nominal => {
                // lexicographic order keeps column layout deterministic
                let categories: BTreeSet<String> = cells.map(str::to_string).collect();
                per_feature.push(FeatureEncoding::Nominal {
                    categories: categories.into_iter().collect(),
                });
            }
        }
    }
    Ok(EncodingStats { per_feature })
}

/// Pearson correlations between the schema's numeric features. Zero-variance
/// columns get NaN entries and are listed in `degenerate`.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    pub features: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub degenerate: Vec<String>,
}

pub fn correlation_matrix(table: &CohortTable) -> Result<CorrelationMatrix> {
    if table.n_rows() < 2 {
        return Err(Error::TooFewSamples {
            what: "correlation matrix",
            min: 2,
            got: table.n_rows(),
        });
    }
    let numeric: Vec<(String, usize)> = table
        .schema
        .features
        .iter()
        .filter(|f| f.kind == FeatureKind::Numeric)
        .filter_map(|f| table.column_index(&f.name).map(|c| (f.name.clone(), c)))
        .collect();

    let n = table.n_rows() as f64;
    let columns: Vec<Vec<f64>> = numeric
        .iter()
        .map(|(_, c)| table.rows.iter().map(|r| r[*c]).collect())
        .collect();
    let means: Vec<f64> = columns.iter().map(|c| c.iter().sum::<f64>() / n).collect();
    let stds: Vec<f64> = columns
        .iter()
        .zip(&means)
        .map(|(c, m)| (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt())
        .collect();

    let degenerate: Vec<String> = numeric
        .iter()
        .zip(&stds)
        .filter(|(_, &s)| s < 1e-12)
        .map(|((name, _), _)| name.clone())
        .collect();

    let d = numeric.len();
    let mut values = vec![vec![f64::NAN; d]; d];
    for i in 0..d {
        if stds[i] < 1e-12 {
            continue;
        }
        values[i][i] = 1.0;
        for j in (i + 1)..d {
            if stds[j] < 1e-12 {
                continue;
            }
            let cov = columns[i]
                .iter()
                .zip(&columns[j])
                .map(|(a, b)| (a - means[i]) * (b - means[j]))
                .sum::<f64>()
                / n;
            let r = (cov / (stds[i] * stds[j])).clamp(-1.0, 1.0);
            values[i][j] = r;
            values[j][i] = r;
        }
    }

    Ok(CorrelationMatrix {
        features: numeric.into_iter().map(|(name, _)| name).collect(),
        values,
        degenerate,
    })
}
