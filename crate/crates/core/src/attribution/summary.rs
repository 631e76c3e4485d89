//! Cohort-level explanation summaries: mean-|phi| feature rankings with
//! beeswarm export data, and the binary top-five presence matrices.

use rayon::prelude::*;

use super::{kernel_shapley, BackgroundSet};
use crate::encode::{CohortTable, FeatureEncoding};
use crate::rng::derive_seed;
use crate::{Error, Result};

const SUMMARY_STREAM: u64 = 0x30;

/// One beeswarm point: an instance's (min-max normalized) feature value and
/// its contribution.
#[derive(Debug, Clone)]
pub struct BeeswarmPoint {
    pub instance: usize,
    pub feature: String,
    pub normalized_value: f64,
    pub phi: f64,
}

#[derive(Debug, Clone)]
pub struct ShapSummary {
    /// Source features ranked by mean |phi|, descending; ties keep schema
    /// order.
    pub ranking: Vec<(String, f64)>,
    pub beeswarm: Vec<BeeswarmPoint>,
}

impl ShapSummary {
    pub fn top_features(&self, k: usize) -> Vec<String> {
        self.ranking
            .iter()
            .take(k)
            .map(|(name, _)| name.clone())
            .collect()
    }
}

/// Kernel-SHAP the given rows and aggregate per source feature: indicator
/// columns of one nominal feature are summed before ranking.
pub fn shap_summary<F: Fn(&[f64]) -> f64 + Sync>(
    model_fn: F,
    table: &CohortTable,
    rows: &[usize],
    background: &BackgroundSet,
    n_samples: usize,
    seed: u64,
) -> Result<ShapSummary> {
    if rows.is_empty() {
        return Err(Error::EmptyCohort);
    }

    let attributions: Vec<Vec<f64>> = rows
        .par_iter()
        .map(|&i| {
            kernel_shapley(
                &model_fn,
                &table.rows[i],
                background,
                n_samples,
                derive_seed(seed, &[SUMMARY_STREAM, i as u64]),
            )
            .map(|a| a.contributions)
        })
        .collect::<Result<_>>()?;

    let groups = table.source_groups();

    // per-source phi by summing the group's encoded columns
    let phi_per_row: Vec<Vec<f64>> = attributions
        .iter()
        .map(|contributions| {
            groups
                .iter()
                .map(|(_, cols)| cols.iter().map(|&c| contributions[c]).sum())
                .collect()
        })
        .collect();

    // source-level display value: the scalar column, or the active category
    // index for a nominal group
    let source_value = |row: &[f64], source_idx: usize| -> f64 {
        let (_, cols) = &groups[source_idx];
        match &table.stats.per_feature[source_idx] {
            FeatureEncoding::Numeric { .. } | FeatureEncoding::Ordinal => row[cols[0]],
            FeatureEncoding::Nominal { .. } => cols
                .iter()
                .enumerate()
                .max_by(|(_, &a), (_, &b)| row[a].partial_cmp(&row[b]).unwrap())
                .map(|(k, _)| k as f64)
                .unwrap_or(0.0),
        }
    };

    let mut beeswarm = Vec::with_capacity(rows.len() * groups.len());
    for (source_idx, (name, _)) in groups.iter().enumerate() {
        let values: Vec<f64> = rows
            .iter()
            .map(|&i| source_value(&table.rows[i], source_idx))
            .collect();
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = max - min;
        for ((&instance, &value), phi_row) in rows.iter().zip(&values).zip(&phi_per_row) {
            let normalized_value = if span > 0.0 {
                (value - min) / span
            } else {
                0.5
            };
            beeswarm.push(BeeswarmPoint {
                instance,
                feature: name.clone(),
                normalized_value,
                phi: phi_row[source_idx],
            });
        }
    }

    let mut ranking: Vec<(String, f64)> = groups
        .iter()
        .enumerate()
        .map(|(source_idx, (name, _))| {
            let mean_abs = phi_per_row
                .iter()
                .map(|phi| phi[source_idx].abs())
                .sum::<f64>()
                / phi_per_row.len() as f64;
            (name.clone(), mean_abs)
        })
        .collect();
    // stable sort keeps schema order on ties
    ranking.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());

    Ok(ShapSummary { ranking, beeswarm })
}

/// Binary feature-presence matrix over (cancer x stage) columns.
#[derive(Debug, Clone, PartialEq)]
pub struct PresenceMatrix {
    pub feature_rows: Vec<String>,
    pub column_labels: Vec<String>,
    pub cells: Vec<Vec<u8>>,
}

/// Assemble the presence matrix from per-column top-feature lists. Rows are
/// ordered by descending total presence, ties alphabetical.
pub fn presence_heatmap(columns: &[(String, Vec<String>)]) -> Result<PresenceMatrix> {
    let expected_len = columns.first().map_or(0, |(_, list)| list.len());
    for (label, list) in columns {
        if list.len() != expected_len {
            return Err(Error::InvalidConfig(format!(
                "presence column '{label}' has {} features, expected {expected_len}",
                list.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for feature in list {
            if !seen.insert(feature.as_str()) {
                return Err(Error::DuplicateFeature(feature.clone()));
            }
        }
    }

    let mut counts: std::collections::BTreeMap<&str, usize> = std::collections::BTreeMap::new();
    for (_, list) in columns {
        for feature in list {
            *counts.entry(feature.as_str()).or_insert(0) += 1;
        }
    }
    let mut feature_rows: Vec<String> = counts.keys().map(|s| s.to_string()).collect();
    feature_rows.sort_by(|a, b| counts[b.as_str()].cmp(&counts[a.as_str()]).then(a.cmp(b)));

    let cells = feature_rows
        .iter()
        .map(|feature| {
            columns
                .iter()
                .map(|(_, list)| u8::from(list.contains(feature)))
                .collect()
        })
        .collect();

    Ok(PresenceMatrix {
        feature_rows,
        column_labels: columns.iter().map(|(label, _)| label.clone()).collect(),
        cells,
    })
}

impl PresenceMatrix {
    pub fn column_sum(&self, col: usize) -> usize {
        self.cells.iter().map(|row| row[col] as usize).sum()
    }

    pub fn row_sum(&self, row: usize) -> usize {
        self.cells[row].iter().map(|&c| c as usize).sum()
    }
}
