//! Local linear surrogates around a single instance: Gaussian perturbation
//! of scalar columns, frequency resampling of indicator groups, exponential
//! distance kernel, and a two-pass weighted ridge for the top-K features.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::encode::{CohortTable, FeatureEncoding};
use crate::linalg::weighted_ridge;
use crate::rng::derive_rng;
use crate::{Error, Result};

const LIME_STREAM: u64 = 0x20;

#[derive(Debug, Clone, Copy)]
pub struct LimeConfig {
    pub n_samples: usize,
    pub top_k: usize,
    /// sigma = factor * sqrt(encoded dimension)
    pub kernel_width_factor: f64,
    pub ridge_penalty: f64,
    pub seed: u64,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig {
            n_samples: 5000,
            top_k: 5,
            kernel_width_factor: 0.75,
            ridge_penalty: 1.0,
            seed: 0,
        }
    }
}

/// One explained instance: top-K signed feature weights of the local
/// surrogate and its weighted R^2 against the model on the perturbations.
#[derive(Debug, Clone, Serialize)]
pub struct LocalExplanation {
    pub instance: usize,
    pub prediction: f64,
    pub intercept: f64,
    pub top_features: Vec<(String, f64)>,
    pub fidelity: f64,
    pub degenerate: bool,
    pub kernel_width: f64,
}

/// How each source feature is perturbed: scalar noise at the training std,
/// or category resampling at the training frequencies.
#[derive(Debug, Clone)]
pub struct PerturbationStats {
    sources: Vec<SourceKind>,
    encoded_dim: usize,
}

#[derive(Debug, Clone)]
enum SourceKind {
    Scalar {
        name: String,
        col: usize,
        std: f64,
    },
    Indicators {
        name: String,
        cols: Vec<usize>,
        freqs: Vec<f64>,
    },
}

impl PerturbationStats {
    pub fn from_table(table: &CohortTable) -> PerturbationStats {
        let n = table.n_rows().max(1) as f64;
        let groups = table.source_groups();
        let sources = table
            .schema
            .features
            .iter()
            .zip(&table.stats.per_feature)
            .zip(groups)
            .map(|((feature, encoding), (_, cols))| match encoding {
                FeatureEncoding::Numeric { .. } | FeatureEncoding::Ordinal => {
                    let col = cols[0];
                    let mean = table.rows.iter().map(|r| r[col]).sum::<f64>() / n;
                    let std = (table
                        .rows
                        .iter()
                        .map(|r| (r[col] - mean).powi(2))
                        .sum::<f64>()
                        / n)
                        .sqrt();
                    SourceKind::Scalar {
                        name: feature.name.clone(),
                        col,
                        std,
                    }
                }
                FeatureEncoding::Nominal { .. } => {
                    let freqs: Vec<f64> = cols
                        .iter()
                        .map(|&c| table.rows.iter().map(|r| r[c]).sum::<f64>() / n)
                        .collect();
                    SourceKind::Indicators {
                        name: feature.name.clone(),
                        cols,
                        freqs,
                    }
                }
            })
            .collect();
        PerturbationStats {
            sources,
            encoded_dim: table.n_cols(),
        }
    }

    pub fn source_names(&self) -> Vec<&str> {
        self.sources
            .iter()
            .map(|s| match s {
                SourceKind::Scalar { name, .. } => name.as_str(),
                SourceKind::Indicators { name, .. } => name.as_str(),
            })
            .collect()
    }
}

use crate::rng::gaussian;

fn sample_category(freqs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = freqs.iter().sum();
    if total <= 0.0 {
        return 0;
    }
    let mut draw = rng.gen_range(0.0..total);
    for (i, &f) in freqs.iter().enumerate() {
        if draw < f {
            return i;
        }
        draw -= f;
    }
    freqs.len() - 1
}

struct Perturbations {
    /// interpretable design: one column per source feature
    design: Vec<Vec<f64>>,
    targets: Vec<f64>,
    weights: Vec<f64>,
}

fn perturb<F: Fn(&[f64]) -> f64>(
    model_fn: &F,
    x: &[f64],
    stats: &PerturbationStats,
    n_samples: usize,
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Perturbations {
    let mut design = Vec::with_capacity(n_samples);
    let mut targets = Vec::with_capacity(n_samples);
    let mut weights = Vec::with_capacity(n_samples);
    let mut encoded = x.to_vec();

    for _ in 0..n_samples {
        encoded.copy_from_slice(x);
        let mut interpretable = Vec::with_capacity(stats.sources.len());
        for source in &stats.sources {
            match source {
                SourceKind::Scalar { col, std, .. } => {
                    let value = x[*col] + gaussian(rng) * std;
                    encoded[*col] = value;
                    interpretable.push(value);
                }
                SourceKind::Indicators { cols, freqs, .. } => {
                    let active = sample_category(freqs, rng);
                    for (k, &c) in cols.iter().enumerate() {
                        encoded[c] = f64::from(k == active);
                    }
                    let instance_active = cols
                        .iter()
                        .enumerate()
                        .max_by(|(_, &a), (_, &b)| x[a].partial_cmp(&x[b]).unwrap())
                        .map(|(k, _)| k)
                        .unwrap_or(0);
                    interpretable.push(f64::from(active == instance_active));
                }
            }
        }
        let distance_sq: f64 = encoded
            .iter()
            .zip(x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        weights.push((-distance_sq / (sigma * sigma)).exp());
        targets.push(model_fn(&encoded));
        design.push(interpretable);
    }

    Perturbations {
        design,
        targets,
        weights,
    }
}

/// Explain one instance with a sparse local surrogate. Feature selection
/// takes the K largest-magnitude weights of a full weighted ridge fit; the
/// reported surrogate is a second ridge fit on those K columns.
pub fn lime_explain<F: Fn(&[f64]) -> f64>(
    model_fn: F,
    x: &[f64],
    stats: &PerturbationStats,
    config: &LimeConfig,
    instance: usize,
) -> Result<LocalExplanation> {
    if config.n_samples < 10 * config.top_k {
        return Err(Error::TooFewSamples {
            what: "lime_explain",
            min: 10 * config.top_k,
            got: config.n_samples,
        });
    }
    if x.len() != stats.encoded_dim {
        return Err(Error::Dimension {
            expected: stats.encoded_dim,
            got: x.len(),
        });
    }

    let base_sigma = config.kernel_width_factor * (stats.encoded_dim as f64).sqrt();
    let mut sigma = base_sigma;
    let mut perturbations = None;
    for widening in 0..2 {
        sigma = base_sigma * f64::from(1 + widening);
        let mut rng = derive_rng(config.seed, &[LIME_STREAM, instance as u64]);
        let candidate = perturb(&model_fn, x, stats, config.n_samples, sigma, &mut rng);
        if candidate.weights.iter().any(|&w| w >= 1e-12) {
            perturbations = Some(candidate);
            break;
        }
    }
    let Perturbations {
        design,
        targets,
        weights,
    } = perturbations.ok_or(Error::DegenerateKernel)?;

    let d_source = stats.sources.len();
    let (_, full_weights) = weighted_ridge(&design, &targets, &weights, config.ridge_penalty)
        .ok_or_else(|| Error::Internal("singular surrogate system".into()))?;

    // top-K columns by magnitude; strict comparison keeps schema order on ties
    let k = config.top_k.min(d_source);
    let mut selected: Vec<usize> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<usize> = None;
        for j in 0..d_source {
            if selected.contains(&j) {
                continue;
            }
            if best.is_none_or(|b| full_weights[j].abs() > full_weights[b].abs()) {
                best = Some(j);
            }
        }
        selected.push(best.unwrap());
    }

    let reduced: Vec<Vec<f64>> = design
        .iter()
        .map(|row| selected.iter().map(|&j| row[j]).collect())
        .collect();
    let (intercept, coefs) = weighted_ridge(&reduced, &targets, &weights, config.ridge_penalty)
        .ok_or_else(|| Error::Internal("singular surrogate system".into()))?;

    // weighted R^2 of the sparse surrogate
    let weight_total: f64 = weights.iter().sum();
    let mean_target: f64 = targets
        .iter()
        .zip(&weights)
        .map(|(y, w)| y * w)
        .sum::<f64>()
        / weight_total;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for ((row, &y), &w) in reduced.iter().zip(&targets).zip(&weights) {
        let fitted = intercept
            + row
                .iter()
                .zip(&coefs)
                .map(|(v, c)| v * c)
                .sum::<f64>();
        ss_res += w * (y - fitted) * (y - fitted);
        ss_tot += w * (y - mean_target) * (y - mean_target);
    }
    let degenerate = ss_tot < 1e-12;
    let fidelity = if degenerate {
        0.0
    } else {
        (1.0 - ss_res / ss_tot).max(0.0)
    };

    let names = stats.source_names();
    let top_features = selected
        .iter()
        .zip(&coefs)
        .map(|(&j, &w)| (names[j].to_string(), w))
        .collect();

    Ok(LocalExplanation {
        instance,
        prediction: model_fn(x),
        intercept,
        top_features,
        fidelity,
        degenerate,
        kernel_width: sigma,
    })
}

/// Row with the lowest predicted survival probability; ties go to the
/// lowest index.
pub fn select_lime_case<F: Fn(&[f64]) -> f64>(model_fn: F, rows: &[Vec<f64>]) -> Result<usize> {
    if rows.is_empty() {
        return Err(Error::EmptyCohort);
    }
    let mut best = 0;
    let mut best_p = model_fn(&rows[0]);
    for (i, row) in rows.iter().enumerate().skip(1) {
        let p = model_fn(row);
        if p < best_p {
            best = i;
            best_p = p;
        }
    }
    Ok(best)
}

/// Full-ridge weights for every source feature (no top-K cut); used by the
/// aggregate-frequency presence mode.
pub fn lime_full_weights<F: Fn(&[f64]) -> f64>(
    model_fn: F,
    x: &[f64],
    stats: &PerturbationStats,
    config: &LimeConfig,
    instance: usize,
) -> Result<Vec<(String, f64)>> {
    let wide = LimeConfig {
        top_k: stats.sources.len(),
        ..*config
    };
    let explanation = lime_explain(model_fn, x, stats, &wide, instance)?;
    Ok(explanation.top_features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::encode;
    use crate::ingest::{LabeledRecord, RawRecord, Stage, VitalStatus};
    use crate::schema::{FeatureDef, FeatureKind, FeatureSchema, LabelColumns};
    use rand::Rng;
    use std::collections::BTreeMap;

    fn table_with(kinds: Vec<(&str, FeatureKind)>, rows: Vec<Vec<String>>) -> CohortTable {
        let schema = FeatureSchema {
            cancer_type: "t".into(),
            features: kinds
                .into_iter()
                .map(|(name, kind)| FeatureDef {
                    name: name.into(),
                    kind,
                })
                .collect(),
            label_columns: LabelColumns {
                vital_status: "v".into(),
                survival_months: "m".into(),
                cause_of_death: "c".into(),
            },
            stage_column: "s".into(),
            stage_map: BTreeMap::from([("1".to_string(), Stage::Localized)]),
            cause_codes: vec![],
        };
        let records: Vec<LabeledRecord> = rows
            .into_iter()
            .map(|feature_values| LabeledRecord {
                record: RawRecord {
                    feature_values,
                    vital_status: VitalStatus::Alive,
                    survival_months: 72,
                    cause_of_death: "none".into(),
                    stage_code: "1".into(),
                },
                survived: true,
            })
            .collect();
        encode(&records, &schema, None).unwrap()
    }

    fn numeric_table(seed: u64, n: usize) -> CohortTable {
        let mut rng = derive_rng(seed, &[1]);
        let rows: Vec<Vec<String>> = (0..n)
            .map(|_| {
                (0..3)
                    .map(|_| format!("{}", rng.gen_range(-5.0..5.0)))
                    .collect()
            })
            .collect();
        table_with(
            vec![
                ("a", FeatureKind::Numeric),
                ("b", FeatureKind::Numeric),
                ("c", FeatureKind::Numeric),
            ],
            rows,
        )
    }

    #[test]
    fn recovers_linear_signs_and_fidelity() {
        let table = numeric_table(3, 100);
        let stats = PerturbationStats::from_table(&table);
        let model = |row: &[f64]| 2.0 * row[0] - 1.5 * row[1] + 0.4 * row[2];
        let config = LimeConfig {
            n_samples: 2000,
            top_k: 3,
            seed: 9,
            ..LimeConfig::default()
        };
        let explanation =
            lime_explain(model, &table.rows[0], &stats, &config, 0).unwrap();
        assert!(explanation.fidelity > 0.99);
        let weight_of = |name: &str| {
            explanation
                .top_features
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, w)| *w)
                .unwrap()
        };
        assert!(weight_of("a") > 0.0);
        assert!(weight_of("b") < 0.0);
        assert!(weight_of("c") > 0.0);
    }

    #[test]
    fn constant_model_is_degenerate() {
        let table = numeric_table(5, 50);
        let stats = PerturbationStats::from_table(&table);
        let config = LimeConfig {
            n_samples: 500,
            top_k: 2,
            seed: 1,
            ..LimeConfig::default()
        };
        let explanation =
            lime_explain(|_: &[f64]| 0.7, &table.rows[0], &stats, &config, 0).unwrap();
        assert!(explanation.degenerate);
        for (_, w) in &explanation.top_features {
            assert!(w.abs() < 1e-6);
        }
    }

    #[test]
    fn ignored_feature_gets_negligible_weight() {
        let table = numeric_table(7, 120);
        let stats = PerturbationStats::from_table(&table);
        let model = |row: &[f64]| 3.0 * row[0] + 2.0 * row[1];
        let config = LimeConfig {
            n_samples: 5000,
            top_k: 3,
            seed: 4,
            ..LimeConfig::default()
        };
        let explanation =
            lime_explain(model, &table.rows[1], &stats, &config, 1).unwrap();
        let max_abs = explanation
            .top_features
            .iter()
            .map(|(_, w)| w.abs())
            .fold(0.0f64, f64::max);
        let ignored = explanation
            .top_features
            .iter()
            .find(|(n, _)| n == "c")
            .map(|(_, w)| w.abs())
            .unwrap();
        assert!(ignored < 0.05 * max_abs, "{ignored} vs {max_abs}");
    }

    #[test]
    fn nominal_groups_move_together() {
        let mut rng = derive_rng(11, &[2]);
        let cats = ["x", "y", "z"];
        let rows: Vec<Vec<String>> = (0..90)
            .map(|_| {
                vec![
                    format!("{}", rng.gen_range(-3.0..3.0)),
                    cats[rng.gen_range(0..3)].to_string(),
                ]
            })
            .collect();
        let table = table_with(
            vec![("num", FeatureKind::Numeric), ("cat", FeatureKind::Nominal)],
            rows,
        );
        let stats = PerturbationStats::from_table(&table);
        // model keys on the first indicator column of "cat"
        let model = |row: &[f64]| row[1] * 4.0 + row[0];
        let config = LimeConfig {
            n_samples: 1500,
            top_k: 2,
            seed: 8,
            ..LimeConfig::default()
        };
        let explanation =
            lime_explain(model, &table.rows[0], &stats, &config, 0).unwrap();
        // both source features must appear, and "cat" carries signal
        let names: Vec<&str> = explanation
            .top_features
            .iter()
            .map(|(n, _)| n.as_str())
            .collect();
        assert!(names.contains(&"num"));
        assert!(names.contains(&"cat"));
    }

    #[test]
    fn deterministic_per_seed() {
        let table = numeric_table(13, 60);
        let stats = PerturbationStats::from_table(&table);
        let model = |row: &[f64]| row[0] - row[2];
        let config = LimeConfig {
            n_samples: 400,
            top_k: 3,
            seed: 21,
            ..LimeConfig::default()
        };
        let a = lime_explain(model, &table.rows[2], &stats, &config, 2).unwrap();
        let b = lime_explain(model, &table.rows[2], &stats, &config, 2).unwrap();
        assert_eq!(a.top_features, b.top_features);
        assert_eq!(a.fidelity, b.fidelity);
    }

    #[test]
    fn too_few_samples_is_rejected() {
        let table = numeric_table(17, 30);
        let stats = PerturbationStats::from_table(&table);
        let config = LimeConfig {
            n_samples: 10,
            top_k: 3,
            seed: 0,
            ..LimeConfig::default()
        };
        assert!(matches!(
            lime_explain(|_: &[f64]| 0.0, &table.rows[0], &stats, &config, 0),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn argmin_selection_with_ties() {
        let rows: Vec<Vec<f64>> = vec![vec![0.9], vec![0.2], vec![0.4]];
        let idx = select_lime_case(|r: &[f64]| r[0], &rows).unwrap();
        assert_eq!(idx, 1);
        let flat: Vec<Vec<f64>> = vec![vec![0.3], vec![0.3], vec![0.3]];
        assert_eq!(select_lime_case(|r: &[f64]| r[0], &flat).unwrap(), 0);
    }
}
