//! Synthetic cohort generator for desk-scale verification. Outcomes follow
//! a logistic model of the standardized features with stage-specific
//! planted coefficients; vital status, survival months, and cause of death
//! are back-filled so the labeling rule recovers the sampled outcome
//! exactly.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ingest::Stage;
use crate::learners::sigmoid;
use crate::rng::{derive_rng, gaussian};
use crate::schema::{FeatureDef, FeatureKind, FeatureSchema, LabelColumns};
use crate::{Error, Result};

const SYNTH_STREAM: u64 = 0x40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum FeatureDist {
    /// Numeric draw rounded to `decimals` places.
    Gaussian { mean: f64, sd: f64, decimals: usize },
    /// Ordinal codes with sampling weights.
    Codes { codes: Vec<i64>, weights: Vec<f64> },
    /// Nominal categories with sampling weights.
    Categories { values: Vec<String>, weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthFeature {
    pub name: String,
    #[serde(flatten)]
    pub dist: FeatureDist,
}

impl SynthFeature {
    fn kind(&self) -> FeatureKind {
        match self.dist {
            FeatureDist::Gaussian { .. } => FeatureKind::Numeric,
            FeatureDist::Codes { .. } => FeatureKind::Ordinal,
            FeatureDist::Categories { .. } => FeatureKind::Nominal,
        }
    }

    /// Analytic mean and sd of the sampling distribution, used to
    /// standardize values inside the linear predictor.
    fn moments(&self) -> Option<(f64, f64)> {
        match &self.dist {
            FeatureDist::Gaussian { mean, sd, .. } => Some((*mean, *sd)),
            FeatureDist::Codes { codes, weights } => {
                let total: f64 = weights.iter().sum();
                let mean = codes
                    .iter()
                    .zip(weights)
                    .map(|(&c, &w)| c as f64 * w)
                    .sum::<f64>()
                    / total;
                let var = codes
                    .iter()
                    .zip(weights)
                    .map(|(&c, &w)| w * (c as f64 - mean).powi(2))
                    .sum::<f64>()
                    / total;
                Some((mean, var.sqrt().max(1e-12)))
            }
            FeatureDist::Categories { .. } => None,
        }
    }
}

/// Generator settings. `coefficients` are log-odds of death per standard
/// deviation, per stage, so a positive coefficient pushes toward the
/// non-survivor class. `base_rate` is the survival rate at zero signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub cancer_type: String,
    pub features: Vec<SynthFeature>,
    pub n_per_stage: BTreeMap<Stage, usize>,
    pub coefficients: BTreeMap<Stage, BTreeMap<String, f64>>,
    pub noise_scale: f64,
    pub base_rate: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.base_rate) {
            return Err(Error::InvalidConfig("base_rate must be in [0, 1]".into()));
        }
        for (stage, coefficients) in &self.coefficients {
            for name in coefficients.keys() {
                let feature = self
                    .features
                    .iter()
                    .find(|f| &f.name == name)
                    .ok_or_else(|| {
                        Error::InvalidConfig(format!(
                            "coefficient for unknown feature '{name}' ({stage})"
                        ))
                    })?;
                if feature.moments().is_none() {
                    return Err(Error::InvalidConfig(format!(
                        "coefficient on nominal feature '{name}' is not supported"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Schema the generated CSV conforms to.
    pub fn schema(&self) -> FeatureSchema {
        FeatureSchema {
            cancer_type: self.cancer_type.clone(),
            features: self
                .features
                .iter()
                .map(|f| FeatureDef {
                    name: f.name.clone(),
                    kind: f.kind(),
                })
                .collect(),
            label_columns: LabelColumns {
                vital_status: "Vital Status".into(),
                survival_months: "Survival Months".into(),
                cause_of_death: "Cause of Death".into(),
            },
            stage_column: "Stage Group".into(),
            stage_map: BTreeMap::from([
                ("1".to_string(), Stage::Localized),
                ("2".to_string(), Stage::Regional),
                ("7".to_string(), Stage::Distant),
            ]),
            cause_codes: vec![],
        }
    }

    /// Compact SEER-shaped demo spec with planted Age / Tumor Size /
    /// Extension signal per stage.
    pub fn default_demo(n_per_stage: usize, seed: u64) -> SynthSpec {
        let features = vec![
            SynthFeature {
                name: "Age".into(),
                dist: FeatureDist::Gaussian {
                    mean: 65.0,
                    sd: 11.0,
                    decimals: 0,
                },
            },
            SynthFeature {
                name: "Tumor Size".into(),
                dist: FeatureDist::Gaussian {
                    mean: 35.0,
                    sd: 14.0,
                    decimals: 0,
                },
            },
            SynthFeature {
                name: "Regional Nodes Examined".into(),
                dist: FeatureDist::Gaussian {
                    mean: 12.0,
                    sd: 5.0,
                    decimals: 0,
                },
            },
            SynthFeature {
                name: "Regional Nodes Positive".into(),
                dist: FeatureDist::Gaussian {
                    mean: 4.0,
                    sd: 3.0,
                    decimals: 0,
                },
            },
            SynthFeature {
                name: "Extension".into(),
                dist: FeatureDist::Codes {
                    codes: vec![100, 200, 300, 400, 500],
                    weights: vec![0.30, 0.25, 0.20, 0.15, 0.10],
                },
            },
            SynthFeature {
                name: "Grade".into(),
                dist: FeatureDist::Codes {
                    codes: vec![1, 2, 3, 4],
                    weights: vec![0.2, 0.4, 0.3, 0.1],
                },
            },
            SynthFeature {
                name: "Sex".into(),
                dist: FeatureDist::Categories {
                    values: vec!["F".into(), "M".into()],
                    weights: vec![0.5, 0.5],
                },
            },
            SynthFeature {
                name: "Race".into(),
                dist: FeatureDist::Categories {
                    values: vec!["asian".into(), "black".into(), "white".into()],
                    weights: vec![0.15, 0.20, 0.65],
                },
            },
        ];
        let planted = |age: f64, size: f64, ext: f64| {
            BTreeMap::from([
                ("Age".to_string(), age),
                ("Tumor Size".to_string(), size),
                ("Extension".to_string(), ext),
            ])
        };
        SynthSpec {
            cancer_type: "colorectal".into(),
            features,
            n_per_stage: Stage::ALL.iter().map(|&s| (s, n_per_stage)).collect(),
            coefficients: BTreeMap::from([
                (Stage::Localized, planted(1.9, 1.1, 1.3)),
                (Stage::Regional, planted(1.6, 1.4, 1.5)),
                (Stage::Distant, planted(1.0, 1.5, 1.7)),
            ]),
            noise_scale: 0.25,
            base_rate: 0.62,
            seed,
        }
    }
}

/// Generated cohort plus the generator's ground truth per emitted row.
#[derive(Debug, Clone)]
pub struct SynthCohort {
    pub csv: String,
    /// True survival probability of each row (the generator oracle).
    pub true_survival_probability: Vec<f64>,
    pub survived: Vec<bool>,
    pub stages: Vec<Stage>,
}

fn weighted_index(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut draw = rng.gen_range(0.0..total);
    for (i, &w) in weights.iter().enumerate() {
        if draw < w {
            return i;
        }
        draw -= w;
    }
    weights.len() - 1
}

fn stage_code(stage: Stage) -> &'static str {
    match stage {
        Stage::Localized => "1",
        Stage::Regional => "2",
        Stage::Distant => "7",
    }
}

/// Draw the cohort CSV. Rows are grouped by stage (localized, regional,
/// distant), each stage from its own seeded stream.
pub fn generate_synth(spec: &SynthSpec) -> Result<SynthCohort> {
    spec.validate()?;
    let schema = spec.schema();

    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    let mut header: Vec<&str> = spec.features.iter().map(|f| f.name.as_str()).collect();
    header.extend([
        schema.label_columns.vital_status.as_str(),
        schema.label_columns.survival_months.as_str(),
        schema.label_columns.cause_of_death.as_str(),
        schema.stage_column.as_str(),
    ]);
    writer.write_record(&header)?;

    let death_intercept = {
        let death_rate = (1.0 - spec.base_rate).clamp(1e-9, 1.0 - 1e-9);
        (death_rate / (1.0 - death_rate)).ln()
    };

    let mut true_survival_probability = Vec::new();
    let mut survived_flags = Vec::new();
    let mut stages = Vec::new();

    for (stage_tag, stage) in Stage::ALL.iter().enumerate() {
        let n = spec.n_per_stage.get(stage).copied().unwrap_or(0);
        let coefficients = spec.coefficients.get(stage);
        let mut rng = derive_rng(spec.seed, &[SYNTH_STREAM, stage_tag as u64]);

        for _ in 0..n {
            let mut cells: Vec<String> = Vec::with_capacity(header.len());
            let mut signal = 0.0;
            for feature in &spec.features {
                let (cell, numeric_value) = match &feature.dist {
                    FeatureDist::Gaussian { mean, sd, decimals } => {
                        let raw = mean + sd * gaussian(&mut rng);
                        let cell = format!("{raw:.decimals$}");
                        let value: f64 = cell.parse().unwrap();
                        (cell, Some(value))
                    }
                    FeatureDist::Codes { codes, weights } => {
                        let code = codes[weighted_index(weights, &mut rng)];
                        (code.to_string(), Some(code as f64))
                    }
                    FeatureDist::Categories { values, weights } => {
                        (values[weighted_index(weights, &mut rng)].clone(), None)
                    }
                };
                if let (Some(value), Some(coefficients)) = (numeric_value, coefficients) {
                    if let Some(&beta) = coefficients.get(&feature.name) {
                        let (mean, sd) = feature.moments().unwrap();
                        signal += beta * (value - mean) / sd;
                    }
                }
                cells.push(cell);
            }

            let logit_death = death_intercept + signal + spec.noise_scale * gaussian(&mut rng);
            let p_death = sigmoid(logit_death);
            let survived = rng.gen_range(0.0..1.0) >= p_death;

            // back-fill so the labeling rule reproduces the outcome
            if survived {
                cells.push("alive".into());
                cells.push(rng.gen_range(60..=120i64).to_string());
                cells.push("none".into());
            } else {
                cells.push("dead".into());
                cells.push(rng.gen_range(0..60i64).to_string());
                cells.push(spec.cancer_type.clone());
            }
            cells.push(stage_code(*stage).into());

            writer.write_record(&cells)?;
            true_survival_probability.push(1.0 - p_death);
            survived_flags.push(survived);
            stages.push(*stage);
        }
    }

    let csv = String::from_utf8(
        writer
            .into_inner()
            .map_err(|e| Error::Internal(e.to_string()))?,
    )
    .map_err(|e| Error::Internal(e.to_string()))?;

    Ok(SynthCohort {
        csv,
        true_survival_probability,
        survived: survived_flags,
        stages,
    })
}
