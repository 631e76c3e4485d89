//! AdaBoost on depth-1 stumps, in the discrete (SAMME) and real (SAMME.R)
//! variants for the two-class case. Probabilities come from the logistic of
//! the aggregated margin.

use serde::{Deserialize, Serialize};

use super::tree::{fit_classification_tree, ClassificationTree, FeatureSubset, TreeParams};
use super::{check_finite, sigmoid, ModelConfig, ModelParams};
use crate::{Error, Result};

const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoostAlgorithm {
    #[serde(rename = "SAMME")]
    Samme,
    #[serde(rename = "SAMME.R")]
    SammeR,
}

impl BoostAlgorithm {
    pub fn name(self) -> &'static str {
        match self {
            BoostAlgorithm::Samme => "SAMME",
            BoostAlgorithm::SammeR => "SAMME.R",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoostStage {
    pub stump: ClassificationTree,
    /// SAMME: learning-rate-scaled alpha. SAMME.R: the learning rate; the
    /// stage output is the stump's log-odds.
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdaBoostModel {
    pub config: ModelConfig,
    pub feature_count: usize,
    pub algorithm: BoostAlgorithm,
    pub stages: Vec<BoostStage>,
}

impl AdaBoostModel {
    fn margin(&self, row: &[f64]) -> f64 {
        self.stages
            .iter()
            .map(|stage| {
                let probs = stage.stump.leaf_probs(row);
                match self.algorithm {
                    BoostAlgorithm::Samme => {
                        let vote = if probs[1] > probs[0] { 1.0 } else { -1.0 };
                        stage.weight * vote
                    }
                    BoostAlgorithm::SammeR => {
                        let p1 = probs[1].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                        let p0 = probs[0].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                        stage.weight * (p1.ln() - p0.ln())
                    }
                }
            })
            .sum()
    }

    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        sigmoid(self.margin(row))
    }
}

/// Stage weight of the discrete variant: `ln((1 - eps) / eps) + ln(K - 1)`
/// with K = 2 classes.
pub fn samme_alpha(error: f64) -> f64 {
    let error = error.max(1e-10);
    ((1.0 - error) / error).ln()
}

pub fn fit_adaboost(
    config: &ModelConfig,
    rows: &[Vec<f64>],
    labels: &[u8],
) -> Result<AdaBoostModel> {
    let ModelParams::AdaBoost {
        n_estimators,
        learning_rate,
        algorithm,
    } = config.params
    else {
        return Err(Error::InvalidConfig("expected AdaBoost parameters".into()));
    };
    if rows.is_empty() {
        return Err(Error::EmptyCohort);
    }
    check_finite(rows)?;
    let positives = labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::SingleClass("AdaBoost needs both classes".into()));
    }

    let stump_params = TreeParams {
        max_depth: 1,
        min_samples_split: 2,
        min_samples_leaf: 1,
        feature_subset: FeatureSubset::All,
    };
    let n = rows.len();
    let indices: Vec<usize> = (0..n).collect();
    let mut weights = vec![1.0 / n as f64; n];
    let mut stages = Vec::new();

    for _ in 0..n_estimators {
        let stump =
            fit_classification_tree(rows, labels, &weights, &indices, stump_params, None);
        let misses: Vec<bool> = rows
            .iter()
            .zip(labels)
            .map(|(row, &label)| stump.predict_class(row) != label)
            .collect();
        let error: f64 = weights
            .iter()
            .zip(&misses)
            .filter(|(_, &miss)| miss)
            .map(|(w, _)| w)
            .sum();

        if error >= 0.5 {
            // no better than chance; an empty ensemble scores 0.5 everywhere
            break;
        }

        match algorithm {
            BoostAlgorithm::Samme => {
                let alpha = learning_rate * samme_alpha(error);
                stages.push(BoostStage {
                    stump: stump.clone(),
                    weight: alpha,
                });
                if error <= 0.0 {
                    break;
                }
                for (w, &miss) in weights.iter_mut().zip(&misses) {
                    if miss {
                        *w *= alpha.exp();
                    }
                }
            }
            BoostAlgorithm::SammeR => {
                stages.push(BoostStage {
                    stump: stump.clone(),
                    weight: learning_rate,
                });
                if error <= 0.0 {
                    break;
                }
                for ((w, row), &label) in weights.iter_mut().zip(rows).zip(labels) {
                    let probs = stump.leaf_probs(row);
                    let p1 = probs[1].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                    let p0 = probs[0].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                    let half_log_odds = 0.5 * (p1.ln() - p0.ln());
                    let y = if label == 1 { 1.0 } else { -1.0 };
                    *w *= (-learning_rate * y * half_log_odds).exp();
                }
            }
        }

        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
    }

    Ok(AdaBoostModel {
        config: config.clone(),
        feature_count: rows[0].len(),
        algorithm,
        stages,
    })
}
