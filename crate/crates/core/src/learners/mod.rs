//! The four classifiers, all from first principles: weighted logistic
//! regression, random forest, AdaBoost on stumps, and symmetric-tree
//! gradient boosting. Everything consumes encoded rows plus per-sample
//! weights and returns probabilities in [0, 1].

pub mod adaboost;
pub mod forest;
pub mod gbdt;
pub mod logistic;
pub mod tree;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use adaboost::{AdaBoostModel, BoostAlgorithm};
pub use forest::ForestModel;
pub use gbdt::GbdtModel;
pub use logistic::LogisticModel;
pub use tree::ClassificationTree;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Learner {
    Logistic,
    RandomForest,
    AdaBoost,
    SymGbdt,
}

impl Learner {
    pub const ALL: [Learner; 4] = [
        Learner::Logistic,
        Learner::RandomForest,
        Learner::AdaBoost,
        Learner::SymGbdt,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            Learner::Logistic => "lr",
            Learner::RandomForest => "rf",
            Learner::AdaBoost => "ada",
            Learner::SymGbdt => "gbdt",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Learner::Logistic => "Logistic Regression",
            Learner::RandomForest => "Random Forest",
            Learner::AdaBoost => "AdaBoost",
            Learner::SymGbdt => "SymGBDT",
        }
    }
}

impl std::str::FromStr for Learner {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "lr" => Ok(Learner::Logistic),
            "rf" => Ok(Learner::RandomForest),
            "ada" => Ok(Learner::AdaBoost),
            "gbdt" => Ok(Learner::SymGbdt),
            other => Err(format!("unknown learner '{other}'")),
        }
    }
}

/// Class weighting mode. In config JSON a mode is either a name
/// (`"balanced"`) or a manual `[w0, w1]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightModeRepr", into = "WeightModeRepr")]
pub enum WeightMode {
    Uniform,
    Balanced,
    BalancedSubsample,
    Manual(f64, f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum WeightModeRepr {
    Name(String),
    Pair([f64; 2]),
}

impl From<WeightMode> for WeightModeRepr {
    fn from(mode: WeightMode) -> Self {
        match mode {
            WeightMode::Uniform => WeightModeRepr::Name("uniform".into()),
            WeightMode::Balanced => WeightModeRepr::Name("balanced".into()),
            WeightMode::BalancedSubsample => WeightModeRepr::Name("balanced_subsample".into()),
            WeightMode::Manual(w0, w1) => WeightModeRepr::Pair([w0, w1]),
        }
    }
}

impl TryFrom<WeightModeRepr> for WeightMode {
    type Error = String;

    fn try_from(repr: WeightModeRepr) -> std::result::Result<Self, String> {
        match repr {
            WeightModeRepr::Name(name) => match name.as_str() {
                "uniform" | "none" => Ok(WeightMode::Uniform),
                "balanced" => Ok(WeightMode::Balanced),
                "balanced_subsample" => Ok(WeightMode::BalancedSubsample),
                other => Err(format!("unknown class weight mode '{other}'")),
            },
            WeightModeRepr::Pair([w0, w1]) => Ok(WeightMode::Manual(w0, w1)),
        }
    }
}

/// Resolved per-class weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub w0: f64,
    pub w1: f64,
}

/// Resolve a weighting mode against observed labels. Balanced uses
/// `w_c = n / (2 * n_c)`.
pub fn compute_class_weights(labels: &[u8], mode: WeightMode) -> Result<ClassWeights> {
    match mode {
        WeightMode::Uniform => Ok(ClassWeights { w0: 1.0, w1: 1.0 }),
        WeightMode::Manual(w0, w1) => {
            if w0 <= 0.0 || w1 <= 0.0 {
                return Err(Error::InvalidConfig(
                    "manual class weights must be strictly positive".into(),
                ));
            }
            Ok(ClassWeights { w0, w1 })
        }
        WeightMode::Balanced | WeightMode::BalancedSubsample => {
            let n1 = labels.iter().filter(|&&l| l == 1).count();
            let n0 = labels.len() - n1;
            if n0 == 0 || n1 == 0 {
                return Err(Error::SingleClass(
                    "balanced weights need both classes present".into(),
                ));
            }
            let n = labels.len() as f64;
            Ok(ClassWeights {
                w0: n / (2.0 * n0 as f64),
                w1: n / (2.0 * n1 as f64),
            })
        }
    }
}

/// Per-sample weights under a class weighting, normalized to mean one so
/// fits are invariant to rescaling all weights by a positive constant.
pub fn sample_weights(labels: &[u8], weights: ClassWeights) -> Vec<f64> {
    let mut w: Vec<f64> = labels
        .iter()
        .map(|&l| if l == 1 { weights.w1 } else { weights.w0 })
        .collect();
    let mean = w.iter().sum::<f64>() / w.len().max(1) as f64;
    if mean > 0.0 {
        for v in &mut w {
            *v /= mean;
        }
    }
    w
}

/// One grid point: a learner with its chosen parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
pub enum ModelParams {
    #[serde(rename = "lr")]
    Logistic { c: f64, class_weight: WeightMode },
    #[serde(rename = "rf")]
    RandomForest {
        n_estimators: usize,
        max_depth: usize,
        min_samples_split: usize,
        min_samples_leaf: usize,
        class_weight: WeightMode,
    },
    #[serde(rename = "ada")]
    AdaBoost {
        n_estimators: usize,
        learning_rate: f64,
        algorithm: BoostAlgorithm,
    },
    #[serde(rename = "gbdt")]
    SymGbdt {
        iterations: usize,
        depth: usize,
        learning_rate: f64,
        l2_leaf_reg: f64,
        class_weights: WeightMode,
    },
}

impl ModelParams {
    pub fn learner(&self) -> Learner {
        match self {
            ModelParams::Logistic { .. } => Learner::Logistic,
            ModelParams::RandomForest { .. } => Learner::RandomForest,
            ModelParams::AdaBoost { .. } => Learner::AdaBoost,
            ModelParams::SymGbdt { .. } => Learner::SymGbdt,
        }
    }

    /// Compact `key=value` rendering for reports.
    pub fn describe(&self) -> String {
        match self {
            ModelParams::Logistic { c, class_weight } => {
                format!("C={c} class_weight={}", describe_mode(*class_weight))
            }
            ModelParams::RandomForest {
                n_estimators,
                max_depth,
                min_samples_split,
                min_samples_leaf,
                class_weight,
            } => format!(
                "n_estimators={n_estimators} max_depth={max_depth} min_samples_split={min_samples_split} min_samples_leaf={min_samples_leaf} class_weight={}",
                describe_mode(*class_weight)
            ),
            ModelParams::AdaBoost {
                n_estimators,
                learning_rate,
                algorithm,
            } => format!(
                "n_estimators={n_estimators} learning_rate={learning_rate} algorithm={}",
                algorithm.name()
            ),
            ModelParams::SymGbdt {
                iterations,
                depth,
                learning_rate,
                l2_leaf_reg,
                class_weights,
            } => format!(
                "iterations={iterations} depth={depth} learning_rate={learning_rate} l2_leaf_reg={l2_leaf_reg} class_weights={}",
                describe_mode(*class_weights)
            ),
        }
    }
}

fn describe_mode(mode: WeightMode) -> String {
    match mode {
        WeightMode::Uniform => "uniform".into(),
        WeightMode::Balanced => "balanced".into(),
        WeightMode::BalancedSubsample => "balanced_subsample".into(),
        WeightMode::Manual(w0, w1) => format!("[{w0},{w1}]"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub params: ModelParams,
    pub seed: u64,
}

impl ModelConfig {
    pub fn learner(&self) -> Learner {
        self.params.learner()
    }
}

/// A fitted classifier.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedModel {
    Logistic(LogisticModel),
    Forest(ForestModel),
    AdaBoost(AdaBoostModel),
    SymGbdt(GbdtModel),
}

impl TrainedModel {
    /// Fit the learner named by the config on encoded rows.
    pub fn fit(config: &ModelConfig, rows: &[Vec<f64>], labels: &[u8]) -> Result<TrainedModel> {
        if rows.len() != labels.len() {
            return Err(Error::Dimension {
                expected: rows.len(),
                got: labels.len(),
            });
        }
        match &config.params {
            ModelParams::Logistic { .. } => {
                logistic::fit_logistic(config, rows, labels).map(TrainedModel::Logistic)
            }
            ModelParams::RandomForest { .. } => {
                forest::fit_random_forest(config, rows, labels).map(TrainedModel::Forest)
            }
            ModelParams::AdaBoost { .. } => {
                adaboost::fit_adaboost(config, rows, labels).map(TrainedModel::AdaBoost)
            }
            ModelParams::SymGbdt { .. } => {
                gbdt::fit_symgbdt(config, rows, labels).map(TrainedModel::SymGbdt)
            }
        }
    }

    pub fn config(&self) -> &ModelConfig {
        match self {
            TrainedModel::Logistic(m) => &m.config,
            TrainedModel::Forest(m) => &m.config,
            TrainedModel::AdaBoost(m) => &m.config,
            TrainedModel::SymGbdt(m) => &m.config,
        }
    }

    pub fn feature_count(&self) -> usize {
        match self {
            TrainedModel::Logistic(m) => m.feature_count,
            TrainedModel::Forest(m) => m.feature_count,
            TrainedModel::AdaBoost(m) => m.feature_count,
            TrainedModel::SymGbdt(m) => m.feature_count,
        }
    }

    /// Survival probability for one encoded row.
    pub fn predict_proba(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.feature_count() {
            return Err(Error::Dimension {
                expected: self.feature_count(),
                got: row.len(),
            });
        }
        let p = match self {
            TrainedModel::Logistic(m) => m.predict_proba(row),
            TrainedModel::Forest(m) => m.predict_proba(row),
            TrainedModel::AdaBoost(m) => m.predict_proba(row),
            TrainedModel::SymGbdt(m) => m.predict_proba(row),
        };
        Ok(p.clamp(0.0, 1.0))
    }

    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.predict_proba(r)).collect()
    }

    /// Versioned JSON document; deserialization reproduces predictions
    /// bit-exactly.
    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<TrainedModel> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelVersion(doc.format_version));
        }
        Ok(doc.model)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    #[serde(flatten)]
    model: TrainedModel,
}

/// Numerically safe logistic function.
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn check_finite(rows: &[Vec<f64>]) -> Result<()> {
    for row in rows {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix".into()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn balanced_weights_example() {
        let mut labels = vec![0u8; 80];
        labels.extend(vec![1u8; 20]);
        let w = compute_class_weights(&labels, WeightMode::Balanced).unwrap();
        assert_relative_eq!(w.w0, 0.625, epsilon = 1e-12);
        assert_relative_eq!(w.w1, 2.5, epsilon = 1e-12);
    }

    #[test]
    fn balanced_weights_symmetric_counts() {
        let mut labels = vec![0u8; 50];
        labels.extend(vec![1u8; 50]);
        let w = compute_class_weights(&labels, WeightMode::Balanced).unwrap();
        assert_eq!(w.w0, 1.0);
        assert_eq!(w.w1, 1.0);
    }

    #[test]
    fn manual_weights_pass_through() {
        let w = compute_class_weights(&[0, 1], WeightMode::Manual(1.0, 5.0)).unwrap();
        assert_eq!(w.w0, 1.0);
        assert_eq!(w.w1, 5.0);
    }

    #[test]
    fn balanced_with_single_class_errors() {
        let err = compute_class_weights(&[1, 1, 1], WeightMode::Balanced).unwrap_err();
        assert!(matches!(err, Error::SingleClass(_)));
    }

    #[test]
    fn sample_weights_are_mean_one() {
        let mut labels = vec![0u8; 30];
        labels.extend(vec![1u8; 10]);
        let cw = compute_class_weights(&labels, WeightMode::Manual(1.0, 5.0)).unwrap();
        let w = sample_weights(&labels, cw);
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        assert_relative_eq!(mean, 1.0, epsilon = 1e-12);
        assert_relative_eq!(w[39] / w[0], 5.0, epsilon = 1e-12);
    }

    #[test]
    fn weight_mode_json_round_trip() {
        for (mode, json) in [
            (WeightMode::Balanced, "\"balanced\""),
            (WeightMode::Manual(1.0, 5.0), "[1.0,5.0]"),
        ] {
            assert_eq!(serde_json::to_string(&mode).unwrap(), json);
            let back: WeightMode = serde_json::from_str(json).unwrap();
            assert_eq!(back, mode);
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]

        // probability bounds under randomized data, for all four learners
        #[test]
        fn predictions_stay_in_unit_interval(
            raw in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, 0u8..2), 12..40),
            learner_pick in 0usize..4,
            seed in 0u64..50,
        ) {
            use proptest::prelude::prop_assume;
            let rows: Vec<Vec<f64>> = raw.iter().map(|&(a, b, _)| vec![a, b]).collect();
            let labels: Vec<u8> = raw.iter().map(|&(_, _, l)| l).collect();
            prop_assume!(labels.contains(&0) && labels.contains(&1));
            let params = match learner_pick {
                0 => ModelParams::Logistic { c: 1.0, class_weight: WeightMode::Balanced },
                1 => ModelParams::RandomForest {
                    n_estimators: 5,
                    max_depth: 3,
                    min_samples_split: 2,
                    min_samples_leaf: 1,
                    class_weight: WeightMode::Balanced,
                },
                2 => ModelParams::AdaBoost {
                    n_estimators: 10,
                    learning_rate: 1.0,
                    algorithm: BoostAlgorithm::SammeR,
                },
                _ => ModelParams::SymGbdt {
                    iterations: 10,
                    depth: 3,
                    learning_rate: 0.3,
                    l2_leaf_reg: 1.0,
                    class_weights: WeightMode::Manual(1.0, 3.0),
                },
            };
            let model = TrainedModel::fit(&ModelConfig { params, seed }, &rows, &labels).unwrap();
            for row in rows.iter().take(10) {
                let p = model.predict_proba(row).unwrap();
                proptest::prop_assert!((0.0..=1.0).contains(&p) && p.is_finite());
            }
            let p = model.predict_proba(&[100.0, -100.0]).unwrap();
            proptest::prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}
