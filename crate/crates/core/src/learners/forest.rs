//! Random forest: bootstrap-resampled Gini trees over sqrt(d) feature
//! subsets, probabilities averaged over per-tree leaf frequencies.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_classification_tree, ClassificationTree, FeatureSubset, TreeParams};
use super::{
    check_finite, compute_class_weights, ModelConfig, ModelParams, WeightMode,
};
use crate::rng::derive_rng;
use crate::{Error, Result};

const TREE_STREAM: u64 = 0x1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestModel {
    pub config: ModelConfig,
    pub feature_count: usize,
    pub trees: Vec<ClassificationTree>,
}

impl ForestModel {
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.leaf_probs(row)[1]).sum();
        sum / self.trees.len() as f64
    }
}

pub fn fit_random_forest(
    config: &ModelConfig,
    rows: &[Vec<f64>],
    labels: &[u8],
) -> Result<ForestModel> {
    let ModelParams::RandomForest {
        n_estimators,
        max_depth,
        min_samples_split,
        min_samples_leaf,
        class_weight,
    } = config.params
    else {
        return Err(Error::InvalidConfig(
            "expected random forest parameters".into(),
        ));
    };
    if rows.is_empty() {
        return Err(Error::EmptyCohort);
    }
    check_finite(rows)?;

    let params = TreeParams {
        max_depth,
        min_samples_split,
        min_samples_leaf,
        feature_subset: FeatureSubset::Sqrt,
    };
    let n = rows.len();

    // balanced weights come from the full training labels; the subsample
    // variant recomputes them inside each bootstrap
    let base_weights = match class_weight {
        WeightMode::BalancedSubsample => None,
        mode => Some(compute_class_weights(labels, mode)?),
    };

    let trees: Vec<ClassificationTree> = (0..n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = derive_rng(config.seed, &[TREE_STREAM, t as u64]);
            let bootstrap: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let class_weights = match base_weights {
                Some(w) => w,
                None => {
                    let boot_labels: Vec<u8> = bootstrap.iter().map(|&i| labels[i]).collect();
                    // a one-class bootstrap grows a pure tree; weights are moot
                    compute_class_weights(&boot_labels, WeightMode::Balanced)
                        .unwrap_or(super::ClassWeights { w0: 1.0, w1: 1.0 })
                }
            };
            let weights: Vec<f64> = labels
                .iter()
                .map(|&l| if l == 1 { class_weights.w1 } else { class_weights.w0 })
                .collect();
            fit_classification_tree(rows, labels, &weights, &bootstrap, params, Some(&mut rng))
        })
        .collect();

    Ok(ForestModel {
        config: config.clone(),
        feature_count: rows[0].len(),
        trees,
    })
}
