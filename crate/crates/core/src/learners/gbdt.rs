//! Gradient boosting on oblivious (symmetric) trees: every node of a level
//! shares one (feature, threshold) split, chosen to maximize the weighted
//! second-order gain on logloss gradients, with Newton leaf values
//! `-sum(g) / (sum(h) + lambda)`.

use serde::{Deserialize, Serialize};

use super::{check_finite, compute_class_weights, sample_weights, sigmoid, ModelConfig, ModelParams};
use crate::{Error, Result};

const RATE_CLAMP: f64 = 1e-6;
const PROB_CLAMP: f64 = 1e-12;

/// One level-shared-split tree. Leaf index bits follow the level order,
/// high bit first; bit 1 means the row went right (value above threshold).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObliviousTree {
    pub splits: Vec<(usize, f64)>,
    /// `2^levels` values, already scaled by the learning rate.
    pub leaf_values: Vec<f64>,
}

impl ObliviousTree {
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut idx = 0;
        for &(feature, threshold) in &self.splits {
            idx = (idx << 1) | usize::from(row[feature] > threshold);
        }
        idx
    }

    pub fn value(&self, row: &[f64]) -> f64 {
        self.leaf_values[self.leaf_index(row)]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GbdtModel {
    pub config: ModelConfig,
    pub feature_count: usize,
    pub base_score: f64,
    pub trees: Vec<ObliviousTree>,
}

impl GbdtModel {
    pub fn raw_score(&self, row: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.value(row)).sum::<f64>()
    }

    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        sigmoid(self.raw_score(row))
    }
}

/// Weighted logloss of a raw score against a binary label.
pub fn weighted_logloss(score: f64, label: u8, weight: f64) -> f64 {
    let p = sigmoid(score).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let y = f64::from(label);
    -weight * (y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Gradient and Hessian of the weighted logloss with respect to the raw
/// score: `g = w (p - y)`, `h = w p (1 - p)`.
pub fn logloss_grad_hess(score: f64, label: u8, weight: f64) -> (f64, f64) {
    let p = sigmoid(score).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    (weight * (p - f64::from(label)), weight * p * (1.0 - p))
}

/// Second-order optimal leaf output under L2 leaf regularization.
pub fn newton_leaf(sum_g: f64, sum_h: f64, lambda: f64) -> f64 {
    -sum_g / (sum_h + lambda)
}

pub fn fit_symgbdt(config: &ModelConfig, rows: &[Vec<f64>], labels: &[u8]) -> Result<GbdtModel> {
    let ModelParams::SymGbdt {
        iterations,
        depth,
        learning_rate,
        l2_leaf_reg,
        class_weights,
    } = config.params
    else {
        return Err(Error::InvalidConfig("expected SymGBDT parameters".into()));
    };
    if rows.is_empty() {
        return Err(Error::EmptyCohort);
    }
    check_finite(rows)?;

    let n = rows.len();
    let d = rows[0].len();
    let positives = labels.iter().filter(|&&l| l == 1).count();

    if positives == 0 || positives == n {
        // single-class input degenerates to the clamped prior
        let rate = (positives as f64 / n as f64).clamp(RATE_CLAMP, 1.0 - RATE_CLAMP);
        return Ok(GbdtModel {
            config: config.clone(),
            feature_count: d,
            base_score: (rate / (1.0 - rate)).ln(),
            trees: Vec::new(),
        });
    }

    let weights = sample_weights(labels, compute_class_weights(labels, class_weights)?);
    let weight_total: f64 = weights.iter().sum();
    let positive_weight: f64 = weights
        .iter()
        .zip(labels)
        .filter(|(_, &y)| y == 1)
        .map(|(w, _)| w)
        .sum();
    let rate = (positive_weight / weight_total).clamp(RATE_CLAMP, 1.0 - RATE_CLAMP);
    let base_score = (rate / (1.0 - rate)).ln();

    // per-feature row order, computed once and reused every level
    let sorted: Vec<Vec<u32>> = (0..d)
        .map(|f| {
            let mut order: Vec<u32> = (0..n as u32).collect();
            order.sort_unstable_by(|&a, &b| {
                rows[a as usize][f]
                    .partial_cmp(&rows[b as usize][f])
                    .unwrap()
            });
            order
        })
        .collect();

    let lambda = l2_leaf_reg;
    let mut scores = vec![base_score; n];
    let mut gradients = vec![0.0; n];
    let mut hessians = vec![0.0; n];
    let mut leaf_of = vec![0usize; n];
    let mut trees = Vec::with_capacity(iterations);

    for _ in 0..iterations {
        for i in 0..n {
            let (g, h) = logloss_grad_hess(scores[i], labels[i], weights[i]);
            gradients[i] = g;
            hessians[i] = h;
        }
        leaf_of.iter_mut().for_each(|l| *l = 0);

        let mut splits = Vec::with_capacity(depth);
        for level in 0..depth {
            let n_leaves = 1usize << level;
            let mut g_tot = vec![0.0; n_leaves];
            let mut h_tot = vec![0.0; n_leaves];
            for i in 0..n {
                g_tot[leaf_of[i]] += gradients[i];
                h_tot[leaf_of[i]] += hessians[i];
            }
            let base: f64 = (0..n_leaves)
                .map(|l| g_tot[l] * g_tot[l] / (h_tot[l] + lambda))
                .sum();

            let Some((feature, threshold)) = best_level_split(
                rows, &sorted, &leaf_of, &gradients, &hessians, &g_tot, &h_tot, base, lambda,
            ) else {
                break;
            };
            for i in 0..n {
                leaf_of[i] = (leaf_of[i] << 1) | usize::from(rows[i][feature] > threshold);
            }
            splits.push((feature, threshold));
        }

        let n_leaves = 1usize << splits.len();
        let mut g_leaf = vec![0.0; n_leaves];
        let mut h_leaf = vec![0.0; n_leaves];
        for i in 0..n {
            g_leaf[leaf_of[i]] += gradients[i];
            h_leaf[leaf_of[i]] += hessians[i];
        }
        let leaf_values: Vec<f64> = (0..n_leaves)
            .map(|l| learning_rate * newton_leaf(g_leaf[l], h_leaf[l], lambda))
            .collect();

        for i in 0..n {
            scores[i] += leaf_values[leaf_of[i]];
        }
        trees.push(ObliviousTree {
            splits,
            leaf_values,
        });
    }

    Ok(GbdtModel {
        config: config.clone(),
        feature_count: d,
        base_score,
        trees,
    })
}

/// Scan every (feature, boundary) candidate for the split maximizing the
/// summed leaf gain. Returns `None` when no feature has two distinct values.
#[allow(clippy::too_many_arguments)]
fn best_level_split(
    rows: &[Vec<f64>],
    sorted: &[Vec<u32>],
    leaf_of: &[usize],
    gradients: &[f64],
    hessians: &[f64],
    g_tot: &[f64],
    h_tot: &[f64],
    base: f64,
    lambda: f64,
) -> Option<(usize, f64)> {
    let n_leaves = g_tot.len();
    let mut best: Option<(f64, usize, f64)> = None;
    let mut g_left = vec![0.0; n_leaves];
    let mut h_left = vec![0.0; n_leaves];
    let mut contrib = vec![0.0; n_leaves];

    for (feature, order) in sorted.iter().enumerate() {
        g_left.iter_mut().for_each(|v| *v = 0.0);
        h_left.iter_mut().for_each(|v| *v = 0.0);
        let mut total = 0.0;
        for l in 0..n_leaves {
            contrib[l] = g_tot[l] * g_tot[l] / (h_tot[l] + lambda);
            total += contrib[l];
        }

        let mut prev_value = f64::NAN;
        for (pos, &i) in order.iter().enumerate() {
            let i = i as usize;
            let value = rows[i][feature];
            if pos > 0 && value > prev_value {
                let gain = total - base;
                let threshold = 0.5 * (prev_value + value);
                let better = match &best {
                    None => true,
                    Some((best_gain, _, _)) => gain > *best_gain,
                };
                if better {
                    best = Some((gain, feature, threshold));
                }
            }
            let leaf = leaf_of[i];
            total -= contrib[leaf];
            g_left[leaf] += gradients[i];
            h_left[leaf] += hessians[i];
            let gr = g_tot[leaf] - g_left[leaf];
            let hr = h_tot[leaf] - h_left[leaf];
            contrib[leaf] =
                g_left[leaf] * g_left[leaf] / (h_left[leaf] + lambda) + gr * gr / (hr + lambda);
            total += contrib[leaf];
            prev_value = value;
        }
    }
    best.map(|(_, feature, threshold)| (feature, threshold))
}
