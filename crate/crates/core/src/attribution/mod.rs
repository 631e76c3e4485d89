//! Model explanations: exact Shapley enumeration, kernel-weighted Shapley
//! regression, local linear surrogates, and the cohort-level top-feature
//! summaries.

pub mod lime;
pub mod shapley;
pub mod summary;

use rand::seq::SliceRandom;

use crate::rng::derive_rng;

pub use lime::{lime_explain, select_lime_case, LimeConfig, LocalExplanation, PerturbationStats};
pub use shapley::{exact_shapley, kernel_shapley};
pub use summary::{presence_heatmap, shap_summary, PresenceMatrix, ShapSummary};

const BACKGROUND_STREAM: u64 = 0x10;

/// Per-column contributions for one instance. For exact Shapley the
/// contributions sum to `prediction - baseline`.
#[derive(Debug, Clone)]
pub struct Attribution {
    pub contributions: Vec<f64>,
    pub baseline: f64,
    pub prediction: f64,
    /// Set when the kernel solve needed the ridge fallback.
    pub ridge_fallback: bool,
}

impl Attribution {
    pub fn efficiency_gap(&self) -> f64 {
        let total: f64 = self.contributions.iter().sum();
        total - (self.prediction - self.baseline)
    }
}

/// Fixed reference rows the value function marginalizes over.
#[derive(Debug, Clone)]
pub struct BackgroundSet {
    pub rows: Vec<Vec<f64>>,
    pub seed: u64,
}

impl BackgroundSet {
    /// Seeded subsample without replacement; takes everything when the
    /// cohort is no larger than `size`.
    pub fn sample(rows: &[Vec<f64>], size: usize, seed: u64) -> BackgroundSet {
        if rows.len() <= size {
            return BackgroundSet {
                rows: rows.to_vec(),
                seed,
            };
        }
        let mut rng = derive_rng(seed, &[BACKGROUND_STREAM]);
        let mut indices: Vec<usize> = (0..rows.len()).collect();
        indices.shuffle(&mut rng);
        let mut picked = indices[..size].to_vec();
        picked.sort_unstable();
        BackgroundSet {
            rows: picked.into_iter().map(|i| rows[i].clone()).collect(),
            seed,
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, seed: u64) -> BackgroundSet {
        BackgroundSet { rows, seed }
    }
}
