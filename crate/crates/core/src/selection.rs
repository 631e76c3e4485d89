//! Stratified K-fold cross-validation, the five evaluation metrics, ROC
//! curves, and exhaustive grid search ranked on mean ROC-AUC.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encode::CohortTable;
use crate::ingest::Stage;
use crate::learners::{
    BoostAlgorithm, Learner, ModelConfig, ModelParams, TrainedModel, WeightMode,
};
use crate::rng::derive_rng;
use crate::{Error, Result};

const FOLD_STREAM: u64 = 0x2;

/// Per-row fold assignments from stratified round-robin dealing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn train_test(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &f) in self.assignments.iter().enumerate() {
            if f == fold {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }
}

/// Shuffle each class separately and deal round-robin, so per-fold class
/// counts stay within one of exact proportionality.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidConfig("k must be at least 2".into()));
    }
    let mut assignments = vec![0usize; labels.len()];
    for class in [0u8, 1u8] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(Error::ClassTooSmall {
                class: class.to_string(),
                count: members.len(),
                k,
            });
        }
        use rand::seq::SliceRandom;
        let mut rng = derive_rng(seed, &[FOLD_STREAM, class as u64]);
        members.shuffle(&mut rng);
        for (j, &idx) in members.iter().enumerate() {
            assignments[idx] = j % k;
        }
    }
    Ok(FoldPlan {
        k,
        assignments,
        seed,
    })
}

/// The four thresholded metrics plus (optionally) AUC. Degenerate flags mark
/// precision/recall that had an empty denominator and were reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: Option<f64>,
    pub threshold: f64,
    pub degenerate_precision: bool,
    pub degenerate_recall: bool,
}

/// Confusion-matrix metrics at a fixed threshold; the positive class is
/// "survived" (label 1), predicted when `score >= threshold`.
pub fn thresholded_metrics(scores: &[f64], labels: &[u8], threshold: f64) -> Result<MetricsRow> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(Error::Dimension {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    let (mut tp, mut fp, mut tn, mut fnn) = (0usize, 0usize, 0usize, 0usize);
    for (&score, &label) in scores.iter().zip(labels) {
        match (score >= threshold, label == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fnn += 1,
        }
    }
    let accuracy = (tp + tn) as f64 / scores.len() as f64;
    let degenerate_precision = tp + fp == 0;
    let precision = if degenerate_precision {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let degenerate_recall = tp + fnn == 0;
    let recall = if degenerate_recall {
        0.0
    } else {
        tp as f64 / (tp + fnn) as f64
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(MetricsRow {
        accuracy,
        precision,
        recall,
        f1,
        auc: None,
        threshold,
        degenerate_precision,
        degenerate_recall,
    })
}

/// ROC curve over descending unique score thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// (false positive rate, true positive rate), from (0,0) to (1,1).
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Curve plus AUC. The AUC equals the Mann-Whitney statistic
/// `(wins + 0.5 * ties) / (n_pos * n_neg)`; ties are grouped so the
/// trapezoidal area of the curve is that same value.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass("AUC needs both classes".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores".into()));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    // integer twice-the-area accumulator keeps the trapezoid exact
    let mut area2 = 0u128;
    let mut pos = 0;
    while pos < order.len() {
        let mut end = pos;
        while end < order.len() && scores[order[end]] == scores[order[pos]] {
            end += 1;
        }
        let (prev_tp, prev_fp) = (tp, fp);
        for &i in &order[pos..end] {
            if labels[i] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        area2 += u128::from(fp - prev_fp) * u128::from(prev_tp + tp);
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
        pos = end;
    }

    let auc = area2 as f64 / (2.0 * positives as f64 * negatives as f64);
    Ok(RocCurve { points, auc })
}

/// The full hyperparameter surface, one axis list per parameter. Defaults
/// are the published grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperGrid {
    pub logistic: LogisticGrid,
    pub random_forest: ForestGrid,
    pub adaboost: AdaBoostGrid,
    pub sym_gbdt: GbdtGrid,
}

impl Default for HyperGrid {
    fn default() -> Self {
        HyperGrid {
            logistic: LogisticGrid::default(),
            random_forest: ForestGrid::default(),
            adaboost: AdaBoostGrid::default(),
            sym_gbdt: GbdtGrid::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticGrid {
    pub c: Vec<f64>,
    pub class_weight: Vec<WeightMode>,
}

impl Default for LogisticGrid {
    fn default() -> Self {
        LogisticGrid {
            c: vec![0.001, 0.01, 0.1, 1.0, 10.0],
            class_weight: vec![WeightMode::Uniform, WeightMode::Balanced],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestGrid {
    pub n_estimators: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub min_samples_split: Vec<usize>,
    pub min_samples_leaf: Vec<usize>,
    pub class_weight: Vec<WeightMode>,
}

impl Default for ForestGrid {
    fn default() -> Self {
        ForestGrid {
            n_estimators: vec![100, 200],
            max_depth: vec![3, 5, 7],
            min_samples_split: vec![2, 5],
            min_samples_leaf: vec![1, 2, 4],
            class_weight: vec![WeightMode::Balanced, WeightMode::BalancedSubsample],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaBoostGrid {
    pub n_estimators: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub algorithm: Vec<BoostAlgorithm>,
}

impl Default for AdaBoostGrid {
    fn default() -> Self {
        AdaBoostGrid {
            n_estimators: vec![50, 100, 200],
            learning_rate: vec![0.01, 0.1, 1.0],
            algorithm: vec![BoostAlgorithm::Samme, BoostAlgorithm::SammeR],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtGrid {
    pub iterations: Vec<usize>,
    pub depth: Vec<usize>,
    pub learning_rate: Vec<f64>,
    pub l2_leaf_reg: Vec<f64>,
    pub class_weights: Vec<WeightMode>,
}

impl Default for GbdtGrid {
    fn default() -> Self {
        GbdtGrid {
            iterations: vec![100, 200],
            depth: vec![3, 5, 7],
            learning_rate: vec![0.03, 0.1],
            l2_leaf_reg: vec![1.0, 3.0, 5.0],
            class_weights: vec![
                WeightMode::Manual(1.0, 1.0),
                WeightMode::Manual(1.0, 3.0),
                WeightMode::Manual(1.0, 5.0),
            ],
        }
    }
}

impl HyperGrid {
    /// Cartesian product for one learner, axes in declared order.
    pub fn expand(&self, learner: Learner, seed: u64) -> Vec<ModelConfig> {
        let mut configs = Vec::new();
        match learner {
            Learner::Logistic => {
                for &c in &self.logistic.c {
                    for &class_weight in &self.logistic.class_weight {
                        configs.push(ModelParams::Logistic { c, class_weight });
                    }
                }
            }
            Learner::RandomForest => {
                let g = &self.random_forest;
                for &n_estimators in &g.n_estimators {
                    for &max_depth in &g.max_depth {
                        for &min_samples_split in &g.min_samples_split {
                            for &min_samples_leaf in &g.min_samples_leaf {
                                for &class_weight in &g.class_weight {
                                    configs.push(ModelParams::RandomForest {
                                        n_estimators,
                                        max_depth,
                                        min_samples_split,
                                        min_samples_leaf,
                                        class_weight,
                                    });
                                }
                            }
                        }
                    }
                }
            }
            Learner::AdaBoost => {
                let g = &self.adaboost;
                for &n_estimators in &g.n_estimators {
                    for &learning_rate in &g.learning_rate {
                        for &algorithm in &g.algorithm {
                            configs.push(ModelParams::AdaBoost {
                                n_estimators,
                                learning_rate,
                                algorithm,
                            });
                        }
                    }
                }
            }
            Learner::SymGbdt => {
                let g = &self.sym_gbdt;
                for &iterations in &g.iterations {
                    for &depth in &g.depth {
                        for &learning_rate in &g.learning_rate {
                            for &l2_leaf_reg in &g.l2_leaf_reg {
                                for &class_weights in &g.class_weights {
                                    configs.push(ModelParams::SymGbdt {
                                        iterations,
                                        depth,
                                        learning_rate,
                                        l2_leaf_reg,
                                        class_weights,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        configs
            .into_iter()
            .map(|params| ModelConfig { params, seed })
            .collect()
    }
}

/// Cross-validation outcome of one grid point.
#[derive(Debug, Clone)]
pub struct ConfigResult {
    pub config: ModelConfig,
    pub per_fold: Vec<MetricsRow>,
    pub mean_auc: f64,
    pub failed: Option<String>,
}

/// All grid points in declared order plus the winner.
#[derive(Debug, Clone)]
pub struct GridResult {
    pub results: Vec<ConfigResult>,
    pub best_index: usize,
}

impl GridResult {
    pub fn best(&self) -> &ConfigResult {
        &self.results[self.best_index]
    }
}

/// Mean of the per-fold metric rows.
pub fn mean_metrics(rows: &[MetricsRow]) -> MetricsRow {
    let n = rows.len().max(1) as f64;
    MetricsRow {
        accuracy: rows.iter().map(|r| r.accuracy).sum::<f64>() / n,
        precision: rows.iter().map(|r| r.precision).sum::<f64>() / n,
        recall: rows.iter().map(|r| r.recall).sum::<f64>() / n,
        f1: rows.iter().map(|r| r.f1).sum::<f64>() / n,
        auc: Some(rows.iter().filter_map(|r| r.auc).sum::<f64>() / n),
        threshold: rows.first().map_or(0.5, |r| r.threshold),
        degenerate_precision: rows.iter().any(|r| r.degenerate_precision),
        degenerate_recall: rows.iter().any(|r| r.degenerate_recall),
    }
}

fn evaluate_config(
    config: &ModelConfig,
    table: &CohortTable,
    plan: &FoldPlan,
) -> std::result::Result<Vec<MetricsRow>, String> {
    let mut per_fold = Vec::with_capacity(plan.k);
    for fold in 0..plan.k {
        let (train, test) = plan.train_test(fold);
        let train_rows: Vec<Vec<f64>> = train.iter().map(|&i| table.rows[i].clone()).collect();
        let train_labels: Vec<u8> = train.iter().map(|&i| table.labels[i]).collect();
        let model =
            TrainedModel::fit(config, &train_rows, &train_labels).map_err(|e| e.to_string())?;

        let scores: Vec<f64> = test
            .iter()
            .map(|&i| model.predict_proba(&table.rows[i]))
            .collect::<Result<_>>()
            .map_err(|e| e.to_string())?;
        let test_labels: Vec<u8> = test.iter().map(|&i| table.labels[i]).collect();
        let mut metrics =
            thresholded_metrics(&scores, &test_labels, 0.5).map_err(|e| e.to_string())?;
        metrics.auc = Some(
            roc_auc(&scores, &test_labels)
                .map_err(|e| e.to_string())?
                .auc,
        );
        per_fold.push(metrics);
    }
    Ok(per_fold)
}

/// Evaluate the full Cartesian product of a learner's grid under the fold
/// plan. Configs that fail to fit are recorded and excluded from ranking;
/// ties go to the earliest grid point.
pub fn grid_search(
    table: &CohortTable,
    learner: Learner,
    grid: &HyperGrid,
    plan: &FoldPlan,
) -> Result<GridResult> {
    let configs = grid.expand(learner, plan.seed);
    if configs.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "empty grid for {}",
            learner.display_name()
        )));
    }

    let results: Vec<ConfigResult> = configs
        .par_iter()
        .map(|config| match evaluate_config(config, table, plan) {
            Ok(per_fold) => {
                let mean_auc = per_fold.iter().filter_map(|m| m.auc).sum::<f64>()
                    / per_fold.len() as f64;
                ConfigResult {
                    config: config.clone(),
                    per_fold,
                    mean_auc,
                    failed: None,
                }
            }
            Err(message) => ConfigResult {
                config: config.clone(),
                per_fold: Vec::new(),
                mean_auc: f64::NEG_INFINITY,
                failed: Some(message),
            },
        })
        .collect();

    let mut best_index = None;
    for (i, result) in results.iter().enumerate() {
        if result.failed.is_some() {
            continue;
        }
        match best_index {
            None => best_index = Some(i),
            Some(b) => {
                if result.mean_auc > results[b].mean_auc {
                    best_index = Some(i);
                }
            }
        }
    }
    let best_index = best_index.ok_or_else(|| {
        Error::Internal(format!(
            "every {} grid config failed to fit",
            learner.display_name()
        ))
    })?;

    Ok(GridResult {
        results,
        best_index,
    })
}

#[derive(Debug, Clone)]
pub enum StageStatus {
    Completed,
    Skipped(String),
}

#[derive(Debug, Clone)]
pub struct LearnerOutcome {
    pub learner: Learner,
    pub grid: Option<GridResult>,
    pub mean: Option<MetricsRow>,
    pub error: Option<String>,
}

#[derive(Debug)]
pub struct StageOutcome {
    pub stage: Stage,
    pub status: StageStatus,
    pub plan: Option<FoldPlan>,
    pub learners: Vec<LearnerOutcome>,
}

/// Grid-search the given learners on each stage cohort. Stages whose label
/// counts cannot sustain the fold plan are marked skipped; the rest still
/// run.
pub fn evaluate_stagewise(
    tables: &[(Stage, &CohortTable)],
    grid: &HyperGrid,
    k: usize,
    seed: u64,
    learners: &[Learner],
) -> Vec<StageOutcome> {
    tables
        .iter()
        .map(|&(stage, table)| {
            let plan = match stratified_kfold(&table.labels, k, derive_seed_for_stage(seed, stage))
            {
                Ok(plan) => plan,
                Err(err) => {
                    return StageOutcome {
                        stage,
                        status: StageStatus::Skipped(err.to_string()),
                        plan: None,
                        learners: Vec::new(),
                    }
                }
            };
            let learners = learners
                .iter()
                .map(|&learner| match grid_search(table, learner, grid, &plan) {
                    Ok(result) => {
                        let mean = mean_metrics(&result.best().per_fold);
                        LearnerOutcome {
                            learner,
                            grid: Some(result),
                            mean: Some(mean),
                            error: None,
                        }
                    }
                    Err(err) => LearnerOutcome {
                        learner,
                        grid: None,
                        mean: None,
                        error: Some(err.to_string()),
                    },
                })
                .collect();
            StageOutcome {
                stage,
                status: StageStatus::Completed,
                plan: Some(plan),
                learners,
            }
        })
        .collect()
}

fn derive_seed_for_stage(seed: u64, stage: Stage) -> u64 {
    let tag = match stage {
        Stage::Localized => 0,
        Stage::Regional => 1,
        Stage::Distant => 2,
    };
    crate::rng::derive_seed(seed, &[FOLD_STREAM, 0xA11, tag])
}
