//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line (run with `--nocapture` to see them). Tolerances and runtime
//! budgets are pinned in the asserts.

use std::time::{Duration, Instant};

use rand::Rng;

use stagewise::attribution::{
    exact_shapley, kernel_shapley, lime_explain, presence_heatmap, shap_summary, BackgroundSet,
    LimeConfig, PerturbationStats,
};
use stagewise::encode::encode;
use stagewise::ingest::{
    label_survival, parse_dataset, split_by_stage, Stage, SurvivalLabel, VitalStatus,
};
use stagewise::learners::{
    logistic::loss_and_gradient, BoostAlgorithm, Learner, ModelConfig, ModelParams, TrainedModel,
    WeightMode,
};
use stagewise::pipeline::{run_pipeline, ExplainerConfig, InputSource, RunConfig};
use stagewise::rng::derive_rng;
use stagewise::selection::{
    grid_search, roc_auc, stratified_kfold, GbdtGrid, HyperGrid, LogisticGrid,
};
use stagewise::synth::{generate_synth, SynthSpec};

fn report(criterion: &str, start: Instant, budget: Duration, outcome: Result<(), String>) {
    let elapsed = start.elapsed();
    match &outcome {
        Ok(()) if elapsed <= budget => {
            println!("acceptance {criterion}: PASS ({elapsed:.2?})");
        }
        Ok(()) => {
            println!(
                "acceptance {criterion}: FAIL (over budget: {elapsed:.2?} > {budget:.2?})"
            );
            panic!("{criterion} exceeded its runtime budget");
        }
        Err(message) => {
            println!("acceptance {criterion}: FAIL ({message})");
            panic!("{criterion}: {message}");
        }
    }
}

// ---------------------------------------------------------------- 1
#[test]
fn criterion_1_labeling_truth_table() {
    let start = Instant::now();
    // table-driven oracle: every combination with its expected label,
    // written out by hand
    use SurvivalLabel::*;
    let table = [
        (0, VitalStatus::Alive, true, NotSurvived),
        (0, VitalStatus::Alive, false, Excluded),
        (0, VitalStatus::Dead, true, NotSurvived),
        (0, VitalStatus::Dead, false, Excluded),
        (59, VitalStatus::Alive, true, NotSurvived),
        (59, VitalStatus::Alive, false, Excluded),
        (59, VitalStatus::Dead, true, NotSurvived),
        (59, VitalStatus::Dead, false, Excluded),
        (60, VitalStatus::Alive, true, Survived),
        (60, VitalStatus::Alive, false, Survived),
        (60, VitalStatus::Dead, true, Excluded),
        (60, VitalStatus::Dead, false, Excluded),
        (61, VitalStatus::Alive, true, Survived),
        (61, VitalStatus::Alive, false, Survived),
        (61, VitalStatus::Dead, true, Excluded),
        (61, VitalStatus::Dead, false, Excluded),
        (120, VitalStatus::Alive, true, Survived),
        (120, VitalStatus::Alive, false, Survived),
        (120, VitalStatus::Dead, true, Excluded),
        (120, VitalStatus::Dead, false, Excluded),
    ];

    let outcome = (|| {
        for (months, vital, cause_matches, expected) in table {
            let record = stagewise::ingest::RawRecord {
                feature_values: vec![],
                vital_status: vital,
                survival_months: months,
                cause_of_death: if cause_matches { "colorectal" } else { "other" }.into(),
                stage_code: "1".into(),
            };
            let got = label_survival(&record, &["colorectal"]).map_err(|e| e.to_string())?;
            if got != expected {
                return Err(format!(
                    "({months}, {vital:?}, match={cause_matches}): got {got:?}, expected {expected:?}"
                ));
            }
        }
        Ok(())
    })();
    report("1 labeling oracle", start, Duration::from_secs(1), outcome);
}

// ---------------------------------------------------------------- 2
#[test]
fn criterion_2_auc_matches_brute_force() {
    let start = Instant::now();
    let outcome = (|| {
        let mut rng = derive_rng(0xACC, &[2]);
        for trial in 0..100u64 {
            let n = rng.gen_range(4..=200);
            // quantized scores force ties
            let levels = rng.gen_range(2..=12);
            let mut scores = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                scores.push(rng.gen_range(0..levels) as f64 / levels as f64);
                labels.push(u8::from(rng.gen_range(0.0..1.0) < 0.5));
            }
            if !labels.contains(&0) || !labels.contains(&1) {
                labels[0] = 0;
                labels[1 % n] = 1;
            }

            let got = roc_auc(&scores, &labels).map_err(|e| e.to_string())?.auc;

            let mut wins = 0u64;
            let mut ties = 0u64;
            let mut pairs = 0u64;
            for i in 0..n {
                if labels[i] != 1 {
                    continue;
                }
                for j in 0..n {
                    if labels[j] != 0 {
                        continue;
                    }
                    pairs += 1;
                    if scores[i] > scores[j] {
                        wins += 1;
                    } else if scores[i] == scores[j] {
                        ties += 1;
                    }
                }
            }
            let oracle = (wins as f64 + 0.5 * ties as f64) / pairs as f64;
            if (got - oracle).abs() > 1e-12 {
                return Err(format!("trial {trial}: {got} vs oracle {oracle}"));
            }
        }
        Ok(())
    })();
    report("2 AUC oracle", start, Duration::from_secs(5), outcome);
}

// ---------------------------------------------------------------- 3
#[test]
fn criterion_3_shapley_axioms() {
    let start = Instant::now();
    let outcome = (|| {
        let mut rng = derive_rng(0xACC, &[3]);
        for trial in 0..20u64 {
            let d = rng.gen_range(3..=10usize);
            let n = 40;
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0f64)).collect())
                .collect();
            let labels: Vec<u8> = rows
                .iter()
                .map(|r| u8::from(r[0] - 0.5 * r[d - 1] + rng.gen_range(-0.5..0.5) > 0.0))
                .collect();

            // alternate between a tree ensemble and a logistic model
            let config = if trial % 2 == 0 {
                ModelConfig {
                    params: ModelParams::RandomForest {
                        n_estimators: 8,
                        max_depth: 3,
                        min_samples_split: 2,
                        min_samples_leaf: 1,
                        class_weight: WeightMode::Uniform,
                    },
                    seed: trial,
                }
            } else {
                ModelConfig {
                    params: ModelParams::Logistic {
                        c: 1.0,
                        class_weight: WeightMode::Uniform,
                    },
                    seed: trial,
                }
            };
            let model = TrainedModel::fit(&config, &rows, &labels).map_err(|e| e.to_string())?;
            let model_fn = |row: &[f64]| model.predict_proba(row).unwrap();

            let background = BackgroundSet::sample(&rows, 8, trial);
            let x = rows[0].clone();

            // efficiency
            let attribution =
                exact_shapley(&model_fn, &x, &background).map_err(|e| e.to_string())?;
            if attribution.efficiency_gap().abs() > 1e-6 {
                return Err(format!(
                    "trial {trial}: efficiency gap {}",
                    attribution.efficiency_gap()
                ));
            }

            // dummy: pin one feature inside the model so it provably never
            // reads the input coordinate
            let pinned = rng.gen_range(0..d);
            let dummy_fn = |row: &[f64]| {
                let mut masked = row.to_vec();
                masked[pinned] = 0.0;
                model_fn(&masked)
            };
            let dummy = exact_shapley(&dummy_fn, &x, &background).map_err(|e| e.to_string())?;
            if dummy.contributions[pinned] != 0.0 {
                return Err(format!(
                    "trial {trial}: dummy feature {pinned} got {}",
                    dummy.contributions[pinned]
                ));
            }

            // symmetry: identical role and identical background marginals
            let (a, b) = (0, 1);
            let symmetric_fn = |row: &[f64]| {
                let mut merged = row.to_vec();
                let shared = row[a] + row[b];
                merged[a] = shared / 2.0;
                merged[b] = shared / 2.0;
                model_fn(&merged)
            };
            let mut symmetric_background = background.clone();
            for bg_row in &mut symmetric_background.rows {
                bg_row[b] = bg_row[a];
            }
            let mut symmetric_x = x.clone();
            symmetric_x[b] = symmetric_x[a];
            let symmetric = exact_shapley(&symmetric_fn, &symmetric_x, &symmetric_background)
                .map_err(|e| e.to_string())?;
            if (symmetric.contributions[a] - symmetric.contributions[b]).abs() > 1e-9 {
                return Err(format!(
                    "trial {trial}: symmetry violated: {} vs {}",
                    symmetric.contributions[a], symmetric.contributions[b]
                ));
            }

            // kernel with full coalition coverage equals exact
            let d_small = d.min(8);
            let x_small = x[..d_small].to_vec();
            let small_rows: Vec<Vec<f64>> =
                background.rows.iter().map(|r| r[..d_small].to_vec()).collect();
            let small_background = BackgroundSet::from_rows(small_rows, trial);
            let small_fn = |row: &[f64]| {
                let mut full = x.clone();
                full[..d_small].copy_from_slice(row);
                model_fn(&full)
            };
            let exact_small = exact_shapley(&small_fn, &x_small, &small_background)
                .map_err(|e| e.to_string())?;
            let budget = (1usize << d_small) + 2;
            let kernel = kernel_shapley(&small_fn, &x_small, &small_background, budget, trial)
                .map_err(|e| e.to_string())?;
            for (i, (e, k)) in exact_small
                .contributions
                .iter()
                .zip(&kernel.contributions)
                .enumerate()
            {
                if (e - k).abs() > 1e-6 {
                    return Err(format!(
                        "trial {trial}: kernel/exact mismatch at {i}: {e} vs {k}"
                    ));
                }
            }
        }
        Ok(())
    })();
    report("3 Shapley axioms", start, Duration::from_secs(60), outcome);
}

// ---------------------------------------------------------------- 4
#[test]
fn criterion_4_gradient_checks() {
    let start = Instant::now();
    let outcome = (|| {
        let mut rng = derive_rng(0xACC, &[4]);

        // logistic objective
        let n = 30;
        let d = 4;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0f64)).collect())
            .collect();
        let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..2.0)).collect();
        let c = 0.8;
        for point in 0..20 {
            let beta: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let intercept = rng.gen_range(-1.0..1.0);
            let (_, grad) =
                loss_and_gradient(&beta, intercept, &rows, &labels, &weights, c);
            let h = 1e-5;
            for k in 0..=d {
                let mut plus = (beta.clone(), intercept);
                let mut minus = (beta.clone(), intercept);
                if k < d {
                    plus.0[k] += h;
                    minus.0[k] -= h;
                } else {
                    plus.1 += h;
                    minus.1 -= h;
                }
                let (lp, _) =
                    loss_and_gradient(&plus.0, plus.1, &rows, &labels, &weights, c);
                let (lm, _) =
                    loss_and_gradient(&minus.0, minus.1, &rows, &labels, &weights, c);
                let numeric = (lp - lm) / (2.0 * h);
                let rel = (grad[k] - numeric).abs() / numeric.abs().max(1e-8);
                if rel > 1e-5 {
                    return Err(format!(
                        "logistic point {point} coord {k}: rel error {rel}"
                    ));
                }
            }
        }

        // boosting logloss
        for point in 0..20 {
            let score = rng.gen_range(-4.0..4.0);
            let label = u8::from(rng.gen_range(0.0..1.0) > 0.4);
            let weight = rng.gen_range(0.2..2.0);
            let (g, _) = stagewise::learners::gbdt::logloss_grad_hess(score, label, weight);
            let h = 1e-5;
            let lp = stagewise::learners::gbdt::weighted_logloss(score + h, label, weight);
            let lm = stagewise::learners::gbdt::weighted_logloss(score - h, label, weight);
            let numeric = (lp - lm) / (2.0 * h);
            let rel = (g - numeric).abs() / numeric.abs().max(1e-8);
            if rel > 1e-5 {
                return Err(format!("gbdt point {point}: rel error {rel}"));
            }
        }
        Ok(())
    })();
    report("4 gradient checks", start, Duration::from_secs(5), outcome);
}

// ---------------------------------------------------------------- 5
#[test]
fn criterion_5_signal_recovery() {
    let start = Instant::now();
    let outcome = (|| {
        let spec = SynthSpec::default_demo(5000, 1234);
        let cohort = generate_synth(&spec).map_err(|e| e.to_string())?;
        let schema = spec.schema();

        // generator-oracle Bayes AUC sits near 0.90 per stage
        for stage in Stage::ALL {
            let idx: Vec<usize> = (0..cohort.stages.len())
                .filter(|&i| cohort.stages[i] == stage)
                .collect();
            let scores: Vec<f64> = idx
                .iter()
                .map(|&i| cohort.true_survival_probability[i])
                .collect();
            let labels: Vec<u8> = idx.iter().map(|&i| u8::from(cohort.survived[i])).collect();
            let bayes = roc_auc(&scores, &labels).map_err(|e| e.to_string())?.auc;
            if !(0.87..=0.93).contains(&bayes) {
                return Err(format!("{stage}: Bayes AUC {bayes} is off target"));
            }
        }

        let (records, _) = parse_dataset(cohort.csv.as_bytes(), &schema)
            .map_err(|e| e.to_string())?;
        let (labeled, _) =
            stagewise::ingest::label_cohort(records, &schema).map_err(|e| e.to_string())?;
        let split = split_by_stage(labeled, &schema).map_err(|e| e.to_string())?;

        // small but real grids keep the budget honest
        let grid = HyperGrid {
            logistic: LogisticGrid::default(),
            sym_gbdt: GbdtGrid {
                iterations: vec![50],
                depth: vec![3, 5],
                learning_rate: vec![0.1],
                l2_leaf_reg: vec![3.0],
                class_weights: vec![WeightMode::Manual(1.0, 1.0), WeightMode::Manual(1.0, 3.0)],
            },
            ..HyperGrid::default()
        };
        let planted = ["Age", "Tumor Size", "Extension"];

        for stage in Stage::ALL {
            let table = encode(&split.by_stage[&stage], &schema, None)
                .map_err(|e| e.to_string())?;
            let plan = stratified_kfold(&table.labels, 5, 99).map_err(|e| e.to_string())?;

            for learner in [Learner::Logistic, Learner::SymGbdt] {
                let result = grid_search(&table, learner, &grid, &plan)
                    .map_err(|e| e.to_string())?;
                let mean_auc = result.best().mean_auc;
                if mean_auc < 0.85 {
                    return Err(format!(
                        "{stage}: best {} mean CV AUC {mean_auc:.4} < 0.85",
                        learner.display_name()
                    ));
                }

                if learner == Learner::SymGbdt {
                    // explain the refit best model and check the planted
                    // features land in the top five
                    let model = TrainedModel::fit(&result.best().config, &table.rows, &table.labels)
                        .map_err(|e| e.to_string())?;
                    let model_fn = |row: &[f64]| model.predict_proba(row).unwrap();
                    let background = BackgroundSet::sample(&table.rows, 30, 7);
                    let rows: Vec<usize> = (0..table.n_rows()).step_by(60).collect();
                    let summary =
                        shap_summary(&model_fn, &table, &rows, &background, 300, 11)
                            .map_err(|e| e.to_string())?;
                    let top5 = summary.top_features(5);
                    for feature in planted {
                        if !top5.iter().any(|f| f == feature) {
                            return Err(format!(
                                "{stage}: planted '{feature}' missing from top five {top5:?}"
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    })();
    report("5 signal recovery", start, Duration::from_secs(300), outcome);
}

// ---------------------------------------------------------------- 6
#[test]
fn criterion_6_null_calibration() {
    let start = Instant::now();
    let outcome = (|| {
        let spec = SynthSpec::default_demo(2000, 555);
        let cohort = generate_synth(&spec).map_err(|e| e.to_string())?;
        let schema = spec.schema();
        let (records, _) =
            parse_dataset(cohort.csv.as_bytes(), &schema).map_err(|e| e.to_string())?;
        let (labeled, _) =
            stagewise::ingest::label_cohort(records, &schema).map_err(|e| e.to_string())?;
        let split = split_by_stage(labeled, &schema).map_err(|e| e.to_string())?;
        let mut table = encode(&split.by_stage[&Stage::Localized], &schema, None)
            .map_err(|e| e.to_string())?;

        // destroy the signal
        use rand::seq::SliceRandom;
        let mut rng = derive_rng(0xACC, &[6]);
        table.labels.shuffle(&mut rng);

        let plan = stratified_kfold(&table.labels, 5, 3).map_err(|e| e.to_string())?;
        let configs = [
            ModelParams::Logistic {
                c: 1.0,
                class_weight: WeightMode::Balanced,
            },
            ModelParams::RandomForest {
                n_estimators: 50,
                max_depth: 5,
                min_samples_split: 2,
                min_samples_leaf: 2,
                class_weight: WeightMode::Balanced,
            },
            ModelParams::AdaBoost {
                n_estimators: 50,
                learning_rate: 1.0,
                algorithm: BoostAlgorithm::Samme,
            },
            ModelParams::SymGbdt {
                iterations: 50,
                depth: 3,
                learning_rate: 0.1,
                l2_leaf_reg: 3.0,
                class_weights: WeightMode::Manual(1.0, 1.0),
            },
        ];
        for params in configs {
            let learner = params.learner();
            let grid_of_one = grid_for_single(params);
            let result = grid_search(&table, learner, &grid_of_one, &plan)
                .map_err(|e| e.to_string())?;
            let auc = result.best().mean_auc;
            if (auc - 0.5).abs() > 0.06 {
                return Err(format!(
                    "{} null AUC {auc:.4} outside 0.5 +/- 0.06",
                    learner.display_name()
                ));
            }
        }
        Ok(())
    })();
    report("6 null calibration", start, Duration::from_secs(300), outcome);
}

fn grid_for_single(params: ModelParams) -> HyperGrid {
    let mut grid = HyperGrid::default();
    match params {
        ModelParams::Logistic { c, class_weight } => {
            grid.logistic = LogisticGrid {
                c: vec![c],
                class_weight: vec![class_weight],
            };
        }
        ModelParams::RandomForest {
            n_estimators,
            max_depth,
            min_samples_split,
            min_samples_leaf,
            class_weight,
        } => {
            grid.random_forest = stagewise::selection::ForestGrid {
                n_estimators: vec![n_estimators],
                max_depth: vec![max_depth],
                min_samples_split: vec![min_samples_split],
                min_samples_leaf: vec![min_samples_leaf],
                class_weight: vec![class_weight],
            };
        }
        ModelParams::AdaBoost {
            n_estimators,
            learning_rate,
            algorithm,
        } => {
            grid.adaboost = stagewise::selection::AdaBoostGrid {
                n_estimators: vec![n_estimators],
                learning_rate: vec![learning_rate],
                algorithm: vec![algorithm],
            };
        }
        ModelParams::SymGbdt {
            iterations,
            depth,
            learning_rate,
            l2_leaf_reg,
            class_weights,
        } => {
            grid.sym_gbdt = GbdtGrid {
                iterations: vec![iterations],
                depth: vec![depth],
                learning_rate: vec![learning_rate],
                l2_leaf_reg: vec![l2_leaf_reg],
                class_weights: vec![class_weights],
            };
        }
    }
    grid
}

// ---------------------------------------------------------------- 7
#[test]
fn criterion_7_lime_fidelity() {
    let start = Instant::now();
    let outcome = (|| {
        let spec = SynthSpec::default_demo(400, 77);
        let cohort = generate_synth(&spec).map_err(|e| e.to_string())?;
        let schema = spec.schema();
        let (records, _) =
            parse_dataset(cohort.csv.as_bytes(), &schema).map_err(|e| e.to_string())?;
        let (labeled, _) =
            stagewise::ingest::label_cohort(records, &schema).map_err(|e| e.to_string())?;
        let split = split_by_stage(labeled, &schema).map_err(|e| e.to_string())?;
        let table = encode(&split.by_stage[&Stage::Localized], &schema, None)
            .map_err(|e| e.to_string())?;
        let stats = PerturbationStats::from_table(&table);

        // globally linear model over the encoded space; the last two source
        // features (Sex, Race) are ignored entirely
        let age = table.column_index("Age").unwrap();
        let size = table.column_index("Tumor Size").unwrap();
        let grade = table.column_index("Grade").unwrap();
        let model_fn =
            move |row: &[f64]| 2.0 * row[age] - 1.5 * row[size] + 0.8 * row[grade] + 0.1;

        let config = LimeConfig {
            n_samples: 5000,
            top_k: 5,
            kernel_width_factor: 0.75,
            ridge_penalty: 1.0,
            seed: 17,
        };
        let explanation = lime_explain(&model_fn, &table.rows[0], &stats, &config, 0)
            .map_err(|e| e.to_string())?;

        if explanation.fidelity < 0.99 {
            return Err(format!("fidelity {} < 0.99", explanation.fidelity));
        }
        let weight_of = |name: &str| {
            explanation
                .top_features
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, w)| *w)
        };
        for (feature, expected_sign) in
            [("Age", 1.0f64), ("Tumor Size", -1.0), ("Grade", 1.0)]
        {
            let weight = weight_of(feature)
                .ok_or_else(|| format!("'{feature}' missing from top-K"))?;
            if weight.signum() != expected_sign {
                return Err(format!("'{feature}' sign {} wrong", weight.signum()));
            }
        }
        let max_abs = explanation
            .top_features
            .iter()
            .map(|(_, w)| w.abs())
            .fold(0.0f64, f64::max);
        for (name, weight) in &explanation.top_features {
            if (name == "Sex" || name == "Race") && weight.abs() >= 0.05 * max_abs {
                return Err(format!(
                    "ignored '{name}' weight {} >= 5% of max {max_abs}",
                    weight.abs()
                ));
            }
        }
        Ok(())
    })();
    report("7 LIME fidelity", start, Duration::from_secs(120), outcome);
}

// ---------------------------------------------------------------- 8
#[test]
fn criterion_8_welch_oracle() {
    let start = Instant::now();
    let outcome = (|| {
        // exact half-integer ln Gamma by recursion, independent of the
        // Lanczos path inside the crate
        fn ln_gamma_half(two_x: u64) -> f64 {
            let mut value = if two_x % 2 == 0 {
                0.0
            } else {
                0.5 * std::f64::consts::PI.ln()
            };
            let mut k = if two_x % 2 == 0 { 2 } else { 1 };
            while k < two_x {
                value += (k as f64 / 2.0).ln();
                k += 2;
            }
            value
        }
        fn t_pdf(x: f64, df: f64) -> f64 {
            let ln_c = ln_gamma_half(df as u64 + 1)
                - ln_gamma_half(df as u64)
                - 0.5 * (df * std::f64::consts::PI).ln();
            (ln_c - 0.5 * (df + 1.0) * (1.0 + x * x / df).ln()).exp()
        }
        fn two_sided_by_integration(t: f64, df: f64) -> f64 {
            let n = 8192;
            let h = t.abs() / n as f64;
            let mut acc = t_pdf(0.0, df) + t_pdf(t.abs(), df);
            for i in 1..n {
                acc += t_pdf(i as f64 * h, df) * if i % 2 == 0 { 2.0 } else { 4.0 };
            }
            1.0 - 2.0 * (acc * h / 3.0)
        }

        let p = stagewise::stats::student_t_two_sided_p(1.0, 10.0);
        let oracle = two_sided_by_integration(1.0, 10.0);
        if (p - 0.3409).abs() > 1e-3 {
            return Err(format!("p(1, 10) = {p}, expected 0.3409 +/- 1e-3"));
        }
        if (p - oracle).abs() > 1e-6 {
            return Err(format!("p(1, 10) = {p} vs integration oracle {oracle}"));
        }

        for df in [1.0, 5.0, 10.0, 100.0] {
            let mut last = f64::INFINITY;
            for i in 0..=24 {
                let t = i as f64 * 0.25;
                let p_pos = stagewise::stats::student_t_two_sided_p(t, df);
                let p_neg = stagewise::stats::student_t_two_sided_p(-t, df);
                if (p_pos - p_neg).abs() > 1e-12 {
                    return Err(format!("asymmetry at t={t}, df={df}"));
                }
                if p_pos > last + 1e-12 {
                    return Err(format!("p not monotone at t={t}, df={df}"));
                }
                let oracle = two_sided_by_integration(t, df);
                if (p_pos - oracle).abs() > 1e-6 {
                    return Err(format!(
                        "p({t}, {df}) = {p_pos} vs integration {oracle}"
                    ));
                }
                last = p_pos;
            }
        }
        Ok(())
    })();
    report("8 Welch test oracle", start, Duration::from_secs(30), outcome);
}

// ---------------------------------------------------------------- 9
#[test]
fn criterion_9_run_determinism() {
    let start = Instant::now();
    let outcome = (|| {
        let base = tempfile::tempdir().map_err(|e| e.to_string())?;
        let make_config = |out: std::path::PathBuf| RunConfig {
            input: InputSource::Synth {
                spec: SynthSpec::default_demo(150, 31),
            },
            schema: None,
            k_folds: 3,
            grids: small_grid(),
            explainer: ExplainerConfig {
                background_size: 20,
                shap_samples: 128,
                shap_rows: 25,
                lime_samples: 400,
                top_k: 5,
                kernel_width_factor: 0.75,
                lime_ridge_penalty: 1.0,
                lime_aggregate_cases: 1,
            },
            out_dir: out,
            seed: 2024,
            stage_filter: None,
            learner_filter: None,
        };

        // two runs; rayon keeps grid points and forest trees concurrent
        let first = run_pipeline(&make_config(base.path().join("a")))
            .map_err(|e| e.to_string())?;
        let second = run_pipeline(&make_config(base.path().join("b")))
            .map_err(|e| e.to_string())?;

        if first.manifest.files.is_empty() {
            return Err("first run produced no artifacts".into());
        }
        if first.manifest.files != second.manifest.files {
            let diff: Vec<&String> = first
                .manifest
                .files
                .iter()
                .filter(|(k, v)| second.manifest.files.get(*k) != Some(v))
                .map(|(k, _)| k)
                .collect();
            return Err(format!("artifact hashes differ: {diff:?}"));
        }
        if first.partial || second.partial {
            return Err("runs reported partial completion".into());
        }
        Ok(())
    })();
    report("9 determinism", start, Duration::from_secs(300), outcome);
}

fn small_grid() -> HyperGrid {
    HyperGrid {
        logistic: LogisticGrid {
            c: vec![1.0],
            class_weight: vec![WeightMode::Balanced],
        },
        random_forest: stagewise::selection::ForestGrid {
            n_estimators: vec![15],
            max_depth: vec![3],
            min_samples_split: vec![2],
            min_samples_leaf: vec![1],
            class_weight: vec![WeightMode::Balanced],
        },
        adaboost: stagewise::selection::AdaBoostGrid {
            n_estimators: vec![20],
            learning_rate: vec![1.0],
            algorithm: vec![BoostAlgorithm::Samme],
        },
        sym_gbdt: GbdtGrid {
            iterations: vec![25],
            depth: vec![3],
            learning_rate: vec![0.1],
            l2_leaf_reg: vec![3.0],
            class_weights: vec![WeightMode::Manual(1.0, 1.0)],
        },
    }
}

// ---------------------------------------------------------------- 10
#[test]
fn criterion_10_report_shapes() {
    let start = Instant::now();
    let outcome = (|| {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let config = RunConfig {
            input: InputSource::Synth {
                spec: SynthSpec::default_demo(240, 67),
            },
            schema: None,
            k_folds: 3,
            grids: small_grid(),
            explainer: ExplainerConfig {
                background_size: 20,
                shap_samples: 128,
                shap_rows: 30,
                lime_samples: 500,
                top_k: 5,
                kernel_width_factor: 0.75,
                lime_ridge_penalty: 1.0,
                lime_aggregate_cases: 1,
            },
            out_dir: dir.path().to_path_buf(),
            seed: 4242,
            stage_filter: None,
            learner_filter: None,
        };
        let summary = run_pipeline(&config).map_err(|e| e.to_string())?;
        if summary.partial {
            return Err(format!("partial run: {:?}", summary.manifest.errors));
        }

        let read = |rel: &str| -> Result<String, String> {
            std::fs::read_to_string(dir.path().join(rel))
                .map_err(|e| format!("missing {rel}: {e}"))
        };

        // metrics table: 3 stages x 4 learners x 5 metrics
        let metrics = read("metrics.csv")?;
        let lines: Vec<&str> = metrics.trim().lines().collect();
        if lines[0] != "cancer,stage,learner,acc,prec,rec,f1,auc" {
            return Err(format!("metrics header: {}", lines[0]));
        }
        if lines.len() != 1 + 12 {
            return Err(format!("metrics rows: {} (want 12)", lines.len() - 1));
        }
        for stage in Stage::ALL {
            for learner in Learner::ALL {
                let prefix = format!("colorectal,{},{}", stage.slug(), learner.slug());
                if !lines.iter().any(|l| l.starts_with(&prefix)) {
                    return Err(format!("metrics missing row {prefix}"));
                }
            }
        }
        let pretty = read("metrics.txt")?;
        for learner in Learner::ALL {
            if !pretty.contains(learner.display_name()) {
                return Err(format!("metrics.txt missing {}", learner.display_name()));
            }
        }
        if pretty.matches("Prec").count() != 4 || pretty.matches("AUC").count() != 4 {
            return Err("metrics.txt metric header not repeated per learner".into());
        }

        // statistics report shape per stage
        for stage in Stage::ALL {
            let stats = read(&format!("{}/stats.txt", stage.slug()))?;
            for section in ["Survivors", "Non-survivors"] {
                if !stats.contains(section) {
                    return Err(format!("{}: stats.txt missing {section}", stage.slug()));
                }
            }
            for column in ["Age", "Nodes Exam.", "Nodes Pos.", "Tumor Size", "p-Value"] {
                if !stats.contains(column) {
                    return Err(format!("{}: stats.txt missing {column}", stage.slug()));
                }
            }
        }

        // presence matrices: exactly five ones per column
        for name in ["presence_shap.tsv", "presence_lime.tsv"] {
            let text = read(name)?;
            let mut lines = text.trim().lines();
            let header = lines.next().ok_or_else(|| format!("{name} empty"))?;
            let n_cols = header.split('\t').count() - 1;
            if n_cols != 3 {
                return Err(format!("{name}: {n_cols} columns (want 3 stages)"));
            }
            let mut sums = vec![0usize; n_cols];
            for line in lines {
                for (i, cell) in line.split('\t').skip(1).enumerate() {
                    sums[i] += cell.parse::<usize>().map_err(|e| e.to_string())?;
                }
            }
            if sums.iter().any(|&s| s != 5) {
                return Err(format!("{name}: column sums {sums:?} (want all 5)"));
            }
        }
        Ok(())
    })();
    report("10 report shapes", start, Duration::from_secs(300), outcome);
}

// Presence-matrix assembly from the top-five lists (the shape behind the
// published heatmaps) is exercised against hand data too.
#[test]
fn presence_matrix_shape_from_lists() {
    let columns: Vec<(String, Vec<String>)> = Stage::ALL
        .iter()
        .map(|stage| {
            (
                format!("colorectal/{}", stage.slug()),
                vec![
                    "Age".to_string(),
                    "Extension".to_string(),
                    "Tumor Size".to_string(),
                    "Surgery Code".to_string(),
                    format!("Grade {stage}"),
                ],
            )
        })
        .collect();
    let matrix = presence_heatmap(&columns).unwrap();
    for col in 0..3 {
        assert_eq!(matrix.column_sum(col), 5);
    }
    assert_eq!(matrix.feature_rows[0], "Age");
}

// Shared fold seeds reused across the suite must stay deterministic.
#[test]
fn fold_plans_are_reproducible_across_processes() {
    let labels: Vec<u8> = (0..64).map(|i| (i % 3 == 0) as u8).collect();
    let a = stratified_kfold(&labels, 4, 7).unwrap();
    let b = stratified_kfold(&labels, 4, 7).unwrap();
    assert_eq!(a.assignments, b.assignments);
}
