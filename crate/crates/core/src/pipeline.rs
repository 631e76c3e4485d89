//! End-to-end orchestration: ingest, label, stage split, grid-searched
//! training, evaluation, explanation, and report assembly into a run
//! directory with a content-hash manifest. Everything downstream of the
//! config and seed is reproducible byte for byte; the only timestamp lives
//! in the manifest's excluded field.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attribution::{
    lime_explain, presence_heatmap, select_lime_case, shap_summary, BackgroundSet, LimeConfig,
    PerturbationStats,
};
use crate::encode::{correlation_matrix, encode, CohortTable};
use crate::ingest::{label_cohort, parse_dataset, split_by_stage, Stage};
use crate::learners::{Learner, ModelConfig, TrainedModel};
use crate::report::{self, MetricsLine};
use crate::rng::{derive_rng, derive_seed};
use crate::schema::FeatureSchema;
use crate::selection::{evaluate_stagewise, roc_auc, FoldPlan, StageStatus};
use crate::stats::compare_groups;
use crate::synth::{generate_synth, SynthSpec};
use crate::{Error, Result};

const PIPE_STREAM: u64 = 0x50;

/// Where the cohort comes from: a CSV on disk or the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSource {
    Csv { path: PathBuf },
    Synth { spec: SynthSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainerConfig {
    /// Background reference rows for the Shapley value function.
    pub background_size: usize,
    /// Kernel SHAP coalition budget per instance.
    pub shap_samples: usize,
    /// How many cohort rows the summary explains (seeded subsample).
    pub shap_rows: usize,
    pub lime_samples: usize,
    pub top_k: usize,
    pub kernel_width_factor: f64,
    pub lime_ridge_penalty: f64,
    /// 1 explains the single lowest-survival case; larger values switch the
    /// presence list to aggregate frequency over that many lowest cases.
    pub lime_aggregate_cases: usize,
}

impl Default for ExplainerConfig {
    fn default() -> Self {
        ExplainerConfig {
            background_size: 100,
            shap_samples: 2048,
            shap_rows: 200,
            lime_samples: 5000,
            top_k: 5,
            kernel_width_factor: 0.75,
            lime_ridge_penalty: 1.0,
            lime_aggregate_cases: 1,
        }
    }
}

fn default_k_folds() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: InputSource,
    /// Path to the schema JSON; required for CSV input, derived for synth.
    #[serde(default)]
    pub schema: Option<PathBuf>,
    #[serde(default = "default_k_folds")]
    pub k_folds: usize,
    #[serde(default)]
    pub grids: crate::selection::HyperGrid,
    #[serde(default)]
    pub explainer: ExplainerConfig,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Optional stage / learner restrictions (CLI flags land here).
    #[serde(default)]
    pub stage_filter: Option<Stage>,
    #[serde(default)]
    pub learner_filter: Option<Learner>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<RunConfig> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn stages(&self) -> Vec<Stage> {
        match self.stage_filter {
            Some(stage) => vec![stage],
            None => Stage::ALL.to_vec(),
        }
    }

    pub fn learners(&self) -> Vec<Learner> {
        match self.learner_filter {
            Some(learner) => vec![learner],
            None => Learner::ALL.to_vec(),
        }
    }
}

/// Which pipeline slices run (each CLI subcommand toggles a subset).
#[derive(Debug, Clone, Copy)]
pub struct PipelineOptions {
    pub ingest_reports: bool,
    pub train: bool,
    pub evaluate: bool,
    pub explain: bool,
    pub stats: bool,
}

impl PipelineOptions {
    pub fn all() -> Self {
        PipelineOptions {
            ingest_reports: true,
            train: true,
            evaluate: true,
            explain: true,
            stats: true,
        }
    }

    fn needs_models(&self) -> bool {
        self.train || self.evaluate || self.explain
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config: serde_json::Value,
    pub seed: u64,
    pub stages: BTreeMap<String, String>,
    pub errors: Vec<String>,
    /// Relative path -> SHA-256 of every emitted file.
    pub files: BTreeMap<String, String>,
    /// Wall-clock stamp, deliberately excluded from reproducibility checks.
    pub generated_at_epoch_seconds: u64,
}

#[derive(Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    pub partial: bool,
}

struct ArtifactWriter {
    root: PathBuf,
    files: BTreeMap<String, String>,
}

impl ArtifactWriter {
    fn new(root: &Path) -> Result<ArtifactWriter> {
        std::fs::create_dir_all(root)?;
        Ok(ArtifactWriter {
            root: root.to_path_buf(),
            files: BTreeMap::new(),
        })
    }

    fn write(&mut self, relative: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(relative);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes)?;
        let digest = Sha256::digest(bytes);
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.files.insert(relative.to_string(), hex);
        Ok(())
    }
}

/// Run the full workflow.
pub fn run_pipeline(config: &RunConfig) -> Result<RunSummary> {
    run_with_options(config, PipelineOptions::all())
}

/// Run selected slices of the workflow. Per-stage failures are recorded in
/// the manifest and the remaining stages still run; only input/config
/// problems abort.
pub fn run_with_options(config: &RunConfig, options: PipelineOptions) -> Result<RunSummary> {
    let mut writer = ArtifactWriter::new(&config.out_dir)?;
    let mut errors: Vec<String> = Vec::new();
    let mut stage_status: BTreeMap<String, String> = BTreeMap::new();

    // resolve input and schema
    let (csv_text, schema) = match &config.input {
        InputSource::Csv { path } => {
            let schema_path = config.schema.as_ref().ok_or_else(|| {
                Error::InvalidConfig("CSV input needs a schema path".into())
            })?;
            // schema problems are configuration problems
            let schema = FeatureSchema::from_path(schema_path).map_err(|e| match e {
                Error::InvalidSchema(_) => e,
                other => Error::InvalidSchema(other.to_string()),
            })?;
            (std::fs::read_to_string(path)?, schema)
        }
        InputSource::Synth { spec } => {
            let cohort = generate_synth(spec)?;
            let schema = spec.schema();
            writer.write("cohort.csv", cohort.csv.as_bytes())?;
            writer.write(
                "schema.json",
                serde_json::to_string_pretty(&schema)?.as_bytes(),
            )?;
            (cohort.csv, schema)
        }
    };

    let cancer = schema.cancer_type.clone();
    let (records, cleaning) = parse_dataset(csv_text.as_bytes(), &schema)?;
    let (labeled, label_summary) = label_cohort(records, &schema)?;
    let mut cleaning_text = cleaning.render();
    cleaning_text.push_str(&format!(
        "labeled: {} survived, {} not survived, {} excluded\n",
        label_summary.survived, label_summary.not_survived, label_summary.excluded
    ));
    if options.ingest_reports {
        writer.write("cleaning.txt", cleaning_text.as_bytes())?;
    }

    let split = split_by_stage(labeled, &schema)?;
    if options.ingest_reports {
        writer.write("stage_split.txt", split.render().as_bytes())?;
    }

    let stages = config.stages();
    let learners = config.learners();

    // encode each requested stage (only when something downstream needs it)
    let mut tables: Vec<(Stage, CohortTable)> = Vec::new();
    if options.stats || options.needs_models() {
        for &stage in &stages {
            let records = &split.by_stage[&stage];
            match encode(records, &schema, None) {
                Ok(table) => tables.push((stage, table)),
                Err(err) => {
                    stage_status.insert(stage.slug().into(), format!("failed: {err}"));
                    errors.push(format!("{stage}: encode failed: {err}"));
                }
            }
        }
    }

    // descriptive statistics run independently of modeling
    if options.stats {
        for (stage, table) in &tables {
            let dir = stage.slug();
            match correlation_matrix(table) {
                Ok(matrix) => {
                    writer.write(
                        &format!("{dir}/correlation.tsv"),
                        report::correlation_tsv(&matrix).as_bytes(),
                    )?;
                }
                Err(err) => errors.push(format!("{stage}: correlation skipped: {err}")),
            }
            match compare_groups(table) {
                Ok(comparisons) => {
                    writer.write(
                        &format!("{dir}/stats.csv"),
                        report::stats_csv(&cancer, &comparisons).as_bytes(),
                    )?;
                    writer.write(
                        &format!("{dir}/stats.txt"),
                        report::stats_text(&cancer, &comparisons).as_bytes(),
                    )?;
                }
                Err(err) => errors.push(format!("{stage}: statistics skipped: {err}")),
            }
        }
    }

    let mut all_metric_lines: Vec<MetricsLine> = Vec::new();
    let mut shap_presence: Vec<(String, Vec<String>)> = Vec::new();
    let mut lime_presence: Vec<(String, Vec<String>)> = Vec::new();

    if options.needs_models() {
        let borrowed: Vec<(Stage, &CohortTable)> =
            tables.iter().map(|(s, t)| (*s, t)).collect();
        let outcomes = evaluate_stagewise(&borrowed, &config.grids, config.k_folds, config.seed, &learners);

        for outcome in &outcomes {
            let stage = outcome.stage;
            let dir = stage.slug().to_string();
            match &outcome.status {
                StageStatus::Skipped(reason) => {
                    stage_status.insert(dir.clone(), format!("skipped: {reason}"));
                    errors.push(format!("{stage}: skipped: {reason}"));
                    continue;
                }
                StageStatus::Completed => {
                    stage_status.entry(dir.clone()).or_insert_with(|| "completed".into());
                }
            }
            let table = &tables.iter().find(|(s, _)| *s == stage).unwrap().1;
            let plan = outcome.plan.as_ref().unwrap();

            // grid results
            if options.train {
                let grids: Vec<(Learner, &crate::selection::GridResult)> = outcome
                    .learners
                    .iter()
                    .filter_map(|l| l.grid.as_ref().map(|g| (l.learner, g)))
                    .collect();
                writer.write(
                    &format!("{dir}/grid_results.csv"),
                    report::grid_results_csv(&cancer, stage, &grids).as_bytes(),
                )?;
            }

            // refit best configs on the whole stage cohort
            let mut best_models: BTreeMap<String, TrainedModel> = BTreeMap::new();
            for learner_outcome in &outcome.learners {
                let Some(grid) = &learner_outcome.grid else {
                    errors.push(format!(
                        "{stage}: {} failed: {}",
                        learner_outcome.learner.display_name(),
                        learner_outcome.error.as_deref().unwrap_or("unknown")
                    ));
                    continue;
                };
                let best_config = grid.best().config.clone();
                match TrainedModel::fit(&best_config, &table.rows, &table.labels) {
                    Ok(model) => {
                        best_models.insert(learner_outcome.learner.slug().into(), model);
                    }
                    Err(err) => errors.push(format!(
                        "{stage}: refit of best {} failed: {err}",
                        learner_outcome.learner.display_name()
                    )),
                }

                if let Some(mean) = &learner_outcome.mean {
                    all_metric_lines.push(MetricsLine {
                        cancer: cancer.clone(),
                        stage,
                        learner: learner_outcome.learner,
                        metrics: *mean,
                    });
                }
            }

            if options.train {
                let models_doc = serde_json::json!({
                    "format_version": crate::learners::MODEL_FORMAT_VERSION,
                    "models": serde_json::to_value(&best_models)?,
                });
                writer.write(
                    &format!("{dir}/models.json"),
                    serde_json::to_string_pretty(&models_doc)?.as_bytes(),
                )?;
            }

            if options.evaluate {
                let stage_lines: Vec<MetricsLine> = all_metric_lines
                    .iter()
                    .filter(|l| l.stage == stage)
                    .cloned()
                    .collect();
                writer.write(
                    &format!("{dir}/metrics.csv"),
                    report::metrics_csv(&stage_lines).as_bytes(),
                )?;
                writer.write(
                    &format!("{dir}/metrics.txt"),
                    report::metrics_text(&cancer, &stage_lines).as_bytes(),
                )?;

                // pooled out-of-fold ROC curve per learner
                for learner_outcome in &outcome.learners {
                    let Some(grid) = &learner_outcome.grid else {
                        continue;
                    };
                    match pooled_cv_scores(table, &grid.best().config, plan) {
                        Ok((scores, labels)) => match roc_auc(&scores, &labels) {
                            Ok(curve) => writer.write(
                                &format!("{dir}/roc_{}.tsv", learner_outcome.learner.slug()),
                                report::roc_tsv(&curve).as_bytes(),
                            )?,
                            Err(err) => errors.push(format!(
                                "{stage}: ROC for {} skipped: {err}",
                                learner_outcome.learner.display_name()
                            )),
                        },
                        Err(err) => errors.push(format!(
                            "{stage}: CV scores for {} failed: {err}",
                            learner_outcome.learner.display_name()
                        )),
                    }
                }
            }

            if options.explain {
                match explain_stage(config, stage, table, &best_models, &mut writer) {
                    Ok((shap_top, lime_top)) => {
                        let label = format!("{cancer}/{}", stage.slug());
                        shap_presence.push((label.clone(), shap_top));
                        lime_presence.push((label, lime_top));
                    }
                    Err(err) => errors.push(format!("{stage}: explanation failed: {err}")),
                }
            }
        }

        for &stage in &stages {
            stage_status
                .entry(stage.slug().into())
                .or_insert_with(|| "completed".into());
        }

        if options.evaluate && !all_metric_lines.is_empty() {
            writer.write(
                "metrics.csv",
                report::metrics_csv(&all_metric_lines).as_bytes(),
            )?;
            writer.write(
                "metrics.txt",
                report::metrics_text(&cancer, &all_metric_lines).as_bytes(),
            )?;
        }

        if options.explain && !shap_presence.is_empty() {
            match presence_heatmap(&shap_presence) {
                Ok(matrix) => writer.write(
                    "presence_shap.tsv",
                    report::presence_tsv(&matrix).as_bytes(),
                )?,
                Err(err) => errors.push(format!("presence (shap) failed: {err}")),
            }
            match presence_heatmap(&lime_presence) {
                Ok(matrix) => writer.write(
                    "presence_lime.tsv",
                    report::presence_tsv(&matrix).as_bytes(),
                )?,
                Err(err) => errors.push(format!("presence (lime) failed: {err}")),
            }
        }
    } else {
        for &stage in &stages {
            stage_status
                .entry(stage.slug().into())
                .or_insert_with(|| "completed".into());
        }
    }

    // manifest last: it hashes everything else
    let partial = !errors.is_empty()
        || stage_status.values().any(|s| s != "completed");
    let manifest = Manifest {
        config: serde_json::to_value(config)?,
        seed: config.seed,
        stages: stage_status,
        errors,
        files: writer.files.clone(),
        generated_at_epoch_seconds: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let manifest_path = config.out_dir.join("manifest.json");
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;

    Ok(RunSummary {
        out_dir: config.out_dir.clone(),
        manifest,
        partial,
    })
}

/// Out-of-fold scores pooled over all folds (plot data for the ROC files).
fn pooled_cv_scores(
    table: &CohortTable,
    config: &ModelConfig,
    plan: &FoldPlan,
) -> Result<(Vec<f64>, Vec<u8>)> {
    let mut scores = Vec::with_capacity(table.n_rows());
    let mut labels = Vec::with_capacity(table.n_rows());
    for fold in 0..plan.k {
        let (train, test) = plan.train_test(fold);
        let train_rows: Vec<Vec<f64>> = train.iter().map(|&i| table.rows[i].clone()).collect();
        let train_labels: Vec<u8> = train.iter().map(|&i| table.labels[i]).collect();
        let model = TrainedModel::fit(config, &train_rows, &train_labels)?;
        for &i in &test {
            scores.push(model.predict_proba(&table.rows[i])?);
            labels.push(table.labels[i]);
        }
    }
    Ok((scores, labels))
}

/// Pick the model the explainers target: the gradient-boosting model when
/// available (the strongest performer), otherwise the best mean-AUC learner.
fn explanation_model<'a>(
    best_models: &'a BTreeMap<String, TrainedModel>,
) -> Option<&'a TrainedModel> {
    best_models
        .get(Learner::SymGbdt.slug())
        .or_else(|| best_models.values().next())
}

fn explain_stage(
    config: &RunConfig,
    stage: Stage,
    table: &CohortTable,
    best_models: &BTreeMap<String, TrainedModel>,
    writer: &mut ArtifactWriter,
) -> Result<(Vec<String>, Vec<String>)> {
    let model = explanation_model(best_models)
        .ok_or_else(|| Error::Internal("no fitted model to explain".into()))?;
    let model_fn = |row: &[f64]| model.predict_proba(row).expect("row width matches table");
    let dir = stage.slug();
    let explainer = &config.explainer;
    let stage_tag = stage as u64;

    // SHAP summary over a seeded row subsample
    let background = BackgroundSet::sample(
        &table.rows,
        explainer.background_size,
        derive_seed(config.seed, &[PIPE_STREAM, 1, stage_tag]),
    );
    let mut row_indices: Vec<usize> = (0..table.n_rows()).collect();
    if row_indices.len() > explainer.shap_rows {
        let mut rng = derive_rng(config.seed, &[PIPE_STREAM, 2, stage_tag]);
        row_indices.shuffle(&mut rng);
        row_indices.truncate(explainer.shap_rows);
        row_indices.sort_unstable();
    }
    let summary = shap_summary(
        &model_fn,
        table,
        &row_indices,
        &background,
        explainer.shap_samples,
        derive_seed(config.seed, &[PIPE_STREAM, 3, stage_tag]),
    )?;
    writer.write(
        &format!("{dir}/shap_ranking.tsv"),
        report::shap_ranking_tsv(&summary.ranking).as_bytes(),
    )?;
    writer.write(
        &format!("{dir}/beeswarm.tsv"),
        report::beeswarm_tsv(&summary.beeswarm).as_bytes(),
    )?;
    let shap_top = summary.top_features(explainer.top_k);

    // LIME on the lowest-survival case (or aggregate over the lowest M)
    let stats = PerturbationStats::from_table(table);
    let lime_config = LimeConfig {
        n_samples: explainer.lime_samples,
        top_k: explainer.top_k,
        kernel_width_factor: explainer.kernel_width_factor,
        ridge_penalty: explainer.lime_ridge_penalty,
        seed: derive_seed(config.seed, &[PIPE_STREAM, 4, stage_tag]),
    };
    let case = select_lime_case(&model_fn, &table.rows)?;
    let explanation = lime_explain(&model_fn, &table.rows[case], &stats, &lime_config, case)?;
    writer.write(
        &format!("{dir}/lime_case.json"),
        report::lime_case_json(&explanation)?.as_bytes(),
    )?;

    let lime_top = if explainer.lime_aggregate_cases > 1 {
        lime_aggregate_top(
            &model_fn,
            table,
            &stats,
            &lime_config,
            explainer.lime_aggregate_cases,
            explainer.top_k,
        )?
    } else {
        explanation
            .top_features
            .iter()
            .map(|(name, _)| name.clone())
            .collect()
    };

    Ok((shap_top, lime_top))
}

/// Aggregate-frequency presence list: explain the `cases` lowest-survival
/// rows and rank features by how often they make each top-K, breaking ties
/// by mean |weight|.
fn lime_aggregate_top<F: Fn(&[f64]) -> f64>(
    model_fn: &F,
    table: &CohortTable,
    stats: &PerturbationStats,
    lime_config: &LimeConfig,
    cases: usize,
    top_k: usize,
) -> Result<Vec<String>> {
    let mut order: Vec<usize> = (0..table.n_rows()).collect();
    order.sort_by(|&a, &b| {
        model_fn(&table.rows[a])
            .partial_cmp(&model_fn(&table.rows[b]))
            .unwrap()
            .then(a.cmp(&b))
    });
    order.truncate(cases);

    let mut presence: BTreeMap<String, (usize, f64)> = BTreeMap::new();
    for &case in &order {
        let explanation =
            lime_explain(model_fn, &table.rows[case], stats, lime_config, case)?;
        for (name, weight) in explanation.top_features {
            let entry = presence.entry(name).or_insert((0, 0.0));
            entry.0 += 1;
            entry.1 += weight.abs();
        }
    }
    let mut ranked: Vec<(String, usize, f64)> = presence
        .into_iter()
        .map(|(name, (count, total))| (name, count, total / count as f64))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(b.2.partial_cmp(&a.2).unwrap()));
    Ok(ranked.into_iter().take(top_k).map(|(name, _, _)| name).collect())
}
