//! Report assembly: the stage-by-learner metrics table, survivor statistics,
//! ROC / beeswarm / presence / correlation plot-data files.

use crate::attribution::summary::{BeeswarmPoint, PresenceMatrix};
use crate::attribution::LocalExplanation;
use crate::encode::CorrelationMatrix;
use crate::ingest::Stage;
use crate::learners::Learner;
use crate::selection::{ConfigResult, GridResult, MetricsRow, RocCurve};
use crate::stats::GroupComparison;
use crate::Result;

/// One line of the metrics table.
#[derive(Debug, Clone)]
pub struct MetricsLine {
    pub cancer: String,
    pub stage: Stage,
    pub learner: Learner,
    pub metrics: MetricsRow,
}

fn fmt4(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        "n/a".into()
    }
}

fn fmt3(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.3}")
    } else {
        "n/a".into()
    }
}

fn fmt1(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.1}")
    } else {
        "n/a".into()
    }
}

/// p-values print with four decimals and never as a bare zero.
pub fn format_p(p: f64) -> String {
    if !p.is_finite() {
        "n/a".into()
    } else if p < 1e-4 {
        "<0.0001".into()
    } else {
        format!("{p:.4}")
    }
}

/// CSV with one row per learner and stage: `acc,prec,rec,f1,auc`.
pub fn metrics_csv(lines: &[MetricsLine]) -> String {
    let mut out = String::from("cancer,stage,learner,acc,prec,rec,f1,auc\n");
    for line in lines {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            line.cancer,
            line.stage.slug(),
            line.learner.slug(),
            fmt4(line.metrics.accuracy),
            fmt4(line.metrics.precision),
            fmt4(line.metrics.recall),
            fmt4(line.metrics.f1),
            fmt4(line.metrics.auc.unwrap_or(f64::NAN)),
        ));
    }
    out
}

/// Pretty text in the published layout: stages as rows, one five-metric
/// column group per learner.
pub fn metrics_text(cancer: &str, lines: &[MetricsLine]) -> String {
    let metric_names = ["Acc", "Prec", "Rec", "F1", "AUC"];
    let group_width = metric_names.len() * 7;
    let mut out = String::new();
    out.push_str("Performance of ML models for survival prediction (cross-validation means)\n\n");

    out.push_str(&format!("{:<12} {:<10}", "Cancer", "Stage"));
    for learner in Learner::ALL {
        out.push_str(&format!(
            " | {:<width$}",
            learner.display_name(),
            width = group_width
        ));
    }
    out.push('\n');
    out.push_str(&format!("{:<12} {:<10}", "", ""));
    for _ in Learner::ALL {
        out.push_str(" | ");
        for name in metric_names {
            out.push_str(&format!("{name:<7}"));
        }
    }
    out.push('\n');

    for stage in Stage::ALL {
        out.push_str(&format!("{:<12} {:<10}", cancer, stage.to_string()));
        for learner in Learner::ALL {
            out.push_str(" | ");
            match lines
                .iter()
                .find(|l| l.stage == stage && l.learner == learner)
            {
                Some(line) => {
                    for v in [
                        line.metrics.accuracy,
                        line.metrics.precision,
                        line.metrics.recall,
                        line.metrics.f1,
                        line.metrics.auc.unwrap_or(f64::NAN),
                    ] {
                        out.push_str(&format!("{:<7}", fmt3(v)));
                    }
                }
                None => out.push_str(&format!("{:<width$}", "skipped", width = group_width)),
            }
        }
        out.push('\n');
    }
    out
}

/// TSV of (fpr, tpr) points.
pub fn roc_tsv(curve: &RocCurve) -> String {
    let mut out = String::from("fpr\ttpr\n");
    for &(fpr, tpr) in &curve.points {
        out.push_str(&format!("{fpr:.6}\t{tpr:.6}\n"));
    }
    out
}

/// TSV of per-(instance, feature) beeswarm points.
pub fn beeswarm_tsv(points: &[BeeswarmPoint]) -> String {
    let mut out = String::from("instance\tfeature\tnormalized_value\tphi\n");
    for point in points {
        out.push_str(&format!(
            "{}\t{}\t{:.6}\t{:.6}\n",
            point.instance, point.feature, point.normalized_value, point.phi
        ));
    }
    out
}

/// TSV of the mean-|phi| feature ranking.
pub fn shap_ranking_tsv(ranking: &[(String, f64)]) -> String {
    let mut out = String::from("rank\tfeature\tmean_abs_phi\n");
    for (i, (feature, value)) in ranking.iter().enumerate() {
        out.push_str(&format!("{}\t{feature}\t{value:.6}\n", i + 1));
    }
    out
}

/// Binary presence matrix as TSV with one column per cancer-stage label.
pub fn presence_tsv(matrix: &PresenceMatrix) -> String {
    let mut out = String::from("feature");
    for label in &matrix.column_labels {
        out.push('\t');
        out.push_str(label);
    }
    out.push('\n');
    for (feature, row) in matrix.feature_rows.iter().zip(&matrix.cells) {
        out.push_str(feature);
        for cell in row {
            out.push_str(&format!("\t{cell}"));
        }
        out.push('\n');
    }
    out
}

/// Correlation matrix as TSV; undefined entries print as NA.
pub fn correlation_tsv(matrix: &CorrelationMatrix) -> String {
    let mut out = String::from("feature");
    for name in &matrix.features {
        out.push('\t');
        out.push_str(name);
    }
    out.push('\n');
    for (name, row) in matrix.features.iter().zip(&matrix.values) {
        out.push_str(name);
        for &value in row {
            if value.is_nan() {
                out.push_str("\tNA");
            } else {
                out.push_str(&format!("\t{value:.6}"));
            }
        }
        out.push('\n');
    }
    out
}

/// Per-feature survivor comparison CSV.
pub fn stats_csv(cancer: &str, comparisons: &[GroupComparison]) -> String {
    let mut out =
        String::from("cancer,feature,mean_survivors,mean_nonsurvivors,t,df,p,available\n");
    for c in comparisons {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            cancer,
            c.feature,
            fmt4(c.mean_survivors),
            fmt4(c.mean_nonsurvivors),
            fmt4(c.t),
            fmt4(c.df),
            format_p(c.p),
            c.available,
        ));
    }
    out
}

fn short_feature_name(name: &str) -> &str {
    match name {
        "Regional Nodes Examined" => "Nodes Exam.",
        "Regional Nodes Positive" => "Nodes Pos.",
        other => other,
    }
}

/// Canonical column order for the survivor-statistics table: Age, nodes
/// examined, nodes positive, tumor size, then anything else in given order.
fn stats_column_order(comparisons: &[GroupComparison]) -> Vec<usize> {
    let preferred = [
        "Age",
        "Regional Nodes Examined",
        "Regional Nodes Positive",
        "Tumor Size",
    ];
    let mut order = Vec::with_capacity(comparisons.len());
    for name in preferred {
        if let Some(idx) = comparisons.iter().position(|c| c.feature == name) {
            order.push(idx);
        }
    }
    for (idx, _) in comparisons.iter().enumerate() {
        if !order.contains(&idx) {
            order.push(idx);
        }
    }
    order
}

/// Text report in the published layout: survivor and non-survivor sections,
/// one mean column per numeric feature plus a joint p-value column (the
/// largest per-feature Welch p, so every feature separates at least that
/// strongly).
pub fn stats_text(cancer: &str, comparisons: &[GroupComparison]) -> String {
    let order = stats_column_order(comparisons);
    let mut out = String::new();
    out.push_str("Comparison of mean values between survivors and non-survivors\n\n");

    let header = |out: &mut String| {
        out.push_str(&format!("{:<14}", "Cancer Type"));
        for &i in &order {
            out.push_str(&format!(
                "{:<14}",
                short_feature_name(&comparisons[i].feature)
            ));
        }
        out.push_str("p-Value\n");
    };

    let worst_p = comparisons
        .iter()
        .filter(|c| c.available)
        .map(|c| c.p)
        .fold(f64::NAN, |acc: f64, p| if acc.is_nan() { p } else { acc.max(p) });

    out.push_str("Survivors\n");
    header(&mut out);
    out.push_str(&format!("{cancer:<14}"));
    for &i in &order {
        out.push_str(&format!("{:<14}", fmt1(comparisons[i].mean_survivors)));
    }
    out.push_str(&format_p(worst_p));
    out.push('\n');

    out.push_str("\nNon-survivors\n");
    header(&mut out);
    out.push_str(&format!("{cancer:<14}"));
    for &i in &order {
        out.push_str(&format!("{:<14}", fmt1(comparisons[i].mean_nonsurvivors)));
    }
    out.push_str(&format_p(worst_p));
    out.push('\n');
    out
}

/// Grid search results: one CSV row per (config, fold) plus a mean row per
/// config; failed configs carry their error in `status`.
pub fn grid_results_csv(cancer: &str, stage: Stage, grids: &[(Learner, &GridResult)]) -> String {
    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    writer
        .write_record([
            "cancer", "stage", "learner", "config", "params", "fold", "acc", "prec", "rec", "f1",
            "auc", "status",
        ])
        .expect("csv header");

    let mut write = |learner: Learner, idx: usize, result: &ConfigResult| {
        let params = result.config.params.describe();
        for (fold, metrics) in result.per_fold.iter().enumerate() {
            writer
                .write_record([
                    cancer,
                    stage.slug(),
                    learner.slug(),
                    &idx.to_string(),
                    &params,
                    &fold.to_string(),
                    &fmt4(metrics.accuracy),
                    &fmt4(metrics.precision),
                    &fmt4(metrics.recall),
                    &fmt4(metrics.f1),
                    &fmt4(metrics.auc.unwrap_or(f64::NAN)),
                    "ok",
                ])
                .expect("csv row");
        }
        let status = match &result.failed {
            Some(message) => format!("failed: {message}"),
            None => "ok".to_string(),
        };
        writer
            .write_record([
                cancer,
                stage.slug(),
                learner.slug(),
                &idx.to_string(),
                &params,
                "mean",
                "",
                "",
                "",
                "",
                &if result.failed.is_none() {
                    fmt4(result.mean_auc)
                } else {
                    String::new()
                },
                &status,
            ])
            .expect("csv row");
    };

    for (learner, grid) in grids {
        for (idx, result) in grid.results.iter().enumerate() {
            write(*learner, idx, result);
        }
    }
    String::from_utf8(writer.into_inner().expect("csv buffer")).expect("utf8 csv")
}

/// Local explanation JSON document.
pub fn lime_case_json(explanation: &LocalExplanation) -> Result<String> {
    Ok(serde_json::to_string_pretty(explanation)?)
}
