//! L2-regularized weighted logistic regression, fitted by damped Newton
//! iterations. The objective follows the C-times-sum-loss convention with
//! an unpenalized intercept:
//!
//! `0.5 |beta|^2 + C * sum_i w_i * ln(1 + exp(-y_i (beta . x_i + b)))`

use serde::{Deserialize, Serialize};

use super::{
    check_finite, compute_class_weights, sample_weights, sigmoid, ModelConfig, ModelParams,
};
use crate::linalg::solve_linear;
use crate::{Error, Result};

const GRAD_TOL: f64 = 1e-6;
const MAX_ITER: usize = 1000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogisticModel {
    pub config: ModelConfig,
    pub feature_count: usize,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl LogisticModel {
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        let z = self
            .coefficients
            .iter()
            .zip(row)
            .map(|(c, x)| c * x)
            .sum::<f64>()
            + self.intercept;
        sigmoid(z)
    }
}

/// `ln(1 + exp(u))` without overflow.
fn log1p_exp(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// Loss and gradient of the weighted objective at `(beta, intercept)`.
/// The gradient's last entry is the intercept derivative.
pub fn loss_and_gradient(
    beta: &[f64],
    intercept: f64,
    rows: &[Vec<f64>],
    labels: &[u8],
    weights: &[f64],
    c: f64,
) -> (f64, Vec<f64>) {
    let d = beta.len();
    let mut loss = 0.5 * beta.iter().map(|b| b * b).sum::<f64>();
    let mut grad = vec![0.0; d + 1];
    grad[..d].copy_from_slice(beta);

    for ((row, &label), &w) in rows.iter().zip(labels).zip(weights) {
        let y = if label == 1 { 1.0 } else { -1.0 };
        let z = beta.iter().zip(row).map(|(b, x)| b * x).sum::<f64>() + intercept;
        loss += c * w * log1p_exp(-y * z);
        // mu = sigma(-y z) is the miss probability
        let mu = sigmoid(-y * z);
        let scale = -c * w * mu * y;
        for (g, x) in grad[..d].iter_mut().zip(row) {
            *g += scale * x;
        }
        grad[d] += scale;
    }
    (loss, grad)
}

fn hessian(
    beta: &[f64],
    intercept: f64,
    rows: &[Vec<f64>],
    weights: &[f64],
    c: f64,
) -> Vec<Vec<f64>> {
    let d = beta.len();
    let mut h = vec![vec![0.0; d + 1]; d + 1];
    for (row, &w) in rows.iter().zip(weights) {
        let z = beta.iter().zip(row).map(|(b, x)| b * x).sum::<f64>() + intercept;
        let p = sigmoid(z);
        let curve = c * w * p * (1.0 - p);
        if curve == 0.0 {
            continue;
        }
        for i in 0..d {
            let xi = curve * row[i];
            for j in i..d {
                h[i][j] += xi * row[j];
            }
            h[i][d] += xi;
        }
        h[d][d] += curve;
    }
    for i in 0..=d {
        for j in 0..i {
            h[i][j] = h[j][i];
        }
    }
    for (i, row) in h.iter_mut().enumerate().take(d) {
        row[i] += 1.0; // L2 penalty; intercept stays unpenalized
    }
    h
}

pub fn fit_logistic(
    config: &ModelConfig,
    rows: &[Vec<f64>],
    labels: &[u8],
) -> Result<LogisticModel> {
    let ModelParams::Logistic { c, class_weight } = config.params else {
        return Err(Error::InvalidConfig("expected logistic parameters".into()));
    };
    if rows.is_empty() {
        return Err(Error::EmptyCohort);
    }
    check_finite(rows)?;
    let positives = labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::SingleClass(
            "logistic regression needs both classes".into(),
        ));
    }

    let class_weights = compute_class_weights(labels, class_weight)?;
    let weights = sample_weights(labels, class_weights);

    let d = rows[0].len();
    let mut beta = vec![0.0; d];
    let mut intercept = 0.0;
    let (mut loss, mut grad) = loss_and_gradient(&beta, intercept, rows, labels, &weights, c);

    for _ in 0..MAX_ITER {
        let grad_norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_norm < GRAD_TOL {
            break;
        }

        let h = hessian(&beta, intercept, rows, &weights, c);
        let step = match solve_linear(h.clone(), grad.clone()) {
            Some(step) => step,
            None => {
                let mut ridged = h;
                for (i, row) in ridged.iter_mut().enumerate() {
                    row[i] += 1e-8;
                }
                solve_linear(ridged, grad.clone())
                    .unwrap_or_else(|| grad.iter().map(|g| g * 0.1).collect())
            }
        };

        // backtracking line search on the Newton direction
        let descent: f64 = grad.iter().zip(&step).map(|(g, s)| g * s).sum();
        let mut scale = 1.0;
        loop {
            let trial_beta: Vec<f64> = beta
                .iter()
                .zip(&step)
                .map(|(b, s)| b - scale * s)
                .collect();
            let trial_intercept = intercept - scale * step[d];
            let (trial_loss, trial_grad) =
                loss_and_gradient(&trial_beta, trial_intercept, rows, labels, &weights, c);
            if trial_loss <= loss - 1e-4 * scale * descent || scale < 1e-10 {
                beta = trial_beta;
                intercept = trial_intercept;
                loss = trial_loss;
                grad = trial_grad;
                break;
            }
            scale *= 0.5;
        }
    }

    Ok(LogisticModel {
        config: config.clone(),
        feature_count: d,
        coefficients: beta,
        intercept,
    })
}
