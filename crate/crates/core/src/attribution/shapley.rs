//! Shapley attributions under the interventional value function: a
//! coalition's value is the mean model output with out-of-coalition
//! features replaced by background-row values.
//!
//! `exact_shapley` enumerates all coalitions (the oracle-grade path, capped
//! at 12 features); `kernel_shapley` solves the Shapley-kernel-weighted
//! least squares under the efficiency constraint and reduces to the exact
//! solution when the sample budget covers every coalition.

use rand::Rng;

use super::{Attribution, BackgroundSet};
use crate::linalg::solve_linear;
use crate::rng::derive_rng;
use crate::{Error, Result};

pub const EXACT_LIMIT: usize = 12;
const COALITION_STREAM: u64 = 0x11;

/// Mean model output over background rows with features outside `mask`
/// taken from the background row.
fn coalition_value<F: Fn(&[f64]) -> f64>(
    model_fn: &F,
    x: &[f64],
    background: &[Vec<f64>],
    mask: u64,
) -> f64 {
    let d = x.len();
    let mut blended = vec![0.0; d];
    let mut total = 0.0;
    for row in background {
        for j in 0..d {
            blended[j] = if mask & (1 << j) != 0 { x[j] } else { row[j] };
        }
        total += model_fn(&blended);
    }
    total / background.len() as f64
}

/// Exact Shapley values by full coalition enumeration.
pub fn exact_shapley<F: Fn(&[f64]) -> f64>(
    model_fn: F,
    x: &[f64],
    background: &BackgroundSet,
) -> Result<Attribution> {
    let d = x.len();
    if d > EXACT_LIMIT {
        return Err(Error::TooManyFeatures {
            got: d,
            max: EXACT_LIMIT,
        });
    }
    if background.rows.is_empty() {
        return Err(Error::EmptyCohort);
    }

    let n_masks = 1usize << d;
    let mut values = vec![0.0; n_masks];
    for (mask, value) in values.iter_mut().enumerate() {
        *value = coalition_value(&model_fn, x, &background.rows, mask as u64);
    }

    // permutation weights |S|! (d-|S|-1)! / d!
    let mut factorial = vec![1.0f64; d + 1];
    for i in 1..=d {
        factorial[i] = factorial[i - 1] * i as f64;
    }
    let weight = |s: usize| factorial[s] * factorial[d - s - 1] / factorial[d];

    let mut contributions = vec![0.0; d];
    for (i, phi) in contributions.iter_mut().enumerate() {
        let bit = 1usize << i;
        for mask in 0..n_masks {
            if mask & bit != 0 {
                continue;
            }
            let s = (mask as u64).count_ones() as usize;
            *phi += weight(s) * (values[mask | bit] - values[mask]);
        }
    }

    Ok(Attribution {
        contributions,
        baseline: values[0],
        prediction: values[n_masks - 1],
        ridge_fallback: false,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut value = 1.0;
    for i in 0..k {
        value = value * (n - i) as f64 / (i + 1) as f64;
    }
    value
}

/// Shapley kernel weight of a coalition of size `s` out of `d` features.
fn shapley_kernel(d: usize, s: usize) -> f64 {
    (d as f64 - 1.0) / (binomial(d, s) * (s * (d - s)) as f64)
}

/// Kernel SHAP: weighted least squares over sampled coalitions with the
/// efficiency constraint built in. With `n_samples` at least `2^d - 2` the
/// proper coalitions are enumerated instead, which recovers the exact
/// Shapley values.
pub fn kernel_shapley<F: Fn(&[f64]) -> f64>(
    model_fn: F,
    x: &[f64],
    background: &BackgroundSet,
    n_samples: usize,
    seed: u64,
) -> Result<Attribution> {
    let d = x.len();
    if n_samples < 2 * d + 2 {
        return Err(Error::TooFewSamples {
            what: "kernel_shapley",
            min: 2 * d + 2,
            got: n_samples,
        });
    }
    if background.rows.is_empty() {
        return Err(Error::EmptyCohort);
    }

    let baseline = coalition_value(&model_fn, x, &background.rows, 0);
    let prediction = model_fn(x);
    if d == 1 {
        return Ok(Attribution {
            contributions: vec![prediction - baseline],
            baseline,
            prediction,
            ridge_fallback: false,
        });
    }

    // (mask, weight) pairs for proper nonempty coalitions
    let full_coverage = d <= 20 && (n_samples as u128) >= (1u128 << d) - 2;
    let coalitions: Vec<(u64, f64)> = if full_coverage {
        (1..(1u64 << d) - 1)
            .map(|mask| (mask, shapley_kernel(d, mask.count_ones() as usize)))
            .collect()
    } else {
        let mut rng = derive_rng(seed, &[COALITION_STREAM]);
        // size law of the kernel: P(s) proportional to 1 / (s (d - s))
        let size_weights: Vec<f64> = (1..d).map(|s| 1.0 / ((s * (d - s)) as f64)).collect();
        let total_weight: f64 = size_weights.iter().sum();
        let mut scratch: Vec<usize> = (0..d).collect();
        (0..n_samples)
            .map(|_| {
                let mut draw = rng.gen_range(0.0..total_weight);
                let mut size = 1;
                for (i, &w) in size_weights.iter().enumerate() {
                    if draw < w {
                        size = i + 1;
                        break;
                    }
                    draw -= w;
                }
                // uniform subset of that size
                for i in 0..size {
                    let j = rng.gen_range(i..d);
                    scratch.swap(i, j);
                }
                let mask = scratch[..size].iter().fold(0u64, |m, &f| m | (1 << f));
                (mask, 1.0)
            })
            .collect()
    };

    // regress v(S) - v(0) on coalition indicators, substituting the last
    // feature out through the efficiency constraint
    let m = d - 1;
    let gap = prediction - baseline;
    let mut a = vec![vec![0.0; m]; m];
    let mut b = vec![0.0; m];
    let mut design_row = vec![0.0; m];
    for &(mask, weight) in &coalitions {
        let z_last = f64::from(mask >> (d - 1) & 1 == 1);
        for (j, slot) in design_row.iter_mut().enumerate() {
            *slot = f64::from(mask >> j & 1 == 1) - z_last;
        }
        let value = coalition_value(&model_fn, x, &background.rows, mask);
        let target = value - baseline - z_last * gap;
        for i in 0..m {
            if design_row[i] == 0.0 {
                continue;
            }
            let wi = weight * design_row[i];
            for j in 0..m {
                a[i][j] += wi * design_row[j];
            }
            b[i] += wi * target;
        }
    }

    let (phi_head, ridge_fallback) = match solve_linear(a.clone(), b.clone()) {
        Some(solution) => (solution, false),
        None => {
            let mut ridged = a;
            for (i, row) in ridged.iter_mut().enumerate() {
                row[i] += 1e-8;
            }
            let solution = solve_linear(ridged, b)
                .ok_or_else(|| Error::Internal("kernel SHAP system is unsolvable".into()))?;
            (solution, true)
        }
    };

    let mut contributions = phi_head;
    let head_sum: f64 = contributions.iter().sum();
    contributions.push(gap - head_sum);

    Ok(Attribution {
        contributions,
        baseline,
        prediction,
        ridge_fallback,
    })
}
