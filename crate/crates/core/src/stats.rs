//! Survivor vs non-survivor descriptive statistics: Welch's t-test with a
//! Student-t p-value computed through the regularized incomplete beta
//! function.

use crate::encode::CohortTable;
use crate::schema::FeatureKind;
use crate::{Error, Result};

/// Lanczos approximation (g = 7, n = 9).
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &coef) in LANCZOS.iter().enumerate().skip(1) {
        acc += coef / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta (Lentz's method).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_bt = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let bt = ln_bt.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        bt * beta_cf(a, b, x) / a
    } else {
        1.0 - bt * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Two-sided p-value of a Student-t statistic.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    inc_beta(df / 2.0, 0.5, df / (df + t * t))
}

/// Student-t CDF.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    let p = student_t_two_sided_p(t, df);
    if t >= 0.0 {
        1.0 - p / 2.0
    } else {
        p / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub degenerate: bool,
}

/// Welch's two-sided t-test with sample (n-1) variances and
/// Welch-Satterthwaite degrees of freedom.
pub fn welch_t_test(sample_a: &[f64], sample_b: &[f64]) -> Result<WelchResult> {
    for (name, sample) in [("sample_a", sample_a), ("sample_b", sample_b)] {
        if sample.len() < 2 {
            return Err(Error::TooFewSamples {
                what: "welch_t_test",
                min: 2,
                got: sample.len(),
            });
        }
        if sample.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(name.to_string()));
        }
    }

    let (na, nb) = (sample_a.len() as f64, sample_b.len() as f64);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let var = |s: &[f64], m: f64| s.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (s.len() as f64 - 1.0);
    let (ma, mb) = (mean(sample_a), mean(sample_b));
    let (va, vb) = (var(sample_a, ma), var(sample_b, mb));

    if va < 1e-300 && vb < 1e-300 {
        if (ma - mb).abs() < 1e-12 {
            return Ok(WelchResult {
                t: 0.0,
                df: na + nb - 2.0,
                p: 1.0,
                degenerate: true,
            });
        }
        return Err(Error::ZeroVariance("both samples".into()));
    }

    let sa = va / na;
    let sb = vb / nb;
    let t = (ma - mb) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let p = student_t_two_sided_p(t, df);
    Ok(WelchResult {
        t,
        df,
        p,
        degenerate: false,
    })
}

/// One Table-style comparison row: group means in raw units plus the Welch
/// test outcome. `available` is false when a group was too small.
#[derive(Debug, Clone)]
pub struct GroupComparison {
    pub feature: String,
    pub mean_survivors: f64,
    pub mean_nonsurvivors: f64,
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub available: bool,
    pub degenerate: bool,
}

/// Compare survivor and non-survivor means of every numeric feature in raw
/// (de-normalized) units.
pub fn compare_groups(table: &CohortTable) -> Result<Vec<GroupComparison>> {
    let survivors: Vec<usize> = (0..table.n_rows()).filter(|&i| table.labels[i] == 1).collect();
    let nonsurvivors: Vec<usize> = (0..table.n_rows()).filter(|&i| table.labels[i] == 0).collect();
    if survivors.is_empty() {
        return Err(Error::SingleClass("no survivors in cohort".into()));
    }
    if nonsurvivors.is_empty() {
        return Err(Error::SingleClass("no non-survivors in cohort".into()));
    }

    let mut comparisons = Vec::new();
    for feature in &table.schema.features {
        if feature.kind != FeatureKind::Numeric {
            continue;
        }
        let raw = table
            .raw_numeric_column(&feature.name)
            .ok_or_else(|| Error::Internal(format!("missing numeric column '{}'", feature.name)))?;
        let group_a: Vec<f64> = survivors.iter().map(|&i| raw[i]).collect();
        let group_b: Vec<f64> = nonsurvivors.iter().map(|&i| raw[i]).collect();
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;

        let comparison = match welch_t_test(&group_a, &group_b) {
            Ok(result) => GroupComparison {
                feature: feature.name.clone(),
                mean_survivors: mean(&group_a),
                mean_nonsurvivors: mean(&group_b),
                t: result.t,
                df: result.df,
                p: result.p,
                available: true,
                degenerate: result.degenerate,
            },
            Err(_) => GroupComparison {
                feature: feature.name.clone(),
                mean_survivors: mean(&group_a),
                mean_nonsurvivors: mean(&group_b),
                t: f64::NAN,
                df: f64::NAN,
                p: f64::NAN,
                available: false,
                degenerate: false,
            },
        };
        comparisons.push(comparison);
    }
    Ok(comparisons)
}
