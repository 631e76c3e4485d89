//! Small dense linear solves. Systems here are tiny (order of the feature
//! count), so Gaussian elimination with partial pivoting is plenty.

/// Solve `a x = b` in place. Returns `None` when a pivot collapses below
/// `1e-12`, which callers treat as a singular system.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|row| row.len() == n));

    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot_row][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);

        for row in (col + 1)..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }

    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for col in (row + 1)..n {
            acc -= a[row][col] * x[col];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// Weighted ridge regression with an unpenalized intercept.
///
/// Minimizes `sum_i w_i (y_i - b0 - beta . x_i)^2 + penalty * |beta|^2`
/// and returns `(b0, beta)`.
pub fn weighted_ridge(
    rows: &[Vec<f64>],
    targets: &[f64],
    weights: &[f64],
    penalty: f64,
) -> Option<(f64, Vec<f64>)> {
    let d = rows.first().map_or(0, Vec::len);
    let m = d + 1;
    let mut a = vec![vec![0.0; m]; m];
    let mut rhs = vec![0.0; m];

    for ((row, &y), &w) in rows.iter().zip(targets).zip(weights) {
        a[0][0] += w;
        rhs[0] += w * y;
        for i in 0..d {
            a[0][i + 1] += w * row[i];
            a[i + 1][0] += w * row[i];
            rhs[i + 1] += w * row[i] * y;
            for j in 0..d {
                a[i + 1][j + 1] += w * row[i] * row[j];
            }
        }
    }
    for i in 1..m {
        a[i][i] += penalty;
    }

    let theta = solve_linear(a, rhs)?;
    Some((theta[0], theta[1..].to_vec()))
}
