use crate::{Matrix, OracleError};

/// Gaussian elimination with partial pivoting on an augmented copy.
///
/// The returned solution satisfies `|Ax - b|_inf < 1e-9 (1 + |b|_inf)`; a
/// pivot below `1e-13` times the largest entry is treated as singular.
pub fn dense_solve_oracle(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, OracleError> {
    let n = a.len();
    if b.len() != n || a.iter().any(|r| r.len() != n) {
        return Err(OracleError::Invalid("non-square system".into()));
    }
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let mut aug: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(*bi);
            r
        })
        .collect();

    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))
            .unwrap();
        if aug[pivot][col].abs() < 1e-13 * scale {
            return Err(OracleError::Singular);
        }
        aug.swap(col, pivot);
        for row in col + 1..n {
            let factor = aug[row][col] / aug[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..=n {
                aug[row][k] -= factor * aug[col][k];
            }
        }
    }

    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| aug[row][k] * x[k]).sum();
        x[row] = (aug[row][n] - tail) / aug[row][row];
    }

    let residual = a
        .iter()
        .zip(b)
        .map(|(r, bi)| (r.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() - bi).abs())
        .fold(0.0, f64::max);
    let b_norm = b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if residual >= 1e-9 * (1.0 + b_norm) {
        return Err(OracleError::Singular);
    }
    Ok(x)
}
