use crate::{mat_vec, sup_dist, vec_mat, Matrix, OracleConfig, OracleError};

/// Dominant eigenvalue with right vector (max-norm 1) and left vector (sum 1).
#[derive(Debug, Clone)]
pub struct Dominant {
    pub value: f64,
    pub right: Vec<f64>,
    pub left: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EigResult {
    /// Full spectrum in descending order; only available for symmetric input.
    pub eigenvalues: Option<Vec<f64>>,
    pub dominant: Dominant,
}

fn normalize_max(v: &mut [f64]) {
    let m = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if m > 0.0 {
        v.iter_mut().for_each(|x| *x /= m);
    }
}

fn normalize_sum(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s != 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

/// Power iteration shared by the right and left runs; detects 2-cycles.
fn power<F: Fn(&[f64]) -> Vec<f64>>(
    apply: F,
    n: usize,
    normalize: fn(&mut [f64]),
    cfg: OracleConfig,
) -> Result<Vec<f64>, OracleError> {
    // Positive, non-constant start so that a constant fixed point is not hit
    // by accident and period-2 modes are excited.
    let mut prev: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 + 1.0) / n as f64).collect();
    normalize(&mut prev);
    let mut cur = apply(&prev);
    normalize(&mut cur);
    for _ in 0..cfg.max_iter {
        let mut next = apply(&cur);
        normalize(&mut next);
        let one_step = sup_dist(&next, &cur);
        let two_step = sup_dist(&next, &prev);
        if one_step < cfg.tol {
            return Ok(next);
        }
        if two_step < cfg.tol && one_step > 1e3 * cfg.tol {
            return Err(OracleError::PeriodTwo);
        }
        prev = cur;
        cur = next;
    }
    Err(OracleError::NoConvergence(cfg.max_iter))
}

/// Power iteration for the dominant eigenpair of a nonnegative matrix.
pub fn dominant_pair(a: &Matrix, cfg: OracleConfig) -> Result<Dominant, OracleError> {
    let n = a.len();
    let right = power(|x| mat_vec(a, x), n, normalize_max, cfg)?;
    let left = power(|y| vec_mat(y, a), n, normalize_sum, cfg)?;
    let ar = mat_vec(a, &right);
    let value = ar.iter().zip(&right).map(|(p, q)| p * q).sum::<f64>()
        / right.iter().map(|x| x * x).sum::<f64>();
    Ok(Dominant { value, right, left })
}

fn is_symmetric(a: &Matrix) -> bool {
    let n = a.len();
    (0..n).all(|i| (0..i).all(|j| (a[i][j] - a[j][i]).abs() <= 1e-14))
}

/// Cyclic Jacobi rotations; returns eigenvalues in descending order.
pub fn symmetric_eigenvalues(a: &Matrix) -> Result<Vec<f64>, OracleError> {
    if !is_symmetric(a) {
        return Err(OracleError::Invalid("matrix is not symmetric".into()));
    }
    let n = a.len();
    let mut m = a.clone();
    let total: f64 = m.iter().flat_map(|r| r.iter()).map(|v| v * v).sum();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off <= 1e-30 * total.max(f64::MIN_POSITIVE) {
            let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
            ev.sort_by(|x, y| y.total_cmp(x));
            return Ok(ev);
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    Err(OracleError::NoConvergence(100))
}

pub fn eig_oracle(a: &Matrix, cfg: OracleConfig) -> Result<EigResult, OracleError> {
    let eigenvalues = if is_symmetric(a) {
        Some(symmetric_eigenvalues(a)?)
    } else {
        None
    };
    let dominant = dominant_pair(a, cfg)?;
    Ok(EigResult {
        eigenvalues,
        dominant,
    })
}
