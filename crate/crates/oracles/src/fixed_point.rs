use crate::{sup_dist, Matrix, OracleConfig, OracleError};

/// Number of peer-interaction steps between retraining rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeerSteps {
    Finite(usize),
    /// Iterate the peer dynamics until successive states agree to 1e-14.
    UntilConverged,
}

/// `f = M x + b`.
#[derive(Debug, Clone)]
pub struct AffineRule {
    pub m: Matrix,
    pub b: Vec<f64>,
}

impl AffineRule {
    pub fn identity(n: usize) -> Self {
        Self {
            m: crate::identity(n),
            b: vec![0.0; n],
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        crate::mat_vec(&self.m, x)
            .into_iter()
            .zip(&self.b)
            .map(|(v, b)| v + b)
            .collect()
    }
}

/// Row-wise nonzero entries of `w`, so the oracle stays cheap on sparse graphs.
fn sparse_rows(w: &Matrix) -> Vec<Vec<(usize, f64)>> {
    w.iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, v)| (j, *v))
                .collect()
        })
        .collect()
}

fn fj_sparse(
    x_init: &[f64],
    alpha: &[f64],
    rows: &[Vec<(usize, f64)>],
    steps: PeerSteps,
    max_iter: usize,
) -> Result<Vec<f64>, OracleError> {
    let step = |x: &[f64]| -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let peer: f64 = rows[i].iter().map(|(j, w)| w * x[*j]).sum();
                (1.0 - alpha[i]) * x_init[i] + alpha[i] * peer
            })
            .collect()
    };
    let mut x = x_init.to_vec();
    match steps {
        PeerSteps::Finite(k) => {
            for _ in 0..k {
                x = step(&x);
            }
            Ok(x)
        }
        PeerSteps::UntilConverged => {
            for _ in 0..max_iter {
                let next = step(&x);
                let change = sup_dist(&next, &x);
                x = next;
                if change < 1e-14 {
                    return Ok(x);
                }
            }
            Err(OracleError::NoConvergence(max_iter))
        }
    }
}

/// Naive Friedkin-Johnsen iteration `x <- (1-a) x_init + a W x`.
pub fn fj_naive(
    x_init: &[f64],
    alpha: &[f64],
    w: &Matrix,
    steps: PeerSteps,
) -> Result<Vec<f64>, OracleError> {
    fj_sparse(x_init, alpha, &sparse_rows(w), steps, 1_000_000)
}

/// Runs the retraining loop literally until predictions stop moving.
///
/// Returns the expressed opinions induced by the final predictions, i.e. the
/// performatively stable opinions when the loop converges.
pub fn fixed_point_oracle(
    x_star: &[f64],
    alpha: &[f64],
    beta: &[f64],
    w: &Matrix,
    steps: PeerSteps,
    rule: &AffineRule,
    cfg: OracleConfig,
) -> Result<Vec<f64>, OracleError> {
    let n = x_star.len();
    if alpha.len() != n || beta.len() != n || w.len() != n || rule.b.len() != n {
        return Err(OracleError::Invalid("dimension mismatch".into()));
    }
    let rows = sparse_rows(w);
    let expressed = |f: &[f64]| -> Result<Vec<f64>, OracleError> {
        let x_init: Vec<f64> = (0..n)
            .map(|i| (1.0 - beta[i]) * x_star[i] + beta[i] * f[i])
            .collect();
        fj_sparse(&x_init, alpha, &rows, steps, 1_000_000)
    };

    let mut f = rule.apply(x_star);
    for _ in 0..cfg.max_iter {
        let x_ex = expressed(&f)?;
        let next = rule.apply(&x_ex);
        let change = sup_dist(&next, &f);
        f = next;
        if change < cfg.tol {
            return expressed(&f);
        }
    }
    Err(OracleError::NoConvergence(cfg.max_iter))
}
