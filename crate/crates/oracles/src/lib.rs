//! Brute-force reference implementations.
//!
//! Everything here works on plain `Vec<Vec<f64>>` matrices and shares no code
//! with the `perfodyn` crate, so it can be used to check the closed forms and
//! solvers there. Nothing in this crate is tuned for speed; oracles are meant
//! for matrices with at most [`MAX_ORACLE_DIM`] rows.

mod eig;
mod finite_diff;
mod fixed_point;
mod solve;

pub use eig::{dominant_pair, eig_oracle, symmetric_eigenvalues, Dominant, EigResult};
pub use finite_diff::finite_difference;
pub use fixed_point::{fixed_point_oracle, fj_naive, AffineRule, PeerSteps};
pub use solve::dense_solve_oracle;

/// Largest matrix dimension the oracles are exercised on.
pub const MAX_ORACLE_DIM: usize = 64;

pub type Matrix = Vec<Vec<f64>>;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum OracleError {
    #[error("no convergence within {0} iterations")]
    NoConvergence(usize),
    #[error("power iteration oscillates with period 2")]
    PeriodTwo,
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("non-finite evaluation at {0}")]
    NonFinite(f64),
    #[error("Richardson check failed: {coarse} vs {fine}")]
    Richardson { coarse: f64, fine: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Residual tolerance and iteration cap for iterative oracles.
#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl OracleConfig {
    pub fn new(tol: f64, max_iter: usize) -> Result<Self, OracleError> {
        if !(tol > 0.0) || max_iter == 0 {
            return Err(OracleError::Invalid(format!(
                "tol={tol}, max_iter={max_iter}"
            )));
        }
        Ok(Self { tol, max_iter })
    }
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iter: 100_000,
        }
    }
}

pub fn identity(n: usize) -> Matrix {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub fn mat_vec(a: &Matrix, x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn vec_mat(x: &[f64], a: &Matrix) -> Vec<f64> {
    let n = a.first().map_or(0, Vec::len);
    let mut out = vec![0.0; n];
    for (xi, row) in x.iter().zip(a) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += xi * v;
        }
    }
    out
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let m = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            let mut out = vec![0.0; m];
            for (aik, brow) in row.iter().zip(b) {
                if *aik == 0.0 {
                    continue;
                }
                for (o, bkj) in out.iter_mut().zip(brow) {
                    *o += aik * bkj;
                }
            }
            out
        })
        .collect()
}

pub fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `D^{-1} A` for an adjacency list, materialized densely.
pub fn row_normalized_adjacency(n: usize, edges: &[(usize, usize)]) -> Matrix {
    let mut a = vec![vec![0.0; n]; n];
    for &(i, j) in edges {
        a[i][j] = 1.0;
        a[j][i] = 1.0;
    }
    for row in &mut a {
        let d: f64 = row.iter().sum();
        if d > 0.0 {
            row.iter_mut().for_each(|v| *v /= d);
        }
    }
    a
}
