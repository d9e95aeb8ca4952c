//! Affine platform policies `f = M x_ex + b`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dynamics::OpinionVector;
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyKind {
    Perfect,
    /// Observed nodes are predicted exactly, the rest by the observed mean.
    MeanEstimation { observed: Vec<usize> },
    /// Each listed node is always predicted at its target; others exactly.
    Steering { targets: Vec<(usize, f64)> },
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffinePolicy {
    n: usize,
    kind: PolicyKind,
    /// Only stored for custom policies; the other kinds build it on demand.
    m: Option<DMatrix<f64>>,
    b: DVector<f64>,
}

pub fn perfect_policy(n: usize) -> Result<AffinePolicy> {
    if n == 0 {
        return Err(Error::invalid("policy over zero nodes"));
    }
    Ok(AffinePolicy {
        n,
        kind: PolicyKind::Perfect,
        m: None,
        b: DVector::zeros(n),
    })
}

pub fn mean_estimation_policy(observed: &[usize], n: usize) -> Result<AffinePolicy> {
    if observed.is_empty() {
        return Err(Error::invalid("mean estimation needs at least one observed node"));
    }
    let mut obs = observed.to_vec();
    obs.sort_unstable();
    obs.dedup();
    if let Some(&i) = obs.iter().find(|&&i| i >= n) {
        return Err(Error::invalid(format!("observed node {i} outside 0..{n}")));
    }
    Ok(AffinePolicy {
        n,
        kind: PolicyKind::MeanEstimation { observed: obs },
        m: None,
        b: DVector::zeros(n),
    })
}

pub fn steering_policy(j: usize, s: f64, n: usize) -> Result<AffinePolicy> {
    steering_policy_multi(&[(j, s)], n)
}

/// Steering of several nodes at once, each towards its own target.
pub fn steering_policy_multi(targets: &[(usize, f64)], n: usize) -> Result<AffinePolicy> {
    let mut b = DVector::zeros(n);
    let mut seen = vec![false; n];
    for &(j, s) in targets {
        if j >= n {
            return Err(Error::invalid(format!("steered node {j} outside 0..{n}")));
        }
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::invalid(format!("steering target {s} outside [0, 1]")));
        }
        if std::mem::replace(&mut seen[j], true) {
            return Err(Error::invalid(format!("node {j} steered twice")));
        }
        b[j] = s;
    }
    Ok(AffinePolicy {
        n,
        kind: PolicyKind::Steering {
            targets: targets.to_vec(),
        },
        m: None,
        b,
    })
}

/// Arbitrary affine policy. Requires `M >= 0`, `b >= 0` and
/// `sum_j M_ij + b_i <= 1` for every row, which is exactly the condition
/// for mapping `[0,1]^n` into itself.
pub fn custom_policy(m: DMatrix<f64>, b: DVector<f64>) -> Result<AffinePolicy> {
    let n = b.len();
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: m.nrows().max(m.ncols()),
        });
    }
    if m.iter().chain(b.iter()).any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid("policy entries must be finite and nonnegative"));
    }
    for i in 0..n {
        let total = m.row(i).sum() + b[i];
        if total > 1.0 + 1e-12 {
            return Err(Error::invalid(format!("row {i} can exceed 1 (bound {total})")));
        }
    }
    Ok(AffinePolicy {
        n,
        kind: PolicyKind::Custom,
        m: Some(m),
        b,
    })
}

impl AffinePolicy {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &PolicyKind {
        &self.kind
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.b
    }

    /// The dense `M`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.n;
        match &self.kind {
            PolicyKind::Perfect => DMatrix::identity(n, n),
            PolicyKind::MeanEstimation { observed } => {
                let mut m = DMatrix::zeros(n, n);
                let mut is_obs = vec![false; n];
                for &i in observed {
                    is_obs[i] = true;
                    m[(i, i)] = 1.0;
                }
                let share = 1.0 / observed.len() as f64;
                for i in (0..n).filter(|&i| !is_obs[i]) {
                    for &j in observed {
                        m[(i, j)] = share;
                    }
                }
                m
            }
            PolicyKind::Steering { targets } => {
                let mut m = DMatrix::identity(n, n);
                for &(j, _) in targets {
                    m[(j, j)] = 0.0;
                }
                m
            }
            PolicyKind::Custom => self.m.clone().expect("custom policy stores M"),
        }
    }

    /// `M x + b` for any real vector, without range checks.
    pub fn apply_raw(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.n, x.len())?;
        Ok(match &self.kind {
            PolicyKind::Perfect => x.clone(),
            PolicyKind::MeanEstimation { observed } => {
                let avg = observed.iter().map(|&i| x[i]).sum::<f64>() / observed.len() as f64;
                let mut f = DVector::from_element(self.n, avg);
                for &i in observed {
                    f[i] = x[i];
                }
                f
            }
            PolicyKind::Steering { targets } => {
                let mut f = x.clone();
                for &(j, s) in targets {
                    f[j] = s;
                }
                f
            }
            PolicyKind::Custom => self.m.as_ref().expect("custom policy stores M") * x + &self.b,
        })
    }

    pub fn apply(&self, x_ex: &OpinionVector) -> Result<OpinionVector> {
        OpinionVector::computed(self.apply_raw(x_ex.as_dvector())?)
    }
}

/// Free-function form of [`AffinePolicy::apply`].
pub fn apply_policy(p: &AffinePolicy, x_ex: &OpinionVector) -> Result<OpinionVector> {
    p.apply(x_ex)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ov(v: &[f64]) -> OpinionVector {
        OpinionVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn perfect_is_identity() {
        let p = perfect_policy(2).unwrap();
        assert_eq!(p.apply(&ov(&[0.2, 0.9])).unwrap().to_vec(), vec![0.2, 0.9]);
        assert_eq!(p.matrix(), DMatrix::identity(2, 2));
        assert!(perfect_policy(0).is_err());
    }

    #[test]
    fn mean_estimation_example() {
        let p = mean_estimation_policy(&[0, 1], 3).unwrap();
        let f = p.apply(&ov(&[0.2, 0.6, 0.9])).unwrap();
        assert!((f[2] - 0.4).abs() < 1e-15);
        assert_eq!(&f.to_vec()[..2], &[0.2, 0.6]);
        let all = mean_estimation_policy(&[2, 0, 1], 3).unwrap();
        assert_eq!(all.matrix(), perfect_policy(3).unwrap().matrix());
        assert!(mean_estimation_policy(&[], 3).is_err());
        let naive = p.matrix() * DVector::from_vec(vec![0.2, 0.6, 0.9]);
        assert!((naive - f.as_dvector()).amax() < 1e-15);
    }

    #[test]
    fn steering_example() {
        let p = steering_policy(0, 1.0, 3).unwrap();
        let f = p.apply(&ov(&[0.2, 0.6, 0.9])).unwrap();
        assert_eq!(f.to_vec(), vec![1.0, 0.6, 0.9]);
        let x = ov(&[1.0, 0.3, 0.3]);
        assert_eq!(p.apply(&x).unwrap(), x);
        assert!(steering_policy(3, 1.0, 3).is_err());
        assert!(steering_policy(0, 1.5, 3).is_err());
        let mut expected = DMatrix::identity(3, 3);
        expected[(0, 0)] = 0.0;
        assert_eq!(p.matrix(), expected);
    }

    #[test]
    fn custom_policy_validation() {
        let m = DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.0, 1.0]);
        let b = DVector::from_vec(vec![0.3, 0.0]);
        let p = custom_policy(m.clone(), b.clone()).unwrap();
        let f = p.apply(&ov(&[1.0, 1.0])).unwrap();
        assert!((f[0] - 1.0).abs() < 1e-15);
        assert!(custom_policy(m, DVector::from_vec(vec![0.31, 0.0])).is_err());
        let neg = DMatrix::from_row_slice(1, 1, &[-0.1]);
        assert!(custom_policy(neg, DVector::zeros(1)).is_err());
    }
}
