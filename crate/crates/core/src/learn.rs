//! Parametric predictors fitted on observed nodes: ridge-guarded OLS and a
//! one-hidden-layer tanh network trained by full-batch gradient descent.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::OpinionVector;
use crate::error::{check_len, Error, Result};

/// Ridge term added to the centered Gram matrix.
pub const OLS_RIDGE: f64 = 1e-8;

/// Per-node covariates, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    data: DMatrix<f64>,
}

impl FeatureTable {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("features".into()));
        }
        Ok(Self { data })
    }

    /// `n x d` standard normal draws. The intercept is part of each model,
    /// so no constant column is added here.
    pub fn synthetic(n: usize, d: usize, rng: &mut impl Rng) -> Self {
        let data = DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        Self { data }
    }

    /// One-hot node identity, `n x n`.
    pub fn one_hot(n: usize) -> Self {
        Self {
            data: DMatrix::identity(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn d(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    fn rows(&self, nodes: &[usize]) -> Result<DMatrix<f64>> {
        if let Some(&i) = nodes.iter().find(|&&i| i >= self.n()) {
            return Err(Error::invalid(format!("node {i} outside 0..{}", self.n())));
        }
        Ok(self.data.select_rows(nodes))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpHyper {
    pub width: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Loss is recorded every this many epochs.
    pub checkpoint_every: usize,
}

impl Default for MlpHyper {
    fn default() -> Self {
        Self {
            width: 32,
            epochs: 500,
            learning_rate: 0.05,
            seed: 0,
            checkpoint_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Model {
    Ols {
        weights: DVector<f64>,
        intercept: f64,
    },
    Mlp {
        w1: DMatrix<f64>,
        b1: DVector<f64>,
        w2: DVector<f64>,
        b2: f64,
    },
}

/// A fitted model; predictions are clipped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedPredictor {
    model: Model,
    d: usize,
    /// Training MSE at each checkpoint (MLP only).
    pub loss_history: Vec<f64>,
}

fn training_set(
    features: &FeatureTable,
    targets: &OpinionVector,
    observed: &[usize],
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    check_len(features.n(), targets.len())?;
    if observed.is_empty() {
        return Err(Error::invalid("no observed nodes to fit on"));
    }
    let x = features.rows(observed)?;
    let y = DVector::from_iterator(observed.len(), observed.iter().map(|&i| targets[i]));
    Ok((x, y))
}

/// Least squares with intercept on the observed rows. The features are
/// centered and `OLS_RIDGE * I` is added to the Gram matrix; the intercept
/// is not penalized.
pub fn fit_ols(
    features: &FeatureTable,
    targets: &OpinionVector,
    observed: &[usize],
) -> Result<LearnedPredictor> {
    let (x, y) = training_set(features, targets, observed)?;
    let d = x.ncols();
    let x_mean = x.row_mean();
    let y_mean = y.mean();
    let mut xc = x.clone();
    for mut row in xc.row_iter_mut() {
        row -= &x_mean;
    }
    let yc = y.add_scalar(-y_mean);
    let mut gram = xc.transpose() * &xc;
    for i in 0..d {
        gram[(i, i)] += OLS_RIDGE;
    }
    let rhs = xc.transpose() * yc;
    let weights = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram.lu().solve(&rhs).ok_or(Error::Singular)?,
    };
    let intercept = y_mean - x_mean.transpose().dot(&weights);
    Ok(LearnedPredictor {
        model: Model::Ols { weights, intercept },
        d,
        loss_history: Vec::new(),
    })
}

fn mlp_forward(
    x: &DMatrix<f64>,
    w1: &DMatrix<f64>,
    b1: &DVector<f64>,
    w2: &DVector<f64>,
    b2: f64,
) -> (DMatrix<f64>, DVector<f64>) {
    let mut hidden = x * w1.transpose();
    for mut row in hidden.row_iter_mut() {
        for (h, b) in row.iter_mut().zip(b1.iter()) {
            *h = (*h + b).tanh();
        }
    }
    let out = (&hidden * w2).add_scalar(b2);
    (hidden, out)
}

/// Full-batch gradient descent on mean squared error. Deterministic for a
/// given `hyper.seed`; a non-finite or exploding loss is reported as
/// [`Error::Diverged`].
pub fn fit_mlp(
    features: &FeatureTable,
    targets: &OpinionVector,
    observed: &[usize],
    hyper: MlpHyper,
) -> Result<LearnedPredictor> {
    if hyper.width == 0 || hyper.checkpoint_every == 0 || !(hyper.learning_rate > 0.0) {
        return Err(Error::invalid(format!("MLP hyperparameters {hyper:?}")));
    }
    let (x, y) = training_set(features, targets, observed)?;
    let (m, d, h) = (x.nrows(), x.ncols(), hyper.width);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut init = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.random_range(-0.1..=0.1));
    let mut w1 = init(h, d);
    let mut b1 = init(h, 1).column(0).into_owned();
    let mut w2 = init(h, 1).column(0).into_owned();
    let mut b2 = init(1, 1)[(0, 0)];

    let mut history = Vec::new();
    let lr = hyper.learning_rate;
    for epoch in 0..=hyper.epochs {
        let (hidden, out) = mlp_forward(&x, &w1, &b1, &w2, b2);
        let err = out - &y;
        let loss = err.norm_squared() / m as f64;
        if !loss.is_finite() || loss > 1e6 {
            return Err(Error::Diverged(format!("loss {loss} at epoch {epoch}")));
        }
        if epoch % hyper.checkpoint_every == 0 || epoch == hyper.epochs {
            history.push(loss);
        }
        if epoch == hyper.epochs {
            break;
        }
        let g_out = err * (2.0 / m as f64);
        let g_w2 = hidden.transpose() * &g_out;
        let g_b2 = g_out.sum();
        // d loss / d pre-activation
        let mut g_hidden = &g_out * w2.transpose();
        g_hidden.zip_apply(&hidden, |g, a| *g *= 1.0 - a * a);
        let g_w1 = g_hidden.transpose() * &x;
        let g_b1 = g_hidden.row_sum().transpose();
        w1 -= g_w1 * lr;
        b1 -= g_b1 * lr;
        w2 -= g_w2 * lr;
        b2 -= g_b2 * lr;
    }
    Ok(LearnedPredictor {
        model: Model::Mlp { w1, b1, w2, b2 },
        d,
        loss_history: history,
    })
}

impl LearnedPredictor {
    /// Unclipped model output for the requested nodes.
    pub fn raw_predict(&self, features: &FeatureTable, nodes: &[usize]) -> Result<DVector<f64>> {
        check_len(self.d, features.d())?;
        let x = features.rows(nodes)?;
        Ok(match &self.model {
            Model::Ols { weights, intercept } => (x * weights).add_scalar(*intercept),
            Model::Mlp { w1, b1, w2, b2 } => mlp_forward(&x, w1, b1, w2, *b2).1,
        })
    }

    /// Predictions clipped to `[0, 1]`, one per requested node.
    pub fn predict(&self, features: &FeatureTable, nodes: &[usize]) -> Result<Vec<f64>> {
        let raw = self.raw_predict(features, nodes)?;
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model prediction".into()));
        }
        Ok(raw.iter().map(|v| v.clamp(0.0, 1.0)).collect())
    }

    pub fn is_mlp(&self) -> bool {
        matches!(self.model, Model::Mlp { .. })
    }
}

/// Free-function form of [`LearnedPredictor::predict`].
pub fn predict(p: &LearnedPredictor, features: &FeatureTable, nodes: &[usize]) -> Result<Vec<f64>> {
    p.predict(features, nodes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[&[f64]]) -> FeatureTable {
        let d = rows[0].len();
        FeatureTable::new(DMatrix::from_row_iterator(
            rows.len(),
            d,
            rows.iter().flat_map(|r| r.iter().copied()),
        ))
        .unwrap()
    }

    fn ov(v: &[f64]) -> OpinionVector {
        OpinionVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn ols_interpolates_linear_targets() {
        let t = [0.1, 0.4, 0.35, 0.9, 0.6];
        let f = table(&t.iter().map(std::slice::from_ref).collect::<Vec<_>>());
        let p = fit_ols(&f, &ov(&t), &[0, 1, 2, 3, 4]).unwrap();
        let got = p.predict(&f, &[0, 1, 2, 3, 4]).unwrap();
        for (g, w) in got.iter().zip(t) {
            assert!((g - w).abs() < 1e-6);
        }
    }

    #[test]
    fn ols_constant_targets() {
        let f = table(&[&[0.3, -1.0], &[2.0, 0.5], &[-0.7, 0.1], &[1.1, 1.1]]);
        let p = fit_ols(&f, &ov(&[0.6; 4]), &[0, 1, 2]).unwrap();
        for v in p.predict(&f, &[0, 1, 2, 3]).unwrap() {
            assert!((v - 0.6).abs() < 1e-8);
        }
    }

    #[test]
    fn ols_two_points_clipped() {
        let f = table(&[&[0.0], &[1.0], &[2.0]]);
        let p = fit_ols(&f, &ov(&[0.0, 1.0, 0.5]), &[0, 1]).unwrap();
        let raw = p.raw_predict(&f, &[2]).unwrap();
        assert!((raw[0] - 2.0).abs() < 1e-6);
        assert_eq!(p.predict(&f, &[2]).unwrap(), vec![1.0]);
    }

    #[test]
    fn ols_rejects_bad_inputs() {
        assert!(FeatureTable::new(DMatrix::from_element(2, 1, f64::NAN)).is_err());
        let f = table(&[&[0.0], &[1.0]]);
        assert!(fit_ols(&f, &ov(&[0.0, 1.0]), &[]).is_err());
        assert!(fit_ols(&f, &ov(&[0.0, 1.0]), &[5]).is_err());
    }

    #[test]
    fn mlp_learns_a_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = FeatureTable::synthetic(40, 3, &mut rng);
        let p = fit_mlp(&f, &ov(&[0.7; 40]), &(0..30).collect::<Vec<_>>(), MlpHyper::default())
            .unwrap();
        for v in p.predict(&f, &(0..40).collect::<Vec<_>>()).unwrap() {
            assert!((v - 0.7).abs() < 0.05, "{v}");
        }
    }

    #[test]
    fn mlp_is_deterministic_and_loss_decreases() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = FeatureTable::synthetic(50, 2, &mut rng);
        let t: Vec<f64> = (0..50)
            .map(|i| (0.5 + 0.2 * f.data()[(i, 0)]).clamp(0.0, 1.0))
            .collect();
        let obs: Vec<usize> = (0..40).collect();
        let hyper = MlpHyper { seed: 9, ..MlpHyper::default() };
        let a = fit_mlp(&f, &ov(&t), &obs, hyper).unwrap();
        let b = fit_mlp(&f, &ov(&t), &obs, hyper).unwrap();
        assert_eq!(a, b);
        for w in a.loss_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-6, "{:?}", a.loss_history);
        }
    }

    #[test]
    fn mlp_tracks_ols_on_a_trend() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64 / 29.0 * 2.0 - 1.0).collect();
        let f = table(&xs.iter().map(std::slice::from_ref).collect::<Vec<_>>());
        let t: Vec<f64> = xs.iter().map(|x| 0.5 + 0.3 * x).collect();
        let obs: Vec<usize> = (0..30).step_by(2).collect();
        let test: Vec<usize> = (1..29).step_by(2).collect();
        let hyper = MlpHyper { epochs: 2000, ..MlpHyper::default() };
        let mlp = fit_mlp(&f, &ov(&t), &obs, hyper).unwrap().predict(&f, &test).unwrap();
        let ols = fit_ols(&f, &ov(&t), &obs).unwrap().predict(&f, &test).unwrap();
        for (a, b) in mlp.iter().zip(&ols) {
            assert!((a - b).abs() < 0.1);
        }
        assert!(mlp.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn mlp_divergence_is_reported() {
        let f = table(&[&[50.0], &[-50.0], &[30.0]]);
        let hyper = MlpHyper { learning_rate: 50.0, ..MlpHyper::default() };
        let r = fit_mlp(&f, &ov(&[1.0, 0.0, 1.0]), &[0, 1, 2], hyper);
        assert!(matches!(r, Err(Error::Diverged(_))), "{r:?}");
    }
}
