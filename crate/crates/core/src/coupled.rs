//! The retraining loop: platform predictions shift initial opinions, peers
//! interact for `K` steps, and the platform refits on what it observes.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{OpinionVector, PsiOperator, SusceptibilityProfile};
use crate::error::{check_len, Error, Result};
use crate::learn::{fit_mlp, fit_ols, FeatureTable, MlpHyper};
use crate::policy::AffinePolicy;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_T_MAX: usize = 30;
/// Errors below this are treated as exact convergence by [`estimate_rate`].
pub const ERROR_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Ols,
    Mlp(MlpHyper),
}

/// A model refit from scratch on the observed nodes every round.
///
/// Observed nodes are predicted by their observed opinion; the model fills in
/// the unobserved ones.
#[derive(Debug, Clone)]
pub struct LearnedPolicy {
    pub kind: LearnerKind,
    pub features: FeatureTable,
    pub observed: Vec<usize>,
}

impl LearnedPolicy {
    fn predict_all(&self, x: &OpinionVector, round: usize, seed: u64) -> Result<DVector<f64>> {
        let model = match self.kind {
            LearnerKind::Ols => fit_ols(&self.features, x, &self.observed)?,
            LearnerKind::Mlp(hyper) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(round as u64);
                let hyper = MlpHyper {
                    seed: rand::Rng::random(&mut rng),
                    ..hyper
                };
                fit_mlp(&self.features, x, &self.observed, hyper)?
            }
        };
        let mut is_obs = vec![false; x.len()];
        for &i in &self.observed {
            is_obs[i] = true;
        }
        let hidden: Vec<usize> = (0..x.len()).filter(|&i| !is_obs[i]).collect();
        let mut f = x.as_dvector().clone();
        for (i, v) in hidden.iter().zip(model.predict(&self.features, &hidden)?) {
            f[*i] = v;
        }
        Ok(f)
    }
}

#[derive(Debug, Clone)]
pub enum LoopPolicy {
    Affine(AffinePolicy),
    Learned(LearnedPolicy),
}

impl From<AffinePolicy> for LoopPolicy {
    fn from(p: AffinePolicy) -> Self {
        LoopPolicy::Affine(p)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recording {
    /// Every round's vectors are kept.
    #[default]
    Full,
    /// Only residuals, summary statistics and the last round.
    Thin,
}

#[derive(Debug, Clone)]
pub struct LoopConfig {
    pub x_star: OpinionVector,
    pub profile: SusceptibilityProfile,
    pub psi: PsiOperator,
    pub policy: LoopPolicy,
    pub t_max: usize,
    pub tol: f64,
    pub recording: Recording,
    /// Master seed for learned-policy refits.
    pub seed: u64,
}

impl LoopConfig {
    pub fn new(
        x_star: OpinionVector,
        profile: SusceptibilityProfile,
        psi: PsiOperator,
        policy: impl Into<LoopPolicy>,
    ) -> Self {
        Self {
            x_star,
            profile,
            psi,
            policy: policy.into(),
            t_max: DEFAULT_T_MAX,
            tol: DEFAULT_TOL,
            recording: Recording::Full,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.x_star.len();
        check_len(n, self.profile.n())?;
        check_len(n, self.psi.n())?;
        if self.psi.alpha() != self.profile.alpha() {
            return Err(Error::invalid("Psi was built for a different alpha"));
        }
        match &self.policy {
            LoopPolicy::Affine(p) => check_len(n, p.n())?,
            LoopPolicy::Learned(p) => check_len(n, p.features.n())?,
        }
        if self.t_max < 1 || !(self.tol > 0.0) {
            return Err(Error::invalid(format!(
                "t_max={} and tol={} must be positive",
                self.t_max, self.tol
            )));
        }
        Ok(())
    }

    fn algo(&self, x: &OpinionVector, round: usize) -> Result<OpinionVector> {
        match &self.policy {
            LoopPolicy::Affine(p) => p.apply(x),
            LoopPolicy::Learned(p) => OpinionVector::computed(p.predict_all(x, round, self.seed)?),
        }
    }

    /// `(I - L_b) x* + L_b f`.
    pub fn initial_opinions(&self, f: &OpinionVector) -> Result<OpinionVector> {
        check_len(self.x_star.len(), f.len())?;
        let beta = self.profile.beta();
        let x = self.x_star.as_dvector();
        OpinionVector::computed(DVector::from_fn(x.len(), |i, _| {
            (1.0 - beta[i]) * x[i] + beta[i] * f[i]
        }))
    }

    /// One round from predictions `f`: returns `(x_init, x_ex, f_next)`.
    pub fn round(
        &self,
        f: &OpinionVector,
        round: usize,
    ) -> Result<(OpinionVector, OpinionVector, OpinionVector)> {
        let x_init = self.initial_opinions(f)?;
        let x_ex = self.psi.apply(&x_init)?;
        let f_next = self.algo(&x_ex, round)?;
        Ok((x_init, x_ex, f_next))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: usize,
    pub x_init: OpinionVector,
    pub x_ex: OpinionVector,
    /// Predictions `f^(t)` in force during round `t`.
    pub f: OpinionVector,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    /// All rounds under full recording, only the last one under thin.
    pub records: Vec<StepRecord>,
    /// `|f^(t+1) - f^(t)|_inf` for `t = 2..=t_stop`; round 1 is the bootstrap
    /// fit on innate opinions and has no residual.
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub t_stop: usize,
    /// Mean and variance of `x_ex^(t)` for every round.
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    /// Set when a learned policy failed to fit; the run stops there.
    pub diverged: Option<String>,
    pub final_predictions: OpinionVector,
}

impl Trajectory {
    /// `None` only when the bootstrap fit already diverged.
    pub fn last(&self) -> Option<&StepRecord> {
        self.records.last()
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.residuals.last().copied()
    }
}

/// Runs the loop until the prediction residual drops below `tol` or
/// `t_max` rounds have been played.
pub fn run(cfg: &LoopConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let mut records = Vec::new();
    let mut residuals = Vec::new();
    let (mut means, mut vars) = (Vec::new(), Vec::new());
    let mut converged = false;
    let mut diverged = None;
    let mut t = 0;
    let mut f = match cfg.algo(&cfg.x_star, 0) {
        Ok(f) => f,
        Err(Error::Diverged(msg)) => {
            diverged = Some(msg);
            cfg.x_star.clone()
        }
        Err(e) => return Err(e),
    };
    while diverged.is_none() && t < cfg.t_max {
        let (x_init, x_ex, f_next) = match cfg.round(&f, t + 1) {
            Ok(r) => r,
            Err(Error::Diverged(msg)) => {
                diverged = Some(msg);
                break;
            }
            Err(e) => return Err(e),
        };
        t += 1;
        means.push(x_ex.mean());
        vars.push(x_ex.variance());
        let record = StepRecord {
            t,
            x_init,
            x_ex,
            f: f.clone(),
        };
        if cfg.recording == Recording::Thin {
            records.clear();
        }
        records.push(record);
        if t >= 2 {
            let r = (f_next.as_dvector() - f.as_dvector()).amax();
            residuals.push(r);
            converged = r < cfg.tol;
        }
        f = f_next;
        if converged {
            break;
        }
    }
    Ok(Trajectory {
        records,
        residuals,
        converged,
        t_stop: t,
        mean: means,
        var: vars,
        diverged,
        final_predictions: f,
    })
}

/// Whether the last residual is below `tol`, and that residual.
pub fn detect_stability(tr: &Trajectory, tol: f64) -> (bool, f64) {
    match tr.final_residual() {
        Some(r) => (r < tol, r),
        None => (false, f64::INFINITY),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateEstimate {
    /// `exp(slope)` of the log-error fit; above 1 means divergence.
    pub c_hat: f64,
    /// First and last round used in the fit.
    pub window: (usize, usize),
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum RateOutcome {
    Fitted(RateEstimate),
    /// The error fell below the floor at this round and stayed there.
    ExactConvergence { step: usize },
    /// Fewer than four rounds in the window are above the floor.
    Insufficient { usable: usize },
}

/// Fits `ln |x_ex^(t) - x_ps|_2` against `t` by least squares after dropping
/// the first 20% of rounds and every round whose error is below
/// [`ERROR_FLOOR`]. Needs a fully recorded trajectory.
pub fn estimate_rate(tr: &Trajectory, x_ps: &OpinionVector) -> Result<RateOutcome> {
    if tr.records.len() != tr.t_stop {
        return Err(Error::invalid("rate estimation needs a fully recorded trajectory"));
    }
    let errors: Vec<(usize, f64)> = tr
        .records
        .iter()
        .map(|r| {
            check_len(x_ps.len(), r.x_ex.len())?;
            Ok((r.t, (r.x_ex.as_dvector() - x_ps.as_dvector()).norm()))
        })
        .collect::<Result<_>>()?;
    let skip = errors.len() / 5;
    let usable: Vec<(f64, f64)> = errors[skip..]
        .iter()
        .filter(|(_, e)| *e >= ERROR_FLOOR)
        .map(|&(t, e)| (t as f64, e.ln()))
        .collect();
    if usable.len() < 4 {
        let exact = errors
            .iter()
            .position(|(_, e)| *e < ERROR_FLOOR)
            .filter(|&p| errors[p..].iter().all(|(_, e)| *e < ERROR_FLOOR));
        return Ok(match exact {
            Some(p) => RateOutcome::ExactConvergence { step: errors[p].0 },
            None => RateOutcome::Insufficient {
                usable: usable.len(),
            },
        });
    }
    let k = usable.len() as f64;
    let (mx, my) = (
        usable.iter().map(|p| p.0).sum::<f64>() / k,
        usable.iter().map(|p| p.1).sum::<f64>() / k,
    );
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = usable.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateOutcome::Fitted(RateEstimate {
        c_hat: slope.exp(),
        window: (usable[0].0 as usize, usable[usable.len() - 1].0 as usize),
        r2,
    }))
}
