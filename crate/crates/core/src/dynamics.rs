//! Friedkin-Johnsen and DeGroot peer dynamics, and the operator `Psi_K` that
//! maps initial opinions to expressed opinions after `K` peer steps.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_len, Error, Result};
use crate::graph::{InfluenceMatrix, DENSE_LIMIT};

/// Convergence threshold and cap for the iterative fallbacks.
const ITER_TOL: f64 = 1e-10;
const ITER_CAP: usize = 1_000_000;

/// Opinions of all nodes, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OpinionVector(DVector<f64>);

impl OpinionVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::from_dvector(DVector::from_vec(values))
    }

    pub fn from_dvector(v: DVector<f64>) -> Result<Self> {
        if let Some(x) = v.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("opinion vector ({x})")));
        }
        if let Some(x) = v.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::invalid(format!("opinion {x} outside [0, 1]")));
        }
        Ok(Self(v))
    }

    /// Wraps a computed vector, removing floating-point excursions past the
    /// unit interval. Anything further out than `1e-8` is a bug upstream.
    pub(crate) fn computed(mut v: DVector<f64>) -> Result<Self> {
        for x in v.iter_mut() {
            if !x.is_finite() {
                return Err(Error::NonFinite("computed opinions".into()));
            }
            debug_assert!(*x > -1e-8 && *x < 1.0 + 1e-8, "opinion {x} escaped [0, 1]");
            *x = x.clamp(0.0, 1.0);
        }
        Ok(Self(v))
    }

    pub fn uniform(n: usize, c: f64) -> Result<Self> {
        Self::new(vec![c; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_dvector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.iter().copied().collect()
    }

    pub fn mean(&self) -> f64 {
        mean(self.as_slice())
    }

    pub fn variance(&self) -> f64 {
        variance(self.as_slice())
    }

    pub fn spread(&self) -> f64 {
        spread(self.as_slice())
    }
}

impl std::ops::Index<usize> for OpinionVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Serialize for OpinionVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.0.iter())
    }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population variance `(1/n) sum (x_i - mean)^2`.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

/// `max - min`.
pub fn spread(x: &[f64]) -> f64 {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        });
    hi - lo
}

fn check_unit(name: &str, v: &DVector<f64>) -> Result<()> {
    match v.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        Some(x) => Err(Error::invalid(format!("{name} entry {x} outside [0, 1]"))),
        None => Ok(()),
    }
}

/// Per-node peer susceptibility `alpha` and platform susceptibility `beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct SusceptibilityProfile {
    alpha: DVector<f64>,
    beta: DVector<f64>,
}

impl SusceptibilityProfile {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        Self::from_dvectors(DVector::from_vec(alpha), DVector::from_vec(beta))
    }

    pub fn from_dvectors(alpha: DVector<f64>, beta: DVector<f64>) -> Result<Self> {
        check_len(alpha.len(), beta.len())?;
        check_unit("alpha", &alpha)?;
        check_unit("beta", &beta)?;
        Ok(Self { alpha, beta })
    }

    pub fn uniform(n: usize, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(vec![alpha; n], vec![beta; n])
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    pub fn with_beta(&self, beta: DVector<f64>) -> Result<Self> {
        Self::from_dvectors(self.alpha.clone(), beta)
    }

    pub fn max_beta(&self) -> f64 {
        self.beta.max()
    }
}

/// Number of peer steps between retraining rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Finite(usize),
    Infinite,
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Horizon::Finite(k) => write!(f, "{k}"),
            Horizon::Infinite => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for Horizon {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "inf" {
            return Ok(Horizon::Infinite);
        }
        s.parse()
            .map(Horizon::Finite)
            .map_err(|_| Error::invalid(format!("horizon {s:?} is neither a count nor \"inf\"")))
    }
}

impl Serialize for Horizon {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Horizon::Finite(k) => s.serialize_u64(*k as u64),
            Horizon::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Horizon {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(usize),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(k) => Ok(Horizon::Finite(k)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

fn fj_step_raw(
    x: &DVector<f64>,
    x_init: &DVector<f64>,
    alpha: &DVector<f64>,
    w: &InfluenceMatrix,
) -> DVector<f64> {
    let wx = w.apply(x);
    DVector::from_iterator(
        x.len(),
        (0..x.len()).map(|i| (1.0 - alpha[i]) * x_init[i] + alpha[i] * wx[i]),
    )
}

fn check_dims(x: &OpinionVector, profile: &SusceptibilityProfile, w: &InfluenceMatrix) -> Result<()> {
    check_len(w.n(), x.len())?;
    check_len(w.n(), profile.n())
}

/// One step `x' = (I - L_a) x_init + L_a W x`.
pub fn fj_step(
    x_k: &OpinionVector,
    x_init: &OpinionVector,
    profile: &SusceptibilityProfile,
    w: &InfluenceMatrix,
) -> Result<OpinionVector> {
    check_dims(x_k, profile, w)?;
    check_len(w.n(), x_init.len())?;
    OpinionVector::computed(fj_step_raw(&x_k.0, &x_init.0, &profile.alpha, w))
}

fn fj_iterate_raw(
    x_init: &DVector<f64>,
    alpha: &DVector<f64>,
    w: &InfluenceMatrix,
    k: usize,
) -> DVector<f64> {
    let mut x = x_init.clone();
    for _ in 0..k {
        x = fj_step_raw(&x, x_init, alpha, w);
    }
    x
}

/// `k` steps starting from `x_0 = x_init`.
pub fn fj_iterate(
    x_init: &OpinionVector,
    profile: &SusceptibilityProfile,
    w: &InfluenceMatrix,
    k: usize,
) -> Result<OpinionVector> {
    check_dims(x_init, profile, w)?;
    OpinionVector::computed(fj_iterate_raw(&x_init.0, &profile.alpha, w, k))
}

fn fj_until_converged(
    x_init: &DVector<f64>,
    alpha: &DVector<f64>,
    w: &InfluenceMatrix,
) -> Result<DVector<f64>> {
    let mut x = x_init.clone();
    for _ in 0..ITER_CAP {
        let next = fj_step_raw(&x, x_init, alpha, w);
        let change = (&next - &x).amax();
        x = next;
        if change < ITER_TOL {
            return Ok(x);
        }
    }
    Err(Error::NoConvergence {
        what: "Friedkin-Johnsen iteration",
        iterations: ITER_CAP,
    })
}

/// Nodes with `alpha > 0` (the ones that are actually solved for) and the
/// LU-factored block `I - L_a W` restricted to them.
struct AnchoredBlock {
    active: Vec<usize>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl AnchoredBlock {
    fn build(alpha: &DVector<f64>, w: &InfluenceMatrix) -> Result<Option<Self>> {
        let n = w.n();
        let active: Vec<usize> = (0..n).filter(|&i| alpha[i] > 0.0).collect();
        let mut pos = vec![usize::MAX; n];
        for (p, &i) in active.iter().enumerate() {
            pos[i] = p;
        }
        let m = active.len();
        let mut a = DMatrix::<f64>::identity(m, m);
        for (p, &i) in active.iter().enumerate() {
            let (nb, wi) = w.row(i);
            for &j in nb {
                if pos[j] != usize::MAX {
                    a[(p, pos[j])] -= alpha[i] * wi;
                }
            }
        }
        let lu = a.lu();
        let u = lu.u();
        let smallest = u.diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        if m > 0 && smallest < 1e-12 {
            return Ok(None);
        }
        Ok(Some(Self { active, lu }))
    }

    /// Right-hand side coupling for one column of initial opinions.
    fn rhs(&self, x_init: &DVector<f64>, alpha: &DVector<f64>, w: &InfluenceMatrix) -> DVector<f64> {
        DVector::from_iterator(
            self.active.len(),
            self.active.iter().map(|&i| {
                let (nb, wi) = w.row(i);
                let fixed: f64 = nb.iter().filter(|&&j| alpha[j] == 0.0).map(|&j| x_init[j]).sum();
                (1.0 - alpha[i]) * x_init[i] + alpha[i] * wi * fixed
            }),
        )
    }

    fn solve(
        &self,
        x_init: &DVector<f64>,
        alpha: &DVector<f64>,
        w: &InfluenceMatrix,
    ) -> Result<DVector<f64>> {
        if self.active.is_empty() {
            return Ok(x_init.clone());
        }
        let sol = self
            .lu
            .solve(&self.rhs(x_init, alpha, w))
            .ok_or(Error::Singular)?;
        let mut x = x_init.clone();
        for (p, &i) in self.active.iter().enumerate() {
            x[i] = sol[p];
        }
        Ok(x)
    }
}

fn require_anchor(alpha: &DVector<f64>) -> Result<()> {
    if alpha.iter().all(|&a| a == 1.0) {
        Err(Error::NoAnchor)
    } else {
        Ok(())
    }
}

/// Limit of the FJ iteration, `(I - L_a W)^{-1} (I - L_a) x_init`.
///
/// Nodes with `alpha = 0` keep their initial opinion; the rest are solved
/// densely. When that block is singular (a fully susceptible part of the graph
/// with no anchor) the iteration is run to convergence instead.
pub fn fj_equilibrium(
    x_init: &OpinionVector,
    profile: &SusceptibilityProfile,
    w: &InfluenceMatrix,
) -> Result<OpinionVector> {
    check_dims(x_init, profile, w)?;
    require_anchor(&profile.alpha)?;
    let x = if w.n() <= DENSE_LIMIT {
        match AnchoredBlock::build(&profile.alpha, w)? {
            Some(block) => block.solve(&x_init.0, &profile.alpha, w)?,
            None => fj_until_converged(&x_init.0, &profile.alpha, w)?,
        }
    } else {
        fj_until_converged(&x_init.0, &profile.alpha, w)?
    };
    OpinionVector::computed(x)
}

/// Consensus reached by repeated neighbor averaging: `(y^T x_init) 1` with
/// `y = d / sum(d)`.
pub fn degroot_equilibrium(x_init: &OpinionVector, w: &InfluenceMatrix) -> Result<OpinionVector> {
    check_len(w.n(), x_init.len())?;
    let y = degroot_weights(w)?;
    let c = y.dot(&x_init.0);
    OpinionVector::computed(DVector::from_element(w.n(), c))
}

fn degroot_weights(w: &InfluenceMatrix) -> Result<DVector<f64>> {
    let props = w.properties();
    if !props.connected {
        return Err(Error::Disconnected);
    }
    if props.bipartite {
        return Err(Error::Bipartite);
    }
    Ok(w.degree_distribution())
}

/// How a [`PsiOperator`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiMethod {
    /// `Psi_{k+1} = (I - L_a) + L_a W Psi_k` from `Psi_0 = I`.
    Recursion,
    /// Dense solve on the block of nodes with `alpha > 0`.
    BlockSolve,
    /// Recursion iterated until the matrix stops changing.
    Iterative,
    /// `1 y^T` for a primitive `W` and `alpha = 1`.
    DeGrootLimit,
    /// Never materialized; applied by running the peer dynamics.
    MatrixFree,
}

#[derive(Debug, Clone)]
enum Repr {
    Dense(DMatrix<f64>),
    Steps(usize),
    Equilibrium,
    Consensus(DVector<f64>),
}

/// The linear map from initial to expressed opinions after `K` peer steps.
#[derive(Debug, Clone)]
pub struct PsiOperator {
    horizon: Horizon,
    alpha: DVector<f64>,
    w: InfluenceMatrix,
    repr: Repr,
    method: PsiMethod,
}

fn dense_recursion(alpha: &DVector<f64>, w: &InfluenceMatrix, k: usize) -> DMatrix<f64> {
    let n = w.n();
    let mut psi = DMatrix::<f64>::identity(n, n);
    for _ in 0..k {
        psi = recursion_step(&psi, alpha, w);
    }
    psi
}

fn recursion_step(psi: &DMatrix<f64>, alpha: &DVector<f64>, w: &InfluenceMatrix) -> DMatrix<f64> {
    let mut next = w.mul_dense(psi);
    for i in 0..w.n() {
        next.row_mut(i).scale_mut(alpha[i]);
        next[(i, i)] += 1.0 - alpha[i];
    }
    next
}

fn dense_infinite(alpha: &DVector<f64>, w: &InfluenceMatrix) -> Result<(DMatrix<f64>, PsiMethod)> {
    let n = w.n();
    if let Some(block) = AnchoredBlock::build(alpha, w)? {
        let mut psi = DMatrix::<f64>::identity(n, n);
        for col in 0..n {
            let e = DVector::from_fn(n, |i, _| if i == col { 1.0 } else { 0.0 });
            let x = block.solve(&e, alpha, w)?;
            psi.set_column(col, &x);
        }
        return Ok((psi, PsiMethod::BlockSolve));
    }
    let mut psi = DMatrix::<f64>::identity(n, n);
    for _ in 0..ITER_CAP {
        let next = recursion_step(&psi, alpha, w);
        let change = (&next - &psi).amax();
        psi = next;
        if change < ITER_TOL {
            return Ok((psi, PsiMethod::Iterative));
        }
    }
    Err(Error::NoConvergence {
        what: "Psi recursion",
        iterations: ITER_CAP,
    })
}

/// Builds `Psi_K`, dense when `n` is at most [`DENSE_LIMIT`].
///
/// `Psi_0 = I`. For `K = inf` at least one node must have `alpha < 1`.
pub fn psi_operator(
    profile: &SusceptibilityProfile,
    w: &InfluenceMatrix,
    horizon: Horizon,
) -> Result<PsiOperator> {
    check_len(w.n(), profile.n())?;
    if w.n() > DENSE_LIMIT {
        return PsiOperator::matrix_free(profile, w, horizon);
    }
    let alpha = profile.alpha.clone();
    let (m, method) = match horizon {
        Horizon::Finite(k) => (dense_recursion(&alpha, w, k), PsiMethod::Recursion),
        Horizon::Infinite => {
            require_anchor(&alpha)?;
            dense_infinite(&alpha, w)?
        }
    };
    Ok(PsiOperator {
        horizon,
        alpha,
        w: w.clone(),
        repr: Repr::Dense(m),
        method,
    })
}

impl PsiOperator {
    /// `Psi_K` applied by running the peer dynamics; closed forms need
    /// [`psi_operator`] instead.
    pub fn matrix_free(
        profile: &SusceptibilityProfile,
        w: &InfluenceMatrix,
        horizon: Horizon,
    ) -> Result<Self> {
        check_len(w.n(), profile.n())?;
        let repr = match horizon {
            Horizon::Finite(k) => Repr::Steps(k),
            Horizon::Infinite => {
                require_anchor(&profile.alpha)?;
                Repr::Equilibrium
            }
        };
        Ok(Self {
            horizon,
            alpha: profile.alpha.clone(),
            w: w.clone(),
            repr,
            method: PsiMethod::MatrixFree,
        })
    }

    /// Infinite-horizon operator for `alpha = 1`: every input collapses to
    /// the DeGroot consensus.
    pub fn degroot_limit(w: &InfluenceMatrix) -> Result<Self> {
        let y = degroot_weights(w)?;
        let n = w.n();
        let repr = if n <= DENSE_LIMIT {
            Repr::Dense(DMatrix::from_fn(n, n, |_, j| y[j]))
        } else {
            Repr::Consensus(y)
        };
        Ok(Self {
            horizon: Horizon::Infinite,
            alpha: DVector::from_element(n, 1.0),
            w: w.clone(),
            repr,
            method: PsiMethod::DeGrootLimit,
        })
    }

    pub fn n(&self) -> usize {
        self.w.n()
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn method(&self) -> PsiMethod {
        self.method
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn influence(&self) -> &InfluenceMatrix {
        &self.w
    }

    pub fn matrix(&self) -> Option<&DMatrix<f64>> {
        match &self.repr {
            Repr::Dense(m) => Some(m),
            _ => None,
        }
    }

    pub fn require_dense(&self) -> Result<&DMatrix<f64>> {
        self.matrix().ok_or(Error::TooLargeForDense(self.n()))
    }

    /// `Psi_K x` for an arbitrary real vector.
    pub fn apply_raw(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(self.n(), x.len())?;
        Ok(match &self.repr {
            Repr::Dense(m) => m * x,
            Repr::Steps(k) => fj_iterate_raw(x, &self.alpha, &self.w, *k),
            Repr::Equilibrium => fj_until_converged(x, &self.alpha, &self.w)?,
            Repr::Consensus(y) => DVector::from_element(self.n(), y.dot(x)),
        })
    }

    pub fn apply(&self, x: &OpinionVector) -> Result<OpinionVector> {
        OpinionVector::computed(self.apply_raw(&x.0)?)
    }
}
