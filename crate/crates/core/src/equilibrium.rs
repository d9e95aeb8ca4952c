//! Performatively stable points in closed form, and the diagnostics built on
//! them: spectral decompositions, sweeps, consensus values, steering.

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{
    mean, psi_operator, Horizon, OpinionVector, PsiOperator,
    SusceptibilityProfile,
};
use crate::error::{check_len, Error, Result};
use crate::graph::{check_properties, influence_matrix, Graph, InfluenceMatrix};
use crate::policy::{mean_estimation_policy, perfect_policy, AffinePolicy};

/// Spectral radii at or above `1 - RHO_MARGIN` are treated as 1.
pub const RHO_MARGIN: f64 = 1e-9;
const RHO_CAP: usize = 10_000;
const RHO_TOL: f64 = 1e-12;
const CONSENSUS_TOL: f64 = 1e-8;
const ITERATIVE_TOL: f64 = 1e-13;
const ITERATIVE_CAP: usize = 100_000;
/// Entries of `Psi L_b M` at or below this are outside its support.
const SUPPORT_EPS: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumMethod {
    /// `x = (I - Psi L_b M)^{-1} Psi ((I - L_b) x* + L_b b)`.
    ClosedForm,
    /// Recurrent classes of `Psi L_b M` take their limit, the rest is solved.
    BlockForm,
    /// The retraining map iterated to a fixed point.
    Iterative,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub x_ps: OpinionVector,
    pub mean: f64,
    pub variance: f64,
    pub spread: f64,
    pub method: EquilibriumMethod,
    /// `|x - Psi((I - L_b) x* + L_b (M x + b))|_inf`.
    pub residual: f64,
    /// The common opinion when the spread is below `1e-8`.
    pub consensus_value: Option<f64>,
}

struct Problem<'a> {
    x_star: &'a OpinionVector,
    beta: &'a DVector<f64>,
    psi: &'a PsiOperator,
    policy: &'a AffinePolicy,
}

impl Problem<'_> {
    /// `Psi((I - L_b) x* + L_b (M x + b))`.
    fn map(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let f = self.policy.apply_raw(x)?;
        let xs = self.x_star.as_dvector();
        let init = DVector::from_fn(x.len(), |i, _| {
            (1.0 - self.beta[i]) * xs[i] + self.beta[i] * f[i]
        });
        self.psi.apply_raw(&init)
    }

    fn report(&self, x: DVector<f64>, method: EquilibriumMethod) -> Result<EquilibriumReport> {
        let residual = (&x - self.map(&x)?).amax();
        let x_ps = OpinionVector::computed(x)?;
        let s = x_ps.spread();
        Ok(EquilibriumReport {
            mean: x_ps.mean(),
            variance: x_ps.variance(),
            spread: s,
            consensus_value: (s < CONSENSUS_TOL).then(|| x_ps.mean()),
            x_ps,
            method,
            residual,
        })
    }
}

/// Upper bound on the spectral radius of a nonnegative matrix: the max row
/// sum, refined by power iteration on `(I + B) / 2` when the bound is not
/// already below `1 - RHO_MARGIN`.
pub fn spectral_radius(b: &DMatrix<f64>) -> f64 {
    let n = b.nrows();
    let row_bound = (0..n).map(|i| b.row(i).sum()).fold(0.0, f64::max);
    if row_bound < 1.0 - RHO_MARGIN {
        return row_bound;
    }
    // The shift keeps every class aperiodic so the iteration settles.
    let shifted = (b + DMatrix::<f64>::identity(n, n)) * 0.5;
    let mut x = DVector::from_element(n, 1.0);
    let mut est = f64::INFINITY;
    for _ in 0..RHO_CAP {
        let y = &shifted * &x;
        let norm = y.amax();
        if norm == 0.0 {
            return 0.0;
        }
        let next = 2.0 * norm / x.amax() - 1.0;
        x = y / norm;
        if (next - est).abs() < RHO_TOL {
            return next.min(row_bound);
        }
        est = next;
    }
    est.min(row_bound)
}

fn lu_solve(a: DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let lu = a.lu();
    let smallest = lu.u().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if smallest < 1e-13 * scale {
        return Err(Error::Singular);
    }
    lu.solve(rhs).ok_or(Error::Singular)
}

/// Period of an irreducible digraph given by adjacency lists.
fn period(adj: &[Vec<usize>]) -> usize {
    let n = adj.len();
    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0]);
    let mut g = 0usize;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                let diff = (level[u] + 1).abs_diff(level[v]);
                g = gcd(g, diff);
            }
        }
    }
    g.max(1)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Stationary distribution of an irreducible stochastic matrix.
fn stationary(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    let m = p.nrows();
    let mut a = DMatrix::<f64>::identity(m, m) - p.transpose();
    a.row_mut(m - 1).fill(1.0);
    let mut rhs = DVector::zeros(m);
    rhs[m - 1] = 1.0;
    lu_solve(a, &rhs)
}

/// Fixed point when `Psi L_b M` has recurrent classes with unit row sums.
///
/// On such a class `C` the retraining map is `x_C <- B_CC x_C`, so the state
/// reached is `lim B_CC^t x_C^(1)` with `x^(1)` the first expressed opinions.
/// The remaining nodes then solve `(I - B_TT) x_T = B_TR x_R + c_T`.
fn block_form(b: &DMatrix<f64>, c: &DVector<f64>, x1: &DVector<f64>) -> Result<Option<DVector<f64>>> {
    let n = b.nrows();
    let mut g = DiGraph::<(), ()>::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if b[(i, j)] > SUPPORT_EPS {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut comp = vec![0usize; n];
    let sccs = tarjan_scc(&g);
    for (k, scc) in sccs.iter().enumerate() {
        for v in scc {
            comp[v.index()] = k;
        }
    }
    let mut recurrent = vec![false; n];
    let mut x = DVector::zeros(n);
    for (k, scc) in sccs.iter().enumerate() {
        let members: Vec<usize> = scc.iter().map(|v| v.index()).collect();
        let closed = members
            .iter()
            .all(|&i| (0..n).all(|j| b[(i, j)] <= SUPPORT_EPS || comp[j] == k));
        let stochastic = members
            .iter()
            .all(|&i| (b.row(i).sum() - 1.0).abs() <= 1e-12);
        if !(closed && stochastic) {
            continue;
        }
        let sub = b.select_rows(&members).select_columns(&members);
        let mut pos = vec![usize::MAX; n];
        for (p, &i) in members.iter().enumerate() {
            pos[i] = p;
        }
        let adj: Vec<Vec<usize>> = members
            .iter()
            .map(|&i| (0..n).filter(|&j| b[(i, j)] > SUPPORT_EPS).map(|j| pos[j]).collect())
            .collect();
        if period(&adj) > 1 {
            return Err(Error::Degenerate(format!(
                "recurrent class of size {} is periodic",
                members.len()
            )));
        }
        let pi = stationary(&sub)?;
        let value: f64 = members.iter().enumerate().map(|(p, &i)| pi[p] * x1[i]).sum();
        for &i in &members {
            recurrent[i] = true;
            x[i] = value;
        }
    }
    if !recurrent.iter().any(|&r| r) {
        return Ok(None);
    }
    let transient: Vec<usize> = (0..n).filter(|&i| !recurrent[i]).collect();
    if !transient.is_empty() {
        let rec: Vec<usize> = (0..n).filter(|&i| recurrent[i]).collect();
        let b_tt = b.select_rows(&transient).select_columns(&transient);
        let b_tr = b.select_rows(&transient).select_columns(&rec);
        let x_r = x.select_rows(&rec);
        let rhs = b_tr * x_r + c.select_rows(&transient);
        let m = transient.len();
        let x_t = lu_solve(DMatrix::identity(m, m) - b_tt, &rhs)?;
        for (p, &i) in transient.iter().enumerate() {
            x[i] = x_t[p];
        }
    }
    Ok(Some(x))
}

/// Stable point of the retraining loop under an affine policy.
///
/// Uses the closed form when `rho(Psi L_b M) < 1 - 1e-9`, the block form when
/// the unit radius comes from recurrent classes, and iteration when `Psi` is
/// matrix-free.
pub fn ps_closed_form(
    x_star: &OpinionVector,
    profile: &SusceptibilityProfile,
    psi: &PsiOperator,
    policy: &AffinePolicy,
) -> Result<EquilibriumReport> {
    let n = x_star.len();
    check_len(n, profile.n())?;
    check_len(n, psi.n())?;
    check_len(n, policy.n())?;
    let problem = Problem {
        x_star,
        beta: profile.beta(),
        psi,
        policy,
    };
    let beta = profile.beta();
    let Some(psi_m) = psi.matrix() else {
        return iterate_fixed_point(&problem);
    };
    // B = Psi L_b M and c = Psi((I - L_b) x* + L_b b)
    let mut scaled_m = policy.matrix();
    for i in 0..n {
        scaled_m.row_mut(i).scale_mut(beta[i]);
    }
    let b = psi_m * scaled_m;
    let xs = x_star.as_dvector();
    let offset = policy.offset();
    let c = psi_m * DVector::from_fn(n, |i, _| (1.0 - beta[i]) * xs[i] + beta[i] * offset[i]);

    if spectral_radius(&b) < 1.0 - RHO_MARGIN {
        let x = lu_solve(DMatrix::identity(n, n) - &b, &c)?;
        return problem.report(x, EquilibriumMethod::ClosedForm);
    }
    // the first expressed state, reached from f^(1) = M x* + b
    let x1 = problem.map(xs)?;
    match block_form(&b, &c, &x1)? {
        Some(x) => problem.report(x, EquilibriumMethod::BlockForm),
        None => {
            let x = lu_solve(DMatrix::identity(n, n) - &b, &c).map_err(|_| {
                Error::Degenerate("spectral radius 1 without a recurrent class".into())
            })?;
            problem.report(x, EquilibriumMethod::ClosedForm)
        }
    }
}

fn iterate_fixed_point(problem: &Problem) -> Result<EquilibriumReport> {
    let mut x = problem.map(problem.x_star.as_dvector())?;
    for _ in 0..ITERATIVE_CAP {
        let next = problem.map(&x)?;
        let change = (&next - &x).amax();
        x = next;
        if change < ITERATIVE_TOL {
            return problem.report(x, EquilibriumMethod::Iterative);
        }
    }
    Err(Error::NoConvergence {
        what: "retraining fixed point",
        iterations: ITERATIVE_CAP,
    })
}

/// Which convergence-rate regime applies to perfect prediction.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum RateCase {
    /// All `beta_i < 1`: the rate is of order `max beta`.
    AllBelowOne { max_beta: f64 },
    /// Some `beta_i = 1` but `rho(Psi L_b) < 1`: the rate is that radius.
    UnitBetaContracting { rho: f64 },
    /// `rho(Psi L_b) = 1`: the rate is the largest sub-unit eigenvalue
    /// modulus, or `None` when there is no sub-unit mode.
    UnitRadius { c: Option<f64> },
}

pub fn convergence_case(profile: &SusceptibilityProfile, psi: &PsiOperator) -> Result<RateCase> {
    check_len(profile.n(), psi.n())?;
    let beta = profile.beta();
    if beta.iter().all(|&b| b < 1.0) {
        return Ok(RateCase::AllBelowOne {
            max_beta: profile.max_beta(),
        });
    }
    let mut b = psi.require_dense()?.clone();
    for j in 0..b.ncols() {
        b.column_mut(j).scale_mut(beta[j]);
    }
    let rho = spectral_radius(&b);
    if rho < 1.0 - RHO_MARGIN {
        return Ok(RateCase::UnitBetaContracting { rho });
    }
    let c = b
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .filter(|m| *m < 1.0 - RHO_MARGIN)
        .fold(None, |acc: Option<f64>, m| Some(acc.map_or(m, |a| a.max(m))));
    Ok(RateCase::UnitRadius { c })
}

/// Left eigenvector of `Psi` for eigenvalue 1, normalized to sum 1.
pub fn left_perron(psi: &PsiOperator) -> Result<DVector<f64>> {
    stationary(psi.require_dense()?).map_err(|_| {
        Error::Degenerate("Psi has more than one recurrent class; y is not unique".into())
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub alpha: f64,
    pub beta: f64,
    pub horizon: Horizon,
    /// Eigenvalues of `W`, descending.
    pub mu: Vec<f64>,
    /// Eigenvalues of `Psi_K` in the same order.
    pub lambda: Vec<f64>,
    /// Orthonormal eigenvectors as columns; the first is `1 / sqrt(n)`.
    #[serde(skip)]
    pub v: DMatrix<f64>,
    /// Left Perron vector of `Psi_K`; uniform for regular graphs.
    pub y: Vec<f64>,
    /// `lambda_i / (1 - beta lambda_i)`; the first equals `1 / (1 - beta)`.
    pub coefficients: Vec<f64>,
}

/// Eigenvalue of `Psi_K` belonging to eigenvalue `mu` of `W` under a
/// homogeneous `alpha`.
pub fn psi_eigenvalue(mu: f64, alpha: f64, horizon: Horizon) -> f64 {
    let fj = (1.0 - alpha) / (1.0 - alpha * mu);
    match horizon {
        Horizon::Infinite => fj,
        Horizon::Finite(k) => fj + (1.0 - fj) * (alpha * mu).powi(k as i32),
    }
}

pub fn spectral_decomposition(
    g: &Graph,
    alpha: f64,
    beta: f64,
    horizon: Horizon,
) -> Result<SpectralReport> {
    let props = check_properties(g);
    if !props.regular {
        return Err(Error::NotRegular);
    }
    if !props.connected {
        return Err(Error::Disconnected);
    }
    if !(alpha > 0.0 && alpha < 1.0) || !(0.0..1.0).contains(&beta) {
        return Err(Error::invalid(format!(
            "need alpha in (0,1) and beta in [0,1), got {alpha}, {beta}"
        )));
    }
    let n = g.n();
    let w = influence_matrix(g)?.to_dense()?;
    let eig = nalgebra::SymmetricEigen::new(w);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mu: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut v = eig.eigenvectors.select_columns(&order);
    if v.column(0).sum() < 0.0 {
        v.column_mut(0).neg_mut();
    }
    let lambda: Vec<f64> = mu.iter().map(|&m| psi_eigenvalue(m, alpha, horizon)).collect();
    let coefficients = lambda.iter().map(|l| l / (1.0 - beta * l)).collect();
    Ok(SpectralReport {
        alpha,
        beta,
        horizon,
        mu,
        lambda,
        v,
        y: vec![1.0 / n as f64; n],
        coefficients,
    })
}

/// `x_PS = sum_i (1 - beta) lambda_i / (1 - beta lambda_i) v_i v_i^T x*`.
pub fn reconstruct_from_spectrum(
    report: &SpectralReport,
    x_star: &OpinionVector,
    beta: f64,
) -> Result<OpinionVector> {
    check_len(report.v.nrows(), x_star.len())?;
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::invalid(format!(
            "beta = {beta}: the consensus coefficient is singular at 1"
        )));
    }
    let proj = report.v.transpose() * x_star.as_dvector();
    let scaled = DVector::from_fn(proj.len(), |i, _| {
        let l = report.lambda[i];
        (1.0 - beta) * l / (1.0 - beta * l) * proj[i]
    });
    OpinionVector::computed(&report.v * scaled)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    /// `"beta"` or `"alpha"`; also the first CSV column name.
    pub parameter: String,
    pub rows: Vec<SweepRow>,
    /// Regular graph with homogeneous parameters, where the variance is
    /// known to decrease along the grid.
    pub monotone_guaranteed: bool,
}

impl SweepTable {
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([self.parameter.as_str(), "mean", "variance"])?;
        for r in &self.rows {
            w.write_record([r.value.to_string(), r.mean.to_string(), r.variance.to_string()])?;
        }
        w.flush().map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn strictly_decreasing_variance(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].variance < w[0].variance)
    }
}

fn homogeneous(v: &DVector<f64>) -> bool {
    v.iter().all(|&a| a == v[0])
}

/// Perfect-prediction equilibria along a grid of homogeneous `beta`.
pub fn variance_sweep(
    x_star: &OpinionVector,
    g: &Graph,
    alpha: &DVector<f64>,
    betas: &[f64],
    horizon: Horizon,
) -> Result<SweepTable> {
    let n = g.n();
    check_len(n, x_star.len())?;
    let w = influence_matrix(g)?;
    let base = SusceptibilityProfile::from_dvectors(alpha.clone(), DVector::zeros(n))?;
    let psi = psi_operator(&base, &w, horizon)?;
    let policy = perfect_policy(n)?;
    let rows = betas
        .par_iter()
        .map(|&b| {
            let prof = base.with_beta(DVector::from_element(n, b))?;
            let rep = ps_closed_form(x_star, &prof, &psi, &policy)?;
            Ok(SweepRow {
                value: b,
                mean: rep.mean,
                variance: rep.variance,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        parameter: "beta".into(),
        rows,
        monotone_guaranteed: check_properties(g).regular && homogeneous(alpha),
    })
}

/// Perfect-prediction equilibria along a grid of homogeneous `alpha` at
/// fixed homogeneous `beta`.
pub fn alpha_sweep(
    x_star: &OpinionVector,
    g: &Graph,
    alphas: &[f64],
    beta: f64,
    horizon: Horizon,
) -> Result<SweepTable> {
    let n = g.n();
    check_len(n, x_star.len())?;
    let w = influence_matrix(g)?;
    let policy = perfect_policy(n)?;
    let rows = alphas
        .par_iter()
        .map(|&a| {
            let prof = SusceptibilityProfile::uniform(n, a, beta)?;
            let psi = psi_operator(&prof, &w, horizon)?;
            let rep = ps_closed_form(x_star, &prof, &psi, &policy)?;
            Ok(SweepRow {
                value: a,
                mean: rep.mean,
                variance: rep.variance,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable {
        parameter: "alpha".into(),
        rows,
        monotone_guaranteed: check_properties(g).regular,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusLimit {
    /// `sum y_i r_i x*_i / sum y_i r_i`, equal to `y^T x*` for equal ratios.
    pub value: f64,
    pub y: Vec<f64>,
    /// `(delta, spread of x_PS at beta_i = 1 - delta r_i)` for
    /// `delta = 0.1, 0.01, 0.001`.
    pub spreads: Vec<(f64, f64)>,
    /// Mean of `x_PS` at the smallest `delta`.
    pub approach: f64,
    pub spread_decreasing: bool,
    /// Whether every `alpha_i` lies strictly inside `(0, 1)`.
    pub precondition_met: bool,
}

/// Consensus value as platform susceptibility tends to 1 along
/// `beta_i = 1 - delta r_i`, with a check on the grid of `delta`.
pub fn consensus_limit(
    x_star: &OpinionVector,
    ratios: &DVector<f64>,
    psi: &PsiOperator,
) -> Result<ConsensusLimit> {
    let n = x_star.len();
    check_len(n, psi.n())?;
    check_len(n, ratios.len())?;
    if ratios.iter().any(|&r| !(r > 0.0 && r <= 10.0)) {
        return Err(Error::invalid("ratios must lie in (0, 10]"));
    }
    let y = left_perron(psi)?;
    let yr = y.component_mul(ratios);
    let value = yr.dot(x_star.as_dvector()) / yr.sum();
    let policy = perfect_policy(n)?;
    let mut spreads = Vec::new();
    let mut approach = f64::NAN;
    for delta in [0.1, 0.01, 0.001] {
        let beta = ratios.map(|r| (1.0 - delta * r).max(0.0));
        let prof = SusceptibilityProfile::from_dvectors(psi.alpha().clone(), beta)?;
        let rep = ps_closed_form(x_star, &prof, psi, &policy)?;
        spreads.push((delta, rep.spread));
        approach = rep.mean;
    }
    Ok(ConsensusLimit {
        value,
        y: y.iter().copied().collect(),
        spread_decreasing: spreads.windows(2).all(|w| w[1].1 < w[0].1),
        spreads,
        approach,
        precondition_met: psi.alpha().iter().all(|&a| a > 0.0 && a < 1.0),
    })
}

/// Stable point under mean estimation on the observed set.
pub fn mean_estimation_equilibrium(
    x_star: &OpinionVector,
    profile: &SusceptibilityProfile,
    psi: &PsiOperator,
    observed: &[usize],
) -> Result<EquilibriumReport> {
    let policy = mean_estimation_policy(observed, x_star.len())?;
    ps_closed_form(x_star, profile, psi, &policy)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spillover {
    pub base: EquilibriumReport,
    pub perturbed: EquilibriumReport,
    /// Per-node change of `x_PS`.
    pub change: Vec<f64>,
}

/// Mean-estimation equilibria before and after shifting the innate opinion
/// of node `node` by `delta`.
pub fn spillover(
    x_star: &OpinionVector,
    profile: &SusceptibilityProfile,
    psi: &PsiOperator,
    observed: &[usize],
    node: usize,
    delta: f64,
) -> Result<Spillover> {
    if node >= x_star.len() {
        return Err(Error::invalid(format!("node {node} out of range")));
    }
    let mut shifted = x_star.to_vec();
    shifted[node] += delta;
    let shifted = OpinionVector::new(shifted)?;
    let base = mean_estimation_equilibrium(x_star, profile, psi, observed)?;
    let perturbed = mean_estimation_equilibrium(&shifted, profile, psi, observed)?;
    let change = (perturbed.x_ps.as_dvector() - base.x_ps.as_dvector())
        .iter()
        .copied()
        .collect();
    Ok(Spillover {
        base,
        perturbed,
        change,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteeringReport {
    pub n: usize,
    pub psi1: f64,
    pub psi2: f64,
    /// Steered node first, then the platform-immune node, then the rest.
    pub x_ps: Vec<f64>,
    pub delta_l: f64,
    pub mean: f64,
}

/// Steering on the complete graph with `K = inf`, homogeneous `alpha`,
/// all-zero innate opinions, node 0 steered to `s` with susceptibility
/// `beta_j`, node 1 immune to the platform and every other node at `gamma`.
pub fn steering_closed_form(
    n: usize,
    alpha: f64,
    beta_j: f64,
    gamma: f64,
    s: f64,
) -> Result<SteeringReport> {
    if n < 2 {
        return Err(Error::invalid("steering needs at least two nodes"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha = {alpha} outside (0, 1)")));
    }
    for (name, v) in [("beta_j", beta_j), ("gamma", gamma), ("s", s)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!("{name} = {v} outside [0, 1]")));
        }
    }
    let nf = n as f64;
    let psi1 = (1.0 - alpha) * (nf - 1.0) / (nf - 1.0 + alpha);
    let psi2 = alpha / (nf - 1.0 + alpha);
    let den = 1.0 - gamma + 2.0 * gamma * psi2;
    let bs = beta_j * s;
    let on_j = bs * (1.0 - gamma + gamma * psi2) * psi1 / den;
    let on_l = bs * gamma * psi1 * psi2 / den;
    let common = bs * psi2 / den;
    let mut x = vec![common; n];
    x[0] += on_j;
    x[1] -= on_l;
    let baseline_l = bs * psi2;
    Ok(SteeringReport {
        n,
        psi1,
        psi2,
        delta_l: x[1] - baseline_l,
        mean: bs * (1.0 - gamma * psi1) / (nf * den),
        x_ps: x,
    })
}

/// Consensus value of the loop with `alpha = 1` and `K = inf` on a regular,
/// non-bipartite graph: `sum (1 - beta_i) x*_i / (n - sum beta_i)`, or the
/// plain mean when every `beta_i = 1`.
pub fn degroot_consensus_value(
    x_star: &OpinionVector,
    beta: &DVector<f64>,
    w: &InfluenceMatrix,
) -> Result<f64> {
    check_len(w.n(), x_star.len())?;
    check_len(w.n(), beta.len())?;
    let props = w.properties();
    if !props.connected {
        return Err(Error::Disconnected);
    }
    if props.bipartite {
        return Err(Error::Bipartite);
    }
    if !props.regular {
        return Err(Error::NotRegular);
    }
    let n = w.n() as f64;
    let sum_beta = beta.sum();
    if n - sum_beta < 1e-15 {
        return Ok(mean(x_star.as_slice()));
    }
    let num: f64 = beta
        .iter()
        .zip(x_star.as_slice())
        .map(|(b, x)| (1.0 - b) * x)
        .sum();
    Ok(num / (n - sum_beta))
}

/// `|L_b|_2 |Psi_K|_2`.
pub fn sensitivity(profile: &SusceptibilityProfile, psi: &PsiOperator) -> Result<f64> {
    check_len(profile.n(), psi.n())?;
    let max_beta = profile.max_beta();
    if max_beta == 0.0 {
        return Ok(0.0);
    }
    let sigma = psi
        .require_dense()?
        .singular_values()
        .iter()
        .fold(0.0, |m: f64, v| m.max(*v));
    Ok(max_beta * sigma)
}
