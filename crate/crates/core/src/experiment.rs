//! JSON-configured experiments: build a network, susceptibilities, innate
//! opinions and a policy from a seed, run the retraining loop, and write the
//! results as CSV/JSON for plotting.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::seq::index::sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::coupled::{run, LearnedPolicy, LearnerKind, LoopConfig, LoopPolicy, Recording, Trajectory};
use crate::dynamics::{psi_operator, Horizon, OpinionVector, PsiOperator, SusceptibilityProfile};
use crate::equilibrium::{
    alpha_sweep, ps_closed_form, steering_closed_form, variance_sweep, EquilibriumReport,
    SweepTable,
};
use crate::error::{Error, Result};
use crate::generators::{complete, generate_network, NetworkSpec};
use crate::graph::{
    influence_matrix, largest_connected_component, load_edge_list, sample_connected_subgraph,
    Graph, IsolatedPolicy, DENSE_LIMIT,
};
use crate::learn::{FeatureTable, MlpHyper};
use crate::policy::{
    mean_estimation_policy, perfect_policy, steering_policy, steering_policy_multi, AffinePolicy,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSource {
    EdgeList {
        path: PathBuf,
        #[serde(default)]
        isolated: IsolatedPolicy,
        /// Keep only a seeded connected sample of this many nodes.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sample: Option<usize>,
    },
    Generator(NetworkSpec),
}

/// How a per-node parameter in `[0, 1]` is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ValueSpec {
    Uniform {
        value: f64,
    },
    Explicit {
        values: Vec<f64>,
    },
    /// Clipped normal draws; with `complement` the draws are for `1 - value`.
    Sampled {
        mean: f64,
        std: f64,
        #[serde(default = "default_clip_lo")]
        clip_lo: f64,
        #[serde(default = "default_clip_hi")]
        clip_hi: f64,
        #[serde(default)]
        complement: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InnateSpec {
    /// Independent uniform draws on `[0, 1]`.
    Uniform {},
    Explicit {
        values: Vec<f64>,
    },
    /// Whitespace-separated values, `#` starts a comment.
    File {
        path: PathBuf,
    },
    /// `clip(0.5 + 0.15 z + noise e)` with `z` a unit-variance linear
    /// function of the node features.
    FeatureLinked {
        #[serde(default = "default_noise")]
        noise: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    Perfect {},
    /// Mean estimation over the observed set.
    Mean {},
    Steer {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        nodes: Option<Vec<usize>>,
        /// Share of nodes steered when `nodes` is absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fraction: Option<f64>,
        #[serde(default = "default_s")]
        s: f64,
        /// Node held at `beta = 0`; drawn among unsteered nodes if absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        immune: Option<usize>,
        /// Also run with `beta = 0` off the steered set.
        #[serde(default = "default_true")]
        baseline: bool,
    },
    Ols {},
    Mlp {
        #[serde(default)]
        hyper: MlpHyper,
    },
}

impl Default for InnateSpec {
    fn default() -> Self {
        InnateSpec::Uniform {}
    }
}

impl Default for PolicySpec {
    fn default() -> Self {
        PolicySpec::Perfect {}
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Beta,
    Alpha,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub grid: Vec<f64>,
    /// Homogeneous value of the other parameter. For a beta sweep without
    /// it, the configured alpha is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed: Option<f64>,
}

/// Steering on a complete graph with all-zero innate opinions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteerSpec {
    pub n: usize,
    pub alpha: f64,
    pub beta_j: f64,
    #[serde(default = "default_s")]
    pub s: f64,
    pub gammas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkSource,
    #[serde(default = "default_k")]
    pub k: Horizon,
    #[serde(default = "default_t_max")]
    pub t_max: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub policy: PolicySpec,
    #[serde(default = "default_alpha")]
    pub alpha: ValueSpec,
    #[serde(default = "default_beta")]
    pub beta: ValueSpec,
    #[serde(default = "default_observed_fraction")]
    pub observed_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed: Option<Vec<usize>>,
    #[serde(default)]
    pub innate: InnateSpec,
    /// Feature dimension for learned policies and feature-linked opinions.
    #[serde(default = "default_features")]
    pub features: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub recording: Recording,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steer: Option<SteerSpec>,
    /// Compute the closed-form stable point (affine policies only).
    #[serde(default)]
    pub equilibrium: bool,
}

fn default_clip_lo() -> f64 {
    0.01
}
fn default_clip_hi() -> f64 {
    0.99
}
fn default_noise() -> f64 {
    0.05
}
fn default_s() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}
fn default_k() -> Horizon {
    Horizon::Finite(100)
}
fn default_t_max() -> usize {
    30
}
fn default_tol() -> f64 {
    1e-9
}
fn default_alpha() -> ValueSpec {
    ValueSpec::Sampled {
        mean: 0.9,
        std: 0.1,
        clip_lo: 0.01,
        clip_hi: 0.99,
        complement: true,
    }
}
fn default_beta() -> ValueSpec {
    ValueSpec::Sampled {
        mean: 0.9,
        std: 0.1,
        clip_lo: 0.01,
        clip_hi: 0.99,
        complement: false,
    }
}
fn default_observed_fraction() -> f64 {
    0.8
}
fn default_features() -> usize {
    8
}
fn default_replications() -> usize {
    1
}

impl ExperimentConfig {
    /// A config with every optional field at its default.
    pub fn new(network: NetworkSource) -> Self {
        Self {
            network,
            k: default_k(),
            t_max: default_t_max(),
            tol: default_tol(),
            policy: PolicySpec::default(),
            alpha: default_alpha(),
            beta: default_beta(),
            observed_fraction: default_observed_fraction(),
            observed: None,
            innate: InnateSpec::default(),
            features: default_features(),
            seed: 0,
            replications: 1,
            recording: Recording::Full,
            sweep: None,
            steer: None,
            equilibrium: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let NetworkSource::EdgeList { path, .. } = &mut cfg.network {
            rebase(path);
        }
        if let InnateSpec::File { path } = &mut cfg.innate {
            rebase(path);
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        for spec in [&self.alpha, &self.beta] {
            if let ValueSpec::Sampled {
                clip_lo, clip_hi, std, ..
            } = *spec
            {
                if !(0.0..=1.0).contains(&clip_lo) || !(0.0..=1.0).contains(&clip_hi) {
                    return Err(Error::invalid("clip bounds must lie in [0, 1]"));
                }
                if clip_lo >= clip_hi || !(std >= 0.0) {
                    return Err(Error::invalid("need clip_lo < clip_hi and std >= 0"));
                }
            }
        }
        if !(self.observed_fraction > 0.0 && self.observed_fraction <= 1.0) {
            return Err(Error::invalid("observed_fraction must lie in (0, 1]"));
        }
        if self.t_max < 1 || !(self.tol > 0.0) || self.replications < 1 {
            return Err(Error::invalid("t_max, tol and replications must be positive"));
        }
        if let PolicySpec::Steer { s, fraction, .. } = &self.policy {
            if !(0.0..=1.0).contains(s) || fraction.is_some_and(|f| !(f > 0.0 && f < 1.0)) {
                return Err(Error::invalid("steering needs s in [0, 1] and fraction in (0, 1)"));
            }
        }
        Ok(())
    }

    fn needs_features(&self) -> bool {
        matches!(self.policy, PolicySpec::Ols {} | PolicySpec::Mlp { .. })
            || matches!(self.innate, InnateSpec::FeatureLinked { .. })
    }
}

/// Independent random substreams of one seed.
#[derive(Debug, Clone, Copy)]
enum Stream {
    Network = 1,
    Alpha,
    Beta,
    Features,
    Innate,
    Observed,
    Steering,
    Learner,
}

fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// Normal draws clipped (not resampled) to `[clip_lo, clip_hi]`.
pub fn sample_susceptibilities(
    n: usize,
    mean: f64,
    std: f64,
    clip_lo: f64,
    clip_hi: f64,
    seed: u64,
) -> Result<DVector<f64>> {
    sample_clipped(n, mean, std, clip_lo, clip_hi, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn sample_clipped(
    n: usize,
    mean: f64,
    std: f64,
    clip_lo: f64,
    clip_hi: f64,
    rng: &mut impl Rng,
) -> Result<DVector<f64>> {
    if !(clip_lo < clip_hi) {
        return Err(Error::invalid(format!("clip bounds {clip_lo} >= {clip_hi}")));
    }
    let dist = Normal::new(mean, std).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(DVector::from_fn(n, |_, _| dist.sample(rng).clamp(clip_lo, clip_hi)))
}

fn values(spec: &ValueSpec, n: usize, rng: &mut impl Rng) -> Result<DVector<f64>> {
    match spec {
        ValueSpec::Uniform { value } => Ok(DVector::from_element(n, *value)),
        ValueSpec::Explicit { values } => {
            if values.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: values.len(),
                });
            }
            Ok(DVector::from_column_slice(values))
        }
        ValueSpec::Sampled {
            mean,
            std,
            clip_lo,
            clip_hi,
            complement,
        } => {
            let v = sample_clipped(n, *mean, *std, *clip_lo, *clip_hi, rng)?;
            Ok(if *complement { v.map(|x| 1.0 - x) } else { v })
        }
    }
}

fn load_network(source: &NetworkSource, seed: u64) -> Result<Graph> {
    match source {
        NetworkSource::Generator(spec) => generate_network(spec, stream(seed, Stream::Network).next_u64()),
        NetworkSource::EdgeList {
            path,
            isolated,
            sample,
        } => {
            let g = load_edge_list(path, *isolated)?;
            match sample {
                Some(size) => sample_connected_subgraph(&g, *size, stream(seed, Stream::Network).next_u64()),
                None => Ok(largest_connected_component(&g)),
            }
        }
    }
}

fn read_innate_file(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split_whitespace() {
            out.push(tok.parse().map_err(|_| Error::Parse {
                line: k + 1,
                msg: format!("not a number: {tok}"),
            })?);
        }
    }
    Ok(out)
}

/// Everything a replication needs, drawn from one seed.
#[derive(Debug, Clone)]
pub struct World {
    pub graph: Graph,
    pub x_star: OpinionVector,
    pub profile: SusceptibilityProfile,
    pub observed: Vec<usize>,
    pub features: Option<FeatureTable>,
    pub steered: Vec<usize>,
    pub immune: Option<usize>,
}

pub fn build_world(cfg: &ExperimentConfig, seed: u64) -> Result<World> {
    let graph = load_network(&cfg.network, seed)?;
    let n = graph.n();
    let alpha = values(&cfg.alpha, n, &mut stream(seed, Stream::Alpha))?;
    let mut beta = values(&cfg.beta, n, &mut stream(seed, Stream::Beta))?;

    let features = cfg.needs_features().then(|| {
        FeatureTable::synthetic(n, cfg.features.max(1), &mut stream(seed, Stream::Features))
    });

    let mut rng = stream(seed, Stream::Innate);
    let x_star = match &cfg.innate {
        InnateSpec::Uniform {} => OpinionVector::new((0..n).map(|_| rng.random()).collect())?,
        InnateSpec::Explicit { values } => OpinionVector::new(values.clone())?,
        InnateSpec::File { path } => OpinionVector::new(read_innate_file(path)?)?,
        InnateSpec::FeatureLinked { noise } => {
            let f = features.as_ref().expect("features drawn for feature-linked opinions");
            let w: DVector<f64> = DVector::from_fn(f.d(), |_, _| rng.sample(StandardNormal));
            let z = f.data() * &w / w.norm().max(f64::MIN_POSITIVE);
            OpinionVector::new(
                z.iter()
                    .map(|zi| {
                        let e: f64 = rng.sample(StandardNormal);
                        (0.5 + 0.15 * zi + noise * e).clamp(0.0, 1.0)
                    })
                    .collect(),
            )?
        }
    };
    if x_star.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x_star.len(),
        });
    }

    let observed = match &cfg.observed {
        Some(list) => {
            let mut v = list.clone();
            v.sort_unstable();
            v.dedup();
            if v.is_empty() || v[v.len() - 1] >= n {
                return Err(Error::invalid("observed nodes must be nonempty and in range"));
            }
            v
        }
        None => {
            let count = ((cfg.observed_fraction * n as f64).round() as usize).clamp(1, n);
            let mut v = sample(&mut stream(seed, Stream::Observed), n, count).into_vec();
            v.sort_unstable();
            v
        }
    };

    let (mut steered, mut immune) = (Vec::new(), None);
    if let PolicySpec::Steer {
        nodes,
        fraction,
        immune: fixed_immune,
        ..
    } = &cfg.policy
    {
        let mut rng = stream(seed, Stream::Steering);
        steered = match nodes {
            Some(list) => list.clone(),
            None => {
                let count = ((fraction.unwrap_or(0.1) * n as f64).round() as usize).clamp(1, n - 1);
                sample(&mut rng, n, count).into_vec()
            }
        };
        steered.sort_unstable();
        steered.dedup();
        let l = match fixed_immune {
            Some(l) => *l,
            None => {
                let free: Vec<usize> = (0..n).filter(|i| steered.binary_search(i).is_err()).collect();
                free[rng.random_range(0..free.len())]
            }
        };
        if l >= n || steered.contains(&l) {
            return Err(Error::invalid(format!("immune node {l} invalid or steered")));
        }
        beta[l] = 0.0;
        immune = Some(l);
    }

    Ok(World {
        profile: SusceptibilityProfile::from_dvectors(alpha, beta)?,
        graph,
        x_star,
        observed,
        features,
        steered,
        immune,
    })
}

fn affine_policy(cfg: &ExperimentConfig, world: &World) -> Result<Option<AffinePolicy>> {
    let n = world.graph.n();
    Ok(match &cfg.policy {
        PolicySpec::Perfect {} => Some(perfect_policy(n)?),
        PolicySpec::Mean {} => Some(mean_estimation_policy(&world.observed, n)?),
        PolicySpec::Steer { s, .. } => {
            let targets: Vec<_> = world.steered.iter().map(|&j| (j, *s)).collect();
            Some(steering_policy_multi(&targets, n)?)
        }
        PolicySpec::Ols {} | PolicySpec::Mlp { .. } => None,
    })
}

fn loop_policy(cfg: &ExperimentConfig, world: &World) -> Result<LoopPolicy> {
    if let Some(p) = affine_policy(cfg, world)? {
        return Ok(p.into());
    }
    let kind = match &cfg.policy {
        PolicySpec::Mlp { hyper } => LearnerKind::Mlp(*hyper),
        _ => LearnerKind::Ols,
    };
    Ok(LoopPolicy::Learned(LearnedPolicy {
        kind,
        features: world.features.clone().expect("features drawn for learned policies"),
        observed: world.observed.clone(),
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub converged: bool,
    pub t_stop: usize,
    pub residuals: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diverged: Option<String>,
}

impl RunSummary {
    fn of(seed: u64, tr: &Trajectory) -> Self {
        Self {
            seed,
            converged: tr.converged,
            t_stop: tr.t_stop,
            residuals: tr.residuals.clone(),
            mean: tr.mean.clone(),
            var: tr.var.clone(),
            diverged: tr.diverged.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Replication {
    pub seed: u64,
    pub observed: Vec<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub steered: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub immune: Option<usize>,
    pub summary: Option<RunSummary>,
    #[serde(skip)]
    pub trajectory: Option<Trajectory>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<EquilibriumReport>,
    /// The same run with `beta = 0` off the steered set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<RunSummary>,
    #[serde(skip)]
    pub baseline_trajectory: Option<Trajectory>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepTable>,
    /// Set when the replication stopped on an error; earlier results remain.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub numerical_error: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunBundle {
    pub config: ExperimentConfig,
    pub version: &'static str,
    /// Seconds since the epoch, taken from `SOURCE_DATE_EPOCH` when set so
    /// that outputs stay byte-identical otherwise.
    pub timestamp: Option<u64>,
    pub labels: Vec<String>,
    pub replications: Vec<Replication>,
}

impl RunBundle {
    pub fn has_numerical_error(&self) -> bool {
        self.replications.iter().any(|r| r.numerical_error)
    }

    pub fn first_error(&self) -> Option<&str> {
        self.replications.iter().find_map(|r| r.error.as_deref())
    }
}

/// Closed-form stable point of the configured affine policy on `world`.
pub fn solve_equilibrium(cfg: &ExperimentConfig, world: &World) -> Result<EquilibriumReport> {
    let policy = affine_policy(cfg, world)?.ok_or_else(|| {
        Error::invalid("a closed-form equilibrium needs the perfect, mean or steer policy")
    })?;
    let w = influence_matrix(&world.graph)?;
    let psi = psi_operator(&world.profile, &w, cfg.k)?;
    ps_closed_form(&world.x_star, &world.profile, &psi, &policy)
}

/// Variance sweep described by `sweep` on the graph and innate opinions of
/// `world`.
pub fn run_sweep(k: Horizon, sweep: &SweepSpec, world: &World) -> Result<SweepTable> {
    match sweep.parameter {
        SweepParameter::Beta => {
            let alpha = match sweep.fixed {
                Some(a) => DVector::from_element(world.graph.n(), a),
                None => world.profile.alpha().clone(),
            };
            variance_sweep(&world.x_star, &world.graph, &alpha, &sweep.grid, k)
        }
        SweepParameter::Alpha => alpha_sweep(
            &world.x_star,
            &world.graph,
            &sweep.grid,
            sweep.fixed.unwrap_or(0.5),
            k,
        ),
    }
}

fn replication_seed(seed: u64, r: usize) -> u64 {
    seed.wrapping_add(r as u64)
}

/// Runs every replication of `cfg`. Errors inside a replication are recorded
/// in it rather than returned; only failures to build the first world are
/// returned directly.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunBundle> {
    cfg.validate()?;
    let timestamp = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse().ok());
    let mut labels = Vec::new();
    let mut replications = Vec::with_capacity(cfg.replications);
    for r in 0..cfg.replications {
        let seed = replication_seed(cfg.seed, r);
        let world = match build_world(cfg, seed) {
            Ok(w) => w,
            Err(e) if r == 0 => return Err(e),
            Err(e) => {
                replications.push(failed(seed, &e));
                continue;
            }
        };
        if r == 0 {
            labels = world.graph.labels().to_vec();
        }
        replications.push(run_replication(cfg, seed, &world));
    }
    Ok(RunBundle {
        config: cfg.clone(),
        version: VERSION,
        timestamp,
        labels,
        replications,
    })
}

fn failed(seed: u64, e: &Error) -> Replication {
    Replication {
        seed,
        observed: Vec::new(),
        steered: Vec::new(),
        immune: None,
        summary: None,
        trajectory: None,
        equilibrium: None,
        baseline: None,
        baseline_trajectory: None,
        sweep: None,
        error: Some(e.to_string()),
        numerical_error: e.is_numerical(),
    }
}

fn run_replication(cfg: &ExperimentConfig, seed: u64, world: &World) -> Replication {
    let mut rep = failed(seed, &Error::invalid(""));
    rep.error = None;
    rep.observed = world.observed.clone();
    rep.steered = world.steered.clone();
    rep.immune = world.immune;
    if let Err(e) = fill_replication(cfg, seed, world, &mut rep) {
        rep.numerical_error = e.is_numerical();
        rep.error = Some(e.to_string());
    }
    rep
}

fn fill_replication(
    cfg: &ExperimentConfig,
    seed: u64,
    world: &World,
    rep: &mut Replication,
) -> Result<()> {
    let w = influence_matrix(&world.graph)?;
    let n = world.graph.n();
    let dense = (cfg.equilibrium || cfg.sweep.is_some()) && n <= DENSE_LIMIT;
    let psi = if dense {
        psi_operator(&world.profile, &w, cfg.k)?
    } else {
        PsiOperator::matrix_free(&world.profile, &w, cfg.k)?
    };
    let learner_seed = stream(seed, Stream::Learner).next_u64();
    let mut loop_cfg = LoopConfig::new(
        world.x_star.clone(),
        world.profile.clone(),
        psi.clone(),
        loop_policy(cfg, world)?,
    );
    loop_cfg.t_max = cfg.t_max;
    loop_cfg.tol = cfg.tol;
    loop_cfg.recording = cfg.recording;
    loop_cfg.seed = learner_seed;
    let tr = run(&loop_cfg)?;
    rep.summary = Some(RunSummary::of(seed, &tr));
    rep.trajectory = Some(tr);

    if let PolicySpec::Steer { baseline: true, .. } = cfg.policy {
        let beta = DVector::from_fn(n, |i, _| {
            if world.steered.binary_search(&i).is_ok() {
                world.profile.beta()[i]
            } else {
                0.0
            }
        });
        loop_cfg.profile = world.profile.with_beta(beta)?;
        let base = run(&loop_cfg)?;
        rep.baseline = Some(RunSummary::of(seed, &base));
        rep.baseline_trajectory = Some(base);
    }

    if cfg.equilibrium {
        if let Some(policy) = affine_policy(cfg, world)? {
            rep.equilibrium = Some(ps_closed_form(&world.x_star, &world.profile, &psi, &policy)?);
        }
    }

    if let Some(sweep) = &cfg.sweep {
        rep.sweep = Some(run_sweep(cfg.k, sweep, world)?);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Serialize)]
struct TrajectoryRow {
    t: usize,
    node: usize,
    x_init: f64,
    x_ex: f64,
    f: f64,
}

fn trajectory_rows(tr: &Trajectory) -> Vec<TrajectoryRow> {
    tr.records
        .iter()
        .flat_map(|r| {
            (0..r.x_ex.len()).map(move |i| TrajectoryRow {
                t: r.t,
                node: i,
                x_init: r.x_init[i],
                x_ex: r.x_ex[i],
                f: r.f[i],
            })
        })
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_trajectory(dir: &Path, stem: &str, tr: &Trajectory, format: OutputFormat) -> Result<()> {
    let rows = trajectory_rows(tr);
    match format {
        OutputFormat::Csv => write_rows(&dir.join(format!("{stem}.csv")), &rows),
        OutputFormat::Json => write_json(&dir.join(format!("{stem}.json")), &rows),
    }
}

#[derive(Serialize)]
struct Provenance<'a> {
    seed: u64,
    version: &'a str,
    timestamp: Option<u64>,
    config: &'a ExperimentConfig,
}

/// Writes one `seed-<seed>` directory per replication under `out` and
/// returns their paths.
pub fn write_bundle(bundle: &RunBundle, out: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for rep in &bundle.replications {
        let dir = out.join(format!("seed-{}", rep.seed));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_json(
            &dir.join("config.json"),
            &Provenance {
                seed: rep.seed,
                version: bundle.version,
                timestamp: bundle.timestamp,
                config: &bundle.config,
            },
        )?;
        let mut labels = csv::Writer::from_path(dir.join("labels.csv"))?;
        labels.write_record(["external_label", "index"])?;
        for (i, l) in bundle.labels.iter().enumerate() {
            labels.write_record([l.as_str(), &i.to_string()])?;
        }
        labels.flush().map_err(|e| Error::io(&dir, e))?;
        write_json(&dir.join("summary.json"), rep)?;
        if let Some(tr) = &rep.trajectory {
            write_trajectory(&dir, "trajectory", tr, format)?;
        }
        if let Some(tr) = &rep.baseline_trajectory {
            write_trajectory(&dir, "baseline_trajectory", tr, format)?;
        }
        if let Some(sweep) = &rep.sweep {
            match format {
                OutputFormat::Csv => sweep.write_csv(&dir.join("sweep.csv"))?,
                OutputFormat::Json => write_json(&dir.join("sweep.json"), sweep)?,
            }
        }
        dirs.push(dir);
    }
    Ok(dirs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteeringRow {
    pub gamma: f64,
    pub delta_l: f64,
    pub mean: f64,
    /// The same quantities from running the loop to stability.
    pub simulated_delta_l: f64,
    pub simulated_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteeringTable {
    pub spec: SteerSpec,
    pub rows: Vec<SteeringRow>,
    /// Largest sup-norm gap between closed form and simulation.
    pub max_gap: f64,
}

impl SteeringTable {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["gamma", "delta_l", "mean"])?;
        for r in &self.rows {
            w.write_record([r.gamma.to_string(), r.delta_l.to_string(), r.mean.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn steered_loop(spec: &SteerSpec, gamma: f64) -> Result<OpinionVector> {
    let n = spec.n;
    let w = influence_matrix(&complete(n)?)?;
    let mut beta = vec![gamma; n];
    beta[0] = spec.beta_j;
    beta[1] = 0.0;
    let profile = SusceptibilityProfile::new(vec![spec.alpha; n], beta)?;
    let psi = psi_operator(&profile, &w, Horizon::Infinite)?;
    let mut cfg = LoopConfig::new(
        OpinionVector::uniform(n, 0.0)?,
        profile,
        psi,
        steering_policy(0, spec.s, n)?,
    );
    cfg.t_max = 100_000;
    cfg.tol = 1e-13;
    cfg.recording = Recording::Thin;
    let tr = run(&cfg)?;
    if !tr.converged {
        return Err(Error::NoConvergence {
            what: "steering loop",
            iterations: cfg.t_max,
        });
    }
    Ok(tr.last().expect("affine loop records rounds").x_ex.clone())
}

/// Closed-form steering outcomes over a grid of `gamma`, each compared with
/// the loop run to stability.
pub fn steering_sweep(spec: &SteerSpec) -> Result<SteeringTable> {
    let baseline = steered_loop(spec, 0.0)?;
    let mut rows = Vec::with_capacity(spec.gammas.len());
    let mut max_gap: f64 = 0.0;
    for &gamma in &spec.gammas {
        let rep = steering_closed_form(spec.n, spec.alpha, spec.beta_j, gamma, spec.s)?;
        let sim = steered_loop(spec, gamma)?;
        let gap = rep
            .x_ps
            .iter()
            .zip(sim.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        max_gap = max_gap.max(gap);
        rows.push(SteeringRow {
            gamma,
            delta_l: rep.delta_l,
            mean: rep.mean,
            simulated_delta_l: sim[1] - baseline[1],
            simulated_mean: sim.mean(),
        });
    }
    Ok(SteeringTable {
        spec: spec.clone(),
        rows,
        max_gap,
    })
}
