//! Opinion dynamics where peers influence each other through
//! Friedkin–Johnsen averaging while a platform repeatedly retrains on the
//! opinions it observes and feeds its predictions back.
//!
//! The crate covers the peer dynamics and their `K`-step operator `Psi_K`,
//! affine and learned platform policies, the coupled retraining loop, closed
//! forms for its stable points, and a seeded experiment driver.

pub mod coupled;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod experiment;
pub mod generators;
pub mod graph;
pub mod learn;
pub mod policy;

pub use coupled::{
    detect_stability, estimate_rate, run, LearnedPolicy, LearnerKind, LoopConfig, LoopPolicy,
    RateEstimate, RateOutcome, Recording, StepRecord, Trajectory,
};
pub use dynamics::{
    degroot_equilibrium, fj_equilibrium, fj_iterate, fj_step, psi_operator, Horizon,
    OpinionVector, PsiMethod, PsiOperator, SusceptibilityProfile,
};
pub use equilibrium::{
    consensus_limit, convergence_case, degroot_consensus_value, left_perron,
    mean_estimation_equilibrium, ps_closed_form, reconstruct_from_spectrum, sensitivity,
    spectral_decomposition, spillover, steering_closed_form, variance_sweep, EquilibriumMethod,
    EquilibriumReport, RateCase, SpectralReport, SteeringReport, SweepTable,
};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentConfig, RunBundle};
pub use generators::{generate_network, NetworkSpec};
pub use graph::{
    check_properties, influence_matrix, largest_connected_component, load_edge_list,
    sample_connected_subgraph, Graph, GraphProperties, InfluenceMatrix, IsolatedPolicy,
};
pub use learn::{fit_mlp, fit_ols, FeatureTable, LearnedPredictor, MlpHyper};
pub use policy::{
    apply_policy, custom_policy, mean_estimation_policy, perfect_policy, steering_policy,
    AffinePolicy, PolicyKind,
};
