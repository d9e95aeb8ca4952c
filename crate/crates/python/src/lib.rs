use perfodyn_core::dynamics::{psi_operator, Horizon, OpinionVector, SusceptibilityProfile};
use perfodyn_core::equilibrium::{degroot_consensus_value, ps_closed_form, steering_closed_form};
use perfodyn_core::experiment::{run_experiment, ExperimentConfig};
use perfodyn_core::graph::{influence_matrix, Graph};
use perfodyn_core::policy::{mean_estimation_policy, perfect_policy, steering_policy, AffinePolicy};
use perfodyn_core::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    if e.is_numerical() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn horizon(k: Option<usize>) -> Horizon {
    k.map_or(Horizon::Infinite, Horizon::Finite)
}

/// Opinions after `k` peer steps from `x` (`k=None` for the limit).
#[pyfunction]
#[pyo3(signature = (n, edges, alpha, x, k=None))]
fn expressed_opinions(
    n: usize,
    edges: Vec<(usize, usize)>,
    alpha: Vec<f64>,
    x: Vec<f64>,
    k: Option<usize>,
) -> PyResult<Vec<f64>> {
    let g = Graph::from_edges(n, &edges).map_err(to_py)?;
    let w = influence_matrix(&g).map_err(to_py)?;
    let prof = SusceptibilityProfile::new(alpha, vec![0.0; n]).map_err(to_py)?;
    let psi = psi_operator(&prof, &w, horizon(k)).map_err(to_py)?;
    let x = OpinionVector::new(x).map_err(to_py)?;
    Ok(psi.apply(&x).map_err(to_py)?.to_vec())
}

/// Performatively stable opinions under an affine policy: `"perfect"`,
/// `"mean"` (needs `observed`) or `"steer"` (needs `target`, uses `s`).
#[pyfunction]
#[pyo3(signature = (n, edges, x_star, alpha, beta, k=None, policy="perfect", observed=None, target=None, s=1.0))]
#[allow(clippy::too_many_arguments)]
fn stable_point<'py>(
    py: Python<'py>,
    n: usize,
    edges: Vec<(usize, usize)>,
    x_star: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    k: Option<usize>,
    policy: &str,
    observed: Option<Vec<usize>>,
    target: Option<usize>,
    s: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let policy: AffinePolicy = match policy {
        "perfect" => perfect_policy(n),
        "mean" => {
            let observed = observed.ok_or_else(|| PyValueError::new_err("mean policy needs observed"))?;
            mean_estimation_policy(&observed, n)
        }
        "steer" => {
            let j = target.ok_or_else(|| PyValueError::new_err("steer policy needs target"))?;
            steering_policy(j, s, n)
        }
        other => return Err(PyValueError::new_err(format!("unknown policy {other:?}"))),
    }
    .map_err(to_py)?;
    let g = Graph::from_edges(n, &edges).map_err(to_py)?;
    let w = influence_matrix(&g).map_err(to_py)?;
    let prof = SusceptibilityProfile::new(alpha, beta).map_err(to_py)?;
    let psi = psi_operator(&prof, &w, horizon(k)).map_err(to_py)?;
    let x = OpinionVector::new(x_star).map_err(to_py)?;
    let rep = ps_closed_form(&x, &prof, &psi, &policy).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("x_ps", rep.x_ps.to_vec())?;
    d.set_item("mean", rep.mean)?;
    d.set_item("variance", rep.variance)?;
    d.set_item("spread", rep.spread)?;
    d.set_item("method", format!("{:?}", rep.method))?;
    d.set_item("residual", rep.residual)?;
    d.set_item("consensus_value", rep.consensus_value)?;
    Ok(d)
}

/// Steering outcome on the complete graph with target node 0 and the
/// unsteered node 1.
#[pyfunction]
#[pyo3(signature = (n, alpha, beta_j, gamma, s=1.0))]
fn steering<'py>(
    py: Python<'py>,
    n: usize,
    alpha: f64,
    beta_j: f64,
    gamma: f64,
    s: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let rep = steering_closed_form(n, alpha, beta_j, gamma, s).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("x_ps", rep.x_ps)?;
    d.set_item("delta_l", rep.delta_l)?;
    d.set_item("mean", rep.mean)?;
    Ok(d)
}

#[pyfunction]
fn degroot_value(n: usize, edges: Vec<(usize, usize)>, x_star: Vec<f64>, beta: Vec<f64>) -> PyResult<f64> {
    let g = Graph::from_edges(n, &edges).map_err(to_py)?;
    let w = influence_matrix(&g).map_err(to_py)?;
    let x = OpinionVector::new(x_star).map_err(to_py)?;
    degroot_consensus_value(&x, &beta.into(), &w).map_err(to_py)
}

/// Runs an experiment config (JSON text) and returns the result bundle as JSON.
#[pyfunction]
fn run_config(config_json: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::from_json(config_json).map_err(to_py)?;
    let bundle = run_experiment(&cfg).map_err(to_py)?;
    serde_json::to_string(&bundle).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn perfodyn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(expressed_opinions, m)?)?;
    m.add_function(wrap_pyfunction!(stable_point, m)?)?;
    m.add_function(wrap_pyfunction!(steering, m)?)?;
    m.add_function(wrap_pyfunction!(degroot_value, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
