//! Invariant checks on small instances, run by `perfodyn validate`.

use nalgebra::{DMatrix, DVector};
use perfodyn::coupled::{run, LoopConfig};
use perfodyn::dynamics::{psi_operator, Horizon, OpinionVector, PsiOperator, SusceptibilityProfile};
use perfodyn::equilibrium::{
    degroot_consensus_value, ps_closed_form, spectral_decomposition, variance_sweep,
};
use perfodyn::experiment::{
    run_experiment, sample_susceptibilities, steering_sweep, ExperimentConfig, SteerSpec,
};
use perfodyn::generators::{complete, cycle};
use perfodyn::graph::{influence_matrix, Graph};
use perfodyn::policy::{mean_estimation_policy, perfect_policy, steering_policy};
use perfodyn::{generate_network, NetworkSpec};
use perfodyn_oracles::{
    fixed_point_oracle, fj_naive, symmetric_eigenvalues, AffineRule, Matrix, OracleConfig,
    PeerSteps,
};

pub struct CheckResult {
    pub name: &'static str,
    pub outcome: Result<String, String>,
}

type Check = Result<String, String>;

fn err<E: ToString>(e: E) -> String {
    e.to_string()
}

fn rows(m: &DMatrix<f64>) -> Matrix {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

struct Instance {
    g: Graph,
    x: OpinionVector,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

fn instance(seed: u64) -> Result<Instance, String> {
    let n = 4 + (seed as usize * 7) % 9;
    let g = generate_network(&NetworkSpec::ErdosRenyi { n, p: 0.35 }, seed).map_err(err)?;
    let n = g.n();
    let draw = |mean, std, hi, s| {
        sample_susceptibilities(n, mean, std, 0.0, hi, s).map(|v| v.iter().copied().collect())
    };
    let alpha: Vec<f64> = draw(0.5, 0.4, 1.0, seed).map_err(err)?;
    let beta: Vec<f64> = draw(0.5, 0.3, 0.95, seed + 1000).map_err(err)?;
    let x: Vec<f64> = draw(0.5, 0.3, 1.0, seed + 2000).map_err(err)?;
    Ok(Instance {
        g,
        x: OpinionVector::new(x).map_err(err)?,
        alpha,
        beta,
    })
}

fn p2_fixture() -> Check {
    let g = Graph::from_edges(2, &[(0, 1)]).map_err(err)?;
    let w = influence_matrix(&g).map_err(err)?;
    let prof = SusceptibilityProfile::uniform(2, 0.5, 0.5).map_err(err)?;
    let psi = psi_operator(&prof, &w, Horizon::Finite(1)).map_err(err)?;
    let x = OpinionVector::new(vec![0.0, 1.0]).map_err(err)?;
    let rep = ps_closed_form(&x, &prof, &psi, &perfect_policy(2).map_err(err)?).map_err(err)?;
    let gap = sup(rep.x_ps.as_slice(), &[0.5, 0.5]);
    if gap < 1e-12 {
        Ok("x_PS = [0.5, 0.5]".into())
    } else {
        Err(format!("x_PS = {:?}", rep.x_ps.as_slice()))
    }
}

fn psi_matches_steps() -> Check {
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let inst = instance(seed)?;
        let prof = SusceptibilityProfile::new(inst.alpha.clone(), inst.beta).map_err(err)?;
        let w = influence_matrix(&inst.g).map_err(err)?;
        let k = 1 + seed as usize % 6;
        let psi = psi_operator(&prof, &w, Horizon::Finite(k)).map_err(err)?;
        let dense = psi.require_dense().map_err(err)?;
        for i in 0..dense.nrows() {
            if (dense.row(i).sum() - 1.0).abs() > 1e-10 {
                return Err(format!("instance {seed}: row {i} of Psi does not sum to 1"));
            }
        }
        let naive = fj_naive(
            inst.x.as_slice(),
            &inst.alpha,
            &rows(&w.to_dense().map_err(err)?),
            PeerSteps::Finite(k),
        )
        .map_err(err)?;
        worst = worst.max(sup(psi.apply(&inst.x).map_err(err)?.as_slice(), &naive));
    }
    if worst < 1e-12 {
        Ok(format!("10 instances, max gap {worst:.1e}"))
    } else {
        Err(format!("max gap {worst:.3e}"))
    }
}

fn closed_form_matches_oracle() -> Check {
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let inst = instance(seed)?;
        let n = inst.g.n();
        let prof = SusceptibilityProfile::new(inst.alpha.clone(), inst.beta.clone()).map_err(err)?;
        let w = influence_matrix(&inst.g).map_err(err)?;
        let (k, steps) = if seed % 2 == 0 {
            (Horizon::Infinite, PeerSteps::UntilConverged)
        } else {
            (Horizon::Finite(3), PeerSteps::Finite(3))
        };
        let psi = psi_operator(&prof, &w, k).map_err(err)?;
        let w_rows = rows(&w.to_dense().map_err(err)?);
        let observed: Vec<usize> = (0..n).step_by(2).collect();
        for policy in [
            perfect_policy(n).map_err(err)?,
            mean_estimation_policy(&observed, n).map_err(err)?,
            steering_policy(n - 1, 1.0, n).map_err(err)?,
        ] {
            let rep = ps_closed_form(&inst.x, &prof, &psi, &policy).map_err(err)?;
            let rule = AffineRule {
                m: rows(&policy.matrix()),
                b: policy.offset().iter().copied().collect(),
            };
            let oracle = fixed_point_oracle(
                inst.x.as_slice(),
                &inst.alpha,
                &inst.beta,
                &w_rows,
                steps,
                &rule,
                OracleConfig::default(),
            )
            .map_err(err)?;
            worst = worst.max(sup(rep.x_ps.as_slice(), &oracle));
        }
    }
    if worst < 1e-8 {
        Ok(format!("30 equilibria, max gap {worst:.1e}"))
    } else {
        Err(format!("max gap {worst:.3e}"))
    }
}

fn spectral_formula() -> Check {
    let mut worst: f64 = 0.0;
    for n in 3..=8 {
        let g = cycle(n).map_err(err)?;
        let w = influence_matrix(&g).map_err(err)?;
        for k in [Horizon::Finite(2), Horizon::Infinite] {
            let rep = spectral_decomposition(&g, 0.6, 0.5, k).map_err(err)?;
            let prof = SusceptibilityProfile::uniform(n, 0.6, 0.5).map_err(err)?;
            let psi = psi_operator(&prof, &w, k).map_err(err)?;
            let mut formula = rep.lambda.clone();
            formula.sort_by(|a, b| b.total_cmp(a));
            let dense = symmetric_eigenvalues(&rows(psi.require_dense().map_err(err)?)).map_err(err)?;
            worst = worst.max(sup(&formula, &dense));
        }
    }
    if worst < 1e-10 {
        Ok(format!("C3..C8, max eigenvalue gap {worst:.1e}"))
    } else {
        Err(format!("max eigenvalue gap {worst:.3e}"))
    }
}

fn mean_and_variance() -> Check {
    let g = cycle(5).map_err(err)?;
    let x = OpinionVector::new(vec![0.1, 0.9, 0.3, 0.7, 0.5]).map_err(err)?;
    let betas: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let table = variance_sweep(&x, &g, &DVector::from_element(5, 0.6), &betas, Horizon::Infinite)
        .map_err(err)?;
    let drift = table.rows.iter().map(|r| (r.mean - x.mean()).abs()).fold(0.0, f64::max);
    if drift >= 1e-10 {
        return Err(format!("mean moved by {drift:.3e}"));
    }
    if !table.strictly_decreasing_variance() {
        return Err("variance not strictly decreasing in beta".into());
    }
    Ok("C5: mean fixed, variance decreasing over 9 betas".into())
}

fn steering() -> Check {
    let spec = SteerSpec {
        n: 4,
        alpha: 0.5,
        beta_j: 0.5,
        s: 1.0,
        gammas: vec![0.2, 0.5, 0.8],
    };
    let table = steering_sweep(&spec).map_err(err)?;
    if table.max_gap >= 1e-8 {
        return Err(format!("closed form vs loop gap {:.3e}", table.max_gap));
    }
    if !table.rows.windows(2).all(|p| p[1].delta_l > p[0].delta_l) {
        return Err("steering effect not increasing in gamma".into());
    }
    Ok(format!("closed form vs loop gap {:.1e}", table.max_gap))
}

fn degroot() -> Check {
    let w = influence_matrix(&complete(3).map_err(err)?).map_err(err)?;
    let x = OpinionVector::new(vec![0.0, 0.5, 1.0]).map_err(err)?;
    let beta = vec![0.2, 0.5, 0.8];
    let d = degroot_consensus_value(&x, &DVector::from_vec(beta.clone()), &w).map_err(err)?;
    let prof = SusceptibilityProfile::new(vec![1.0; 3], beta).map_err(err)?;
    let psi = PsiOperator::degroot_limit(&w).map_err(err)?;
    let mut cfg = LoopConfig::new(x, prof, psi, perfect_policy(3).map_err(err)?);
    cfg.t_max = 10_000;
    cfg.tol = 1e-14;
    let tr = run(&cfg).map_err(err)?;
    let last = tr.last().ok_or("no rounds")?;
    let gap = last.x_ex.as_slice().iter().map(|v| (v - 0.3).abs()).fold(0.0, f64::max);
    if (d - 0.3).abs() < 1e-8 && gap < 1e-8 {
        Ok("T3: d* = 0.3 and the loop agrees".into())
    } else {
        Err(format!("d* = {d}, loop gap {gap:.3e}"))
    }
}

fn config_outputs(cfg: &ExperimentConfig) -> Check {
    let back = ExperimentConfig::from_json(&cfg.to_json()).map_err(err)?;
    if &back != cfg {
        return Err("config does not survive a JSON round trip".into());
    }
    let bundle = run_experiment(cfg).map_err(err)?;
    for rep in &bundle.replications {
        if let Some(e) = &rep.error {
            return Err(format!("seed {}: {e}", rep.seed));
        }
        let mut values: Vec<f64> = Vec::new();
        if let Some(s) = &rep.summary {
            values.extend(s.mean.iter().chain(&s.var).chain(&s.residuals));
        }
        if let Some(tr) = &rep.trajectory {
            for r in &tr.records {
                values.extend(r.x_init.as_slice().iter().chain(r.x_ex.as_slice()).chain(r.f.as_slice()));
            }
        }
        if let Some(eq) = &rep.equilibrium {
            values.extend(eq.x_ps.as_slice());
        }
        if let Some(t) = &rep.sweep {
            values.extend(t.rows.iter().flat_map(|r| [r.mean, r.variance]));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(format!("seed {}: non-finite output", rep.seed));
        }
    }
    Ok(format!("{} replication(s), all outputs finite", bundle.replications.len()))
}

pub fn run_all(cfg: Option<&ExperimentConfig>) -> Vec<CheckResult> {
    let mut results: Vec<CheckResult> = [
        ("P2 fixture", p2_fixture as fn() -> Check),
        ("Psi against repeated steps", psi_matches_steps),
        ("closed form against fixed-point oracle", closed_form_matches_oracle),
        ("spectral formula on cycles", spectral_formula),
        ("mean invariance and variance decrease", mean_and_variance),
        ("steering closed form", steering),
        ("DeGroot consensus value", degroot),
    ]
    .into_iter()
    .map(|(name, f)| CheckResult { name, outcome: f() })
    .collect();
    if let Some(cfg) = cfg {
        results.push(CheckResult {
            name: "config outputs",
            outcome: config_outputs(cfg),
        });
    }
    results
}
