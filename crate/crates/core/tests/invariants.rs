use nalgebra::DVector;
use perfodyn::coupled::{run, LoopConfig};
use perfodyn::dynamics::{fj_iterate, psi_operator, Horizon, OpinionVector, SusceptibilityProfile};
use perfodyn::equilibrium::{left_perron, ps_closed_form};
use perfodyn::experiment::ExperimentConfig;
use perfodyn::graph::{influence_matrix, Graph};
use perfodyn::policy::{mean_estimation_policy, perfect_policy, steering_policy};
use perfodyn_oracles::{fj_naive, mat_vec, AffineRule, PeerSteps};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Case {
    g: Graph,
    x: OpinionVector,
    prof: SusceptibilityProfile,
    rng: ChaCha8Rng,
}

fn case(n: usize, seed: u64, max_alpha: f64, max_beta: f64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<_> = (1..n).map(|i| (rng.random_range(0..i), i)).collect();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(0.15) {
                edges.push((i, j));
            }
        }
    }
    let g = Graph::from_edges(n, &edges).unwrap();
    let x = OpinionVector::new((0..n).map(|_| rng.random()).collect()).unwrap();
    let alpha = (0..n).map(|_| rng.random_range(0.0..=max_alpha)).collect();
    let beta = (0..n).map(|_| rng.random_range(0.0..=max_beta)).collect();
    let prof = SusceptibilityProfile::new(alpha, beta).unwrap();
    Case { g, x, prof, rng }
}

fn horizon(k: usize) -> Horizon {
    if k == 0 {
        Horizon::Infinite
    } else {
        Horizon::Finite(k)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn influence_rows_sum_to_one(n in 2usize..40, seed in any::<u64>()) {
        let c = case(n, seed, 1.0, 1.0);
        let w = influence_matrix(&c.g).unwrap().to_dense().unwrap();
        for i in 0..n {
            prop_assert!((w.row(i).sum() - 1.0).abs() < 1e-12);
            prop_assert!(w.row(i).iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn psi_matches_repeated_steps(n in 2usize..30, seed in any::<u64>(), k in 1usize..12) {
        let c = case(n, seed, 1.0, 1.0);
        let w = influence_matrix(&c.g).unwrap();
        let psi = psi_operator(&c.prof, &w, Horizon::Finite(k)).unwrap();
        let via_psi = psi.apply(&c.x).unwrap();
        let stepped = fj_iterate(&c.x, &c.prof, &w, k).unwrap();
        let naive = fj_naive(
            c.x.as_slice(),
            c.prof.alpha().as_slice(),
            &perfodyn_oracles::row_normalized_adjacency(n, &c.g.edges().collect::<Vec<_>>()),
            PeerSteps::Finite(k),
        )
        .unwrap();
        for i in 0..n {
            prop_assert!((via_psi.as_slice()[i] - stepped.as_slice()[i]).abs() < 1e-12);
            prop_assert!((stepped.as_slice()[i] - naive[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn psi_preserves_range(n in 2usize..30, seed in any::<u64>(), k in 0usize..6) {
        let c = case(n, seed, 0.95, 1.0);
        let w = influence_matrix(&c.g).unwrap();
        let psi = psi_operator(&c.prof, &w, horizon(k)).unwrap();
        let out = psi.apply(&c.x).unwrap();
        let lo = c.x.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.x.as_slice().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for &v in out.as_slice() {
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
        let dense = psi.require_dense().unwrap();
        for i in 0..n {
            prop_assert!((dense.row(i).sum() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn policies_agree_with_naive_application(n in 2usize..25, seed in any::<u64>()) {
        let mut c = case(n, seed, 1.0, 1.0);
        let m = c.rng.random_range(1..=n);
        let observed: Vec<usize> = (0..m).collect();
        let j = c.rng.random_range(0..n);
        let s: f64 = c.rng.random();
        for p in [
            perfect_policy(n).unwrap(),
            mean_estimation_policy(&observed, n).unwrap(),
            steering_policy(j, s, n).unwrap(),
        ] {
            let rule = AffineRule {
                m: (0..n).map(|i| p.matrix().row(i).iter().copied().collect()).collect(),
                b: p.offset().iter().copied().collect(),
            };
            let naive: Vec<f64> = mat_vec(&rule.m, c.x.as_slice())
                .iter()
                .zip(&rule.b)
                .map(|(a, b)| a + b)
                .collect();
            let applied = p.apply(&c.x).unwrap();
            for i in 0..n {
                prop_assert!((applied.as_slice()[i] - naive[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn loop_residuals_start_at_round_two(n in 2usize..20, seed in any::<u64>(), k in 0usize..4) {
        let c = case(n, seed, 0.9, 0.9);
        let w = influence_matrix(&c.g).unwrap();
        let psi = psi_operator(&c.prof, &w, horizon(k)).unwrap();
        let policy = perfect_policy(n).unwrap();
        let x_ps = ps_closed_form(&c.x, &c.prof, &psi, &policy).unwrap().x_ps;
        let mut cfg = LoopConfig::new(c.x.clone(), c.prof, psi, policy);
        cfg.t_max = 400;
        cfg.tol = 1e-12;
        let tr = run(&cfg).unwrap();
        prop_assert_eq!(tr.residuals.len() + 1, tr.t_stop);
        prop_assert_eq!(tr.mean.len(), tr.t_stop);
        prop_assert!(tr.converged);
        let last = tr.last().unwrap();
        for i in 0..n {
            prop_assert!((last.x_ex.as_slice()[i] - x_ps.as_slice()[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn left_perron_is_stationary(n in 2usize..25, seed in any::<u64>()) {
        let c = case(n, seed, 0.9, 0.5);
        let w = influence_matrix(&c.g).unwrap();
        let psi = psi_operator(&c.prof, &w, Horizon::Infinite).unwrap();
        let y = left_perron(&psi).unwrap();
        prop_assert!((y.sum() - 1.0).abs() < 1e-10);
        prop_assert!(y.iter().all(|&v| v >= -1e-12));
        let yt = psi.require_dense().unwrap().tr_mul(&y);
        prop_assert!((yt - &y).amax() < 1e-9);
    }

    #[test]
    fn uniform_opinions_are_stable(n in 2usize..20, seed in any::<u64>(), level in 0.0f64..=1.0) {
        let c = case(n, seed, 0.9, 0.9);
        let w = influence_matrix(&c.g).unwrap();
        let psi = psi_operator(&c.prof, &w, Horizon::Infinite).unwrap();
        let x = OpinionVector::uniform(n, level).unwrap();
        let rep = ps_closed_form(&x, &c.prof, &psi, &perfect_policy(n).unwrap()).unwrap();
        prop_assert!((rep.x_ps.as_dvector() - DVector::from_element(n, level)).amax() < 1e-10);
    }

    #[test]
    fn config_round_trips(seed in any::<u64>(), t_max in 1usize..100, reps in 1usize..5) {
        let mut cfg: ExperimentConfig = ExperimentConfig::from_json(
            r#"{"network": {"generator": {"kind": "cycle", "n": 6}}}"#,
        ).unwrap();
        cfg.seed = seed;
        cfg.t_max = t_max;
        cfg.replications = reps;
        let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
