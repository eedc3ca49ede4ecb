//! Randomized invariants of the memory analysis, readouts and experiment
//! plumbing.

use ndarray::Array2;
use ndarray_linalg::{Eigh, UPLO};
use proptest::prelude::*;

use rca_core::analytic::{covariance_pair, state_covariance, total_memory, Backend, InputModel};
use rca_core::experiments::{aggregate, run_experiment, ExperimentConfig, ExperimentKind, Row};
use rca_core::readout::{markov_bound, mse_analytic};
use rca_core::reservoir::{input_weights, randomize_links, ring_network, Network};
use rca_core::signal::{gen_expcorr, gen_iid_uniform};
use rca_core::{Error, Exec};

fn network(n: usize, lambda: f64, ell: usize, seed: u64, scale: f64) -> Network {
    let net = ring_network(n, lambda)
        .unwrap()
        .with_input_weights(input_weights(n, seed, scale))
        .unwrap();
    if ell == 0 {
        net
    } else {
        randomize_links(&net, ell.min(n * n), seed, true).unwrap()
    }
}

fn model(kind: u8, alpha: f64) -> InputModel {
    match kind {
        0 => InputModel::iid(1.0),
        _ => InputModel::Exponential { alpha },
    }
}

/// Sign patterns of ±1 input weights can leave ring modes unreachable;
/// without regularization the state covariance is then singular and the
/// memory function undefined.
fn controllable<T>(r: &rca_core::Result<T>) -> bool {
    !matches!(r, Err(Error::Singular(_)))
}

fn min_eig(m: &Array2<f64>) -> f64 {
    let (w, _) = m.eigh(UPLO::Lower).unwrap();
    w.iter().copied().fold(f64::INFINITY, f64::min)
}

fn condition(m: &Array2<f64>) -> f64 {
    let (w, _) = m.eigh(UPLO::Lower).unwrap();
    let top = w.iter().copied().fold(0.0, f64::max);
    top / min_eig(m).max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn memory_is_invariant_to_input_weight_scale(
        n in 2usize..8,
        lambda in 0.5f64..0.95,
        ell in 0usize..10,
        seed in 0u64..1000,
        scale in 0.01f64..10.0,
        kind in 0u8..2,
        alpha in 0.05f64..1.0,
    ) {
        let m = model(kind, alpha);
        let (xx, _) = state_covariance(&network(n, lambda, ell, seed, 1.0), &m, Backend::Sum).unwrap();
        prop_assume!(condition(&xx) < 1e6);
        let a = total_memory(&network(n, lambda, ell, seed, 1.0), &m, 20, 0.0, Backend::Sum).unwrap();
        let b = total_memory(&network(n, lambda, ell, seed, scale), &m, 20, 0.0, Backend::Sum).unwrap();
        for (x, y) in a.m.iter().zip(&b.m).take(21) {
            prop_assert!((x - y).abs() < 1e-10, "{} vs {}", x, y);
        }
    }

    #[test]
    fn memory_plus_delay_nmse_is_one(
        n in 2usize..10,
        lambda in 0.3f64..0.95,
        seed in 0u64..1000,
        kind in 0u8..2,
        alpha in 0.05f64..1.0,
        reg in prop_oneof![Just(0.0), Just(1e-9)],
    ) {
        let net = network(n, lambda, 0, seed, 0.1);
        let m = model(kind, alpha);
        let lags: Vec<usize> = (0..15).collect();
        let pair = covariance_pair(&net, &m, &lags, Backend::Auto).unwrap();
        let curve = total_memory(&net, &m, 14, reg, Backend::Auto);
        prop_assume!(controllable(&curve));
        let curve = curve.unwrap();
        for (tau, xy) in &pair.xy {
            let nmse = mse_analytic(1.0, pair.xx.view(), xy.view(), reg).unwrap();
            prop_assert!((1.0 - curve.m[*tau] - nmse).abs() < 1e-10);
        }
    }

    #[test]
    fn state_covariance_is_positive_semidefinite(
        n in 2usize..20,
        lambda in 0.1f64..0.95,
        ell in 0usize..60,
        seed in 0u64..1000,
        kind in 0u8..2,
        alpha in 0.01f64..2.0,
    ) {
        let (xx, _) = state_covariance(&network(n, lambda, ell, seed, 0.1), &model(kind, alpha), Backend::Auto).unwrap();
        let top = xx.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        prop_assert!(min_eig(&xx) > -1e-12 * top);
        prop_assert!((&xx - &xx.t()).iter().all(|v| v.abs() <= 1e-12 * top));
    }

    #[test]
    fn memory_values_lie_in_unit_interval_and_white_total_is_bounded(
        n in 1usize..15,
        lambda in 0.1f64..0.95,
        ell in 0usize..30,
        seed in 0u64..1000,
    ) {
        let net = network(n, lambda, ell, seed, 0.1);
        let curve = total_memory(&net, &InputModel::iid(1.0), 10, 1e-9, Backend::Auto).unwrap();
        prop_assert!(curve.m.iter().all(|&m| (-1e-12..=1.0 + 1e-12).contains(&m)));
        prop_assert!(curve.total <= n as f64 + 1e-6);
    }

    #[test]
    fn markov_bound_is_a_probability_and_decreasing(mse in 1e-6f64..10.0) {
        let grid: Vec<f64> = (1..40).map(|i| mse * 0.05 * i as f64).collect();
        let b = markov_bound(mse, &grid).unwrap();
        prop_assert!(b.iter().all(|p| (0.0..=1.0).contains(&p.bound)));
        prop_assert!(b.windows(2).all(|w| w[1].bound <= w[0].bound));
    }

    #[test]
    fn seeded_generators_repeat(seed in any::<u64>(), alpha in 0.01f64..2.0) {
        prop_assert_eq!(gen_expcorr(500, alpha, seed).unwrap(), gen_expcorr(500, alpha, seed).unwrap());
        prop_assert_eq!(gen_iid_uniform(500, 0.0, 0.5, seed).unwrap(), gen_iid_uniform(500, 0.0, 0.5, seed).unwrap());
        prop_assert_eq!(input_weights(9, seed, 0.1), input_weights(9, seed, 0.1));
        let a = network(9, 0.7, 20, seed, 0.1);
        let b = network(9, 0.7, 20, seed, 0.1);
        prop_assert_eq!(a.w(), b.w());
    }

    #[test]
    fn aggregates_recompute_from_rows(
        values in prop::collection::vec((0usize..3, 0usize..2, -1e3f64..1e3, prop::option::of(-1e3f64..1e3)), 1..40)
    ) {
        let lambdas = [0.3, 0.6, 0.9];
        let rows: Vec<Row> = values.iter().enumerate().map(|(i, &(l, e, a, emp))| Row {
            lambda: lambdas[l],
            alpha: None,
            ell: e,
            instance_seed: i as u64,
            tau: None,
            metric: "x".into(),
            analytic: Some(a),
            empirical: emp,
        }).collect();
        let agg = aggregate(&rows);
        prop_assert_eq!(agg.iter().map(|a| a.count).sum::<usize>(), rows.len());
        for a in &agg {
            let cell: Vec<&Row> = rows.iter().filter(|r| r.lambda == a.lambda && r.ell == a.ell).collect();
            let mean = cell.iter().map(|r| r.analytic.unwrap()).sum::<f64>() / cell.len() as f64;
            prop_assert!((a.analytic_mean.unwrap() - mean).abs() <= 1e-12 * mean.abs().max(1.0));
        }
    }
}

#[test]
fn experiments_are_deterministic_across_strategies() {
    for kind in [ExperimentKind::Narma10, ExperimentKind::MemoryCurve, ExperimentKind::MackeyGlass] {
        let mut cfg = ExperimentConfig::defaults(kind, false);
        cfg.n = 10;
        cfg.samples = 6_000;
        cfg.washout = 1_000;
        cfg.instances = 3;
        let a = run_experiment(&cfg, Exec::default()).unwrap();
        let b = run_experiment(&cfg, Exec::Sequential).unwrap();
        let c = run_experiment(&cfg, Exec::default()).unwrap();
        assert_eq!(a.rows, b.rows, "{kind}");
        assert_eq!(a.rows, c.rows, "{kind}");
        assert_eq!(a.report, b.report, "{kind}");
    }
}
