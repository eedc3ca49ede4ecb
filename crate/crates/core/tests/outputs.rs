//! Written result files are self-consistent.

use rca_core::experiments::{
    aggregate, read_aggregate, read_raw, run_experiment, write_outputs, ExperimentConfig, ExperimentKind,
};
use rca_core::Exec;

#[test]
fn sweep_files_recompute_and_cover_the_grid() {
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::TopologySweep, false);
    cfg.n = 8;
    cfg.instances = 3;
    cfg.samples = 5_000;
    cfg.washout = 600;
    cfg.ell = vec![0, 2, 16];
    let res = run_experiment(&cfg, Exec::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = write_outputs(&res, dir.path()).unwrap();

    let raw = read_raw(&out.join("raw.csv")).unwrap();
    let agg = read_aggregate(&out.join("aggregate.csv")).unwrap();
    assert_eq!(raw, res.rows);
    for metric in ["total_memory_per_n", "narma10_nmse", "mackey_glass_nmse"] {
        let count = raw.iter().filter(|r| r.metric == metric).count();
        assert_eq!(count, cfg.lambda.len() * cfg.ell.len() * cfg.instances, "{metric}");
    }
    let again = aggregate(&raw);
    assert_eq!(again.len(), agg.len());
    for (a, b) in again.iter().zip(&agg) {
        assert_eq!((a.lambda, a.ell, &a.metric, a.count), (b.lambda, b.ell, &b.metric, b.count));
        for (x, y) in [
            (a.analytic_mean, b.analytic_mean),
            (a.analytic_std, b.analytic_std),
            (a.empirical_mean, b.empirical_mean),
            (a.empirical_std, b.empirical_std),
        ] {
            match (x, y) {
                (Some(x), Some(y)) => assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0)),
                (None, None) => {}
                other => panic!("mismatched cells {other:?}"),
            }
        }
    }
}

#[test]
fn memory_curve_report_matches_rows() {
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::MemoryCurve, false);
    cfg.n = 10;
    cfg.samples = 8_000;
    cfg.washout = 1_000;
    let res = run_experiment(&cfg, Exec::default()).unwrap();
    let gap = res
        .rows
        .iter()
        .map(|r| (r.analytic.unwrap() - r.empirical.unwrap()).abs())
        .fold(0.0, f64::max);
    assert_eq!(res.report["max_abs_difference"].as_f64().unwrap(), gap);
    assert_eq!(res.rows.len(), 3 * 40);
}
