//! The five experiment families. Every grid point is an independent job;
//! jobs run through [`Exec`] and results are collected in grid order, so
//! output does not depend on scheduling.

use serde::Serialize;
use serde_json::json;

use super::config::{ExperimentConfig, ExperimentKind};
use super::output::{ExperimentResult, Row, TraceRow};
use crate::analytic::sums::KrylovSeries;
use crate::analytic::{state_covariance, total_memory, Backend, InputModel};
use crate::linalg::SymmetricSolver;
use crate::par::Exec;
use crate::readout::{
    analytic_readout, empirical_error_stats, empirical_readout, markov_grid, mse_analytic, predict,
    ErrorReport,
};
use crate::reservoir::{input_weights, randomize_links, ring_network, run_reservoir, Network, StateTrajectory};
use crate::signal::{empirical_autocorr, empirical_crosscorr, gen_expcorr, gen_iid_uniform, Signal};
use crate::tasks::{mackey_glass, narma10, prediction_pair, NARMA_TRANSIENT};
use crate::{Error, Result};

/// Points in the Markov threshold grid.
pub const MARKOV_POINTS: usize = 20;
/// Test samples kept in `trace.csv`.
pub const TRACE_LEN: usize = 500;
/// Lags of the Mackey-Glass autocorrelation written to the report.
pub const MG_AUTOCORR_LAGS: usize = 200;
/// NARMA10 inputs are redrawn at most this many times when the recursion
/// diverges.
pub const NARMA_MAX_DRAWS: u64 = 16;

/// Offset separating the independent test sequence from the training one.
const TEST_SEED_OFFSET: u64 = 1 << 32;
/// Offset between successive NARMA10 redraws.
const REDRAW_SEED_OFFSET: u64 = 1 << 40;

/// Runs the experiment named in `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig, exec: Exec) -> Result<ExperimentResult> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentKind::MemoryCurve => run_memory_curve(cfg, exec),
        ExperimentKind::MemoryVsAlpha => run_memory_vs_alpha(cfg, exec),
        ExperimentKind::Narma10 => run_narma10(cfg, exec),
        ExperimentKind::MackeyGlass => run_mackey_glass(cfg, exec),
        ExperimentKind::TopologySweep => run_topology_sweep(cfg, exec),
    }
}

/// Ring (or memoryless) network with `±input_scale` input weights, then
/// `ell` randomized links, all drawn from `seed`.
pub fn build_network(cfg: &ExperimentConfig, lambda: f64, ell: usize, seed: u64) -> Result<Network> {
    let w_in = input_weights(cfg.n, seed, cfg.input_scale);
    let base = if lambda == 0.0 {
        Network::zero(cfg.n)?
    } else {
        ring_network(cfg.n, lambda)?
    };
    let net = base.with_input_weights(w_in)?.with_seed(seed);
    if ell == 0 {
        Ok(net)
    } else {
        randomize_links(&net, ell, seed, cfg.rescale)
    }
}

/// Training states and the states the readouts are scored on.
struct Segments {
    train: StateTrajectory,
    test: StateTrajectory,
}

/// Drives the reservoir with `u` (and, for an independent test, with
/// `u_test`) and splits the post-washout states.
fn segments(cfg: &ExperimentConfig, net: &Network, u: &Signal, u_test: Option<&Signal>) -> Result<Segments> {
    let x = run_reservoir(net, u, cfg.washout)?;
    match u_test {
        Some(ut) => Ok(Segments {
            train: x,
            test: run_reservoir(net, ut, cfg.washout)?,
        }),
        None => {
            let ntr = cfg.train_len();
            Ok(Segments {
                train: x.window(0, ntr)?,
                test: x.window(ntr, x.len())?,
            })
        }
    }
}

/// Entries of `series` aligned with the columns of `x`.
fn aligned<'a>(series: &'a [f64], x: &StateTrajectory) -> &'a [f64] {
    &series[x.washout()..x.washout() + x.len()]
}

/// Pearson correlation squared; zero when either side is constant.
pub fn squared_correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab * sab / (saa * sbb)
    }
}

/// Empirical `m(τ)` for `τ < count`: ridge readouts trained on the training
/// states, scored by squared correlation with `u_{t−τ}` on the test states.
pub fn empirical_memory(
    seg_train: &StateTrajectory,
    u_train: &[f64],
    seg_test: &StateTrajectory,
    u_test: &[f64],
    count: usize,
    reg: f64,
) -> Result<Vec<f64>> {
    let lo = seg_train.washout().min(seg_test.washout());
    if count > lo + 1 {
        return Err(Error::param(
            "tau_max",
            format!("delays up to {} need a washout of at least that length", count - 1),
        ));
    }
    let solver = SymmetricSolver::new(seg_train.gram().view(), reg)?;
    let t_train = seg_train.len() as f64;
    Exec::default().try_map(&(0..count).collect::<Vec<_>>(), |&tau| {
        let s0 = seg_train.washout() - tau;
        let target = &u_train[s0..s0 + seg_train.len()];
        let xy = seg_train.states().dot(&ndarray::ArrayView1::from(target)) / t_train;
        let psi = solver.solve(xy.view())?;
        let pred = seg_test.states().t().dot(&psi);
        let s1 = seg_test.washout() - tau;
        let truth = &u_test[s1..s1 + seg_test.len()];
        Ok(squared_correlation(pred.as_slice().expect("contiguous"), truth))
    })
}

fn memory_inputs(cfg: &ExperimentConfig, alpha: f64, seed: u64) -> Result<(Signal, Option<Signal>)> {
    let u = gen_expcorr(cfg.samples, alpha, seed)?;
    let ut = if cfg.independent_test {
        Some(gen_expcorr(cfg.samples, alpha, seed.wrapping_add(TEST_SEED_OFFSET))?)
    } else {
        None
    };
    Ok((u, ut))
}

#[derive(Clone, Copy)]
struct Job {
    lambda: f64,
    alpha: f64,
    ell: usize,
    seed: u64,
}

fn jobs(cfg: &ExperimentConfig, alphas: &[f64]) -> Vec<Job> {
    let mut v = Vec::new();
    for &lambda in &cfg.lambda {
        for &alpha in alphas {
            for &ell in &cfg.ell {
                for seed in cfg.seeds() {
                    v.push(Job { lambda, alpha, ell, seed });
                }
            }
        }
    }
    v
}

/// Analytic and empirical `m(τ)` for `τ = 0..=tau_max`.
pub fn run_memory_curve(cfg: &ExperimentConfig, exec: Exec) -> Result<ExperimentResult> {
    let per_job = exec.try_map(&jobs(cfg, &cfg.alpha), |j| {
        let net = build_network(cfg, j.lambda, j.ell, j.seed)?;
        let model = InputModel::Exponential { alpha: j.alpha };
        let curve = total_memory(&net, &model, cfg.tau_max, cfg.reg, Backend::Auto)?;
        let (u, ut) = memory_inputs(cfg, j.alpha, j.seed)?;
        let seg = segments(cfg, &net, &u, ut.as_ref())?;
        let test_u = ut.as_ref().unwrap_or(&u);
        let emp = empirical_memory(&seg.train, u.samples(), &seg.test, test_u.samples(), cfg.tau_max + 1, cfg.reg)?;
        Ok((0..=cfg.tau_max)
            .map(|tau| Row {
                lambda: j.lambda,
                alpha: Some(j.alpha),
                ell: j.ell,
                instance_seed: j.seed,
                tau: Some(tau),
                metric: "m".into(),
                analytic: Some(curve.m[tau]),
                empirical: Some(emp[tau]),
            })
            .collect::<Vec<_>>())
    })?;
    let rows: Vec<Row> = per_job.into_iter().flatten().collect();
    let max_gap = |lambda: f64| {
        rows.iter()
            .filter(|r| r.lambda == lambda)
            .map(|r| (r.analytic.unwrap() - r.empirical.unwrap()).abs())
            .fold(0.0, f64::max)
    };
    let per_lambda: Vec<_> = cfg
        .lambda
        .iter()
        .map(|&l| json!({"lambda": l, "max_abs_difference": max_gap(l)}))
        .collect();
    let overall = cfg.lambda.iter().map(|&l| max_gap(l)).fold(0.0, f64::max);
    let report = json!({"max_abs_difference": overall, "per_lambda": per_lambda});
    Ok(ExperimentResult::new(cfg.clone(), rows, report, None))
}

/// Total memory over `N` for each input correlation.
pub fn run_memory_vs_alpha(cfg: &ExperimentConfig, exec: Exec) -> Result<ExperimentResult> {
    let rows = exec.try_map(&jobs(cfg, &cfg.alpha), |j| {
        let net = build_network(cfg, j.lambda, j.ell, j.seed)?;
        let model = InputModel::Exponential { alpha: j.alpha };
        let curve = total_memory(&net, &model, cfg.tau_max, cfg.reg, Backend::Auto)?;
        let (u, ut) = memory_inputs(cfg, j.alpha, j.seed)?;
        let seg = segments(cfg, &net, &u, ut.as_ref())?;
        let test_u = ut.as_ref().unwrap_or(&u);
        let count = curve.m.len().min(cfg.washout + 1);
        let emp = empirical_memory(&seg.train, u.samples(), &seg.test, test_u.samples(), count, cfg.reg)?;
        let n = cfg.n as f64;
        Ok(Row {
            lambda: j.lambda,
            alpha: Some(j.alpha),
            ell: j.ell,
            instance_seed: j.seed,
            tau: None,
            metric: "total_memory_per_n".into(),
            analytic: Some(curve.total / n),
            empirical: Some(emp.iter().sum::<f64>() / n),
        })
    })?;
    let res = ExperimentResult::new(cfg.clone(), rows, serde_json::Value::Null, None);
    let means: Vec<_> = res
        .aggregate_of("total_memory_per_n")
        .map(|a| json!({"lambda": a.lambda, "alpha": a.alpha, "ell": a.ell, "analytic": a.analytic_mean, "empirical": a.empirical_mean}))
        .collect();
    Ok(ExperimentResult { report: json!({ "totals": means }), ..res })
}

/// Scores of one task instance.
#[derive(Clone, Debug, Serialize)]
pub struct TaskOutcome {
    /// Test NMSE of the readout computed from covariances.
    pub nmse_analytic: f64,
    /// Test NMSE of the readout fitted on the training states.
    pub nmse_trained: f64,
    /// `⟨E²⟩ / ⟨ŷ²⟩` predicted from the covariances.
    pub nmse_expected: f64,
    /// Error statistics of the analytic readout on the test segment, with
    /// tail bounds from the predicted mean-squared error.
    pub analytic_report: ErrorReport,
    pub trained_report: ErrorReport,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

/// Scores the analytic readout `(xx, xy, target_power)` against a readout
/// trained on the same states.
fn score(
    cfg: &ExperimentConfig,
    seg: &Segments,
    y_train: &[f64],
    y_test: &[f64],
    xx: ndarray::ArrayView2<'_, f64>,
    xy: ndarray::ArrayView1<'_, f64>,
    target_power: f64,
) -> Result<TaskOutcome> {
    let analytic = analytic_readout(xx, xy, cfg.reg)?;
    let expected = mse_analytic(target_power, xx, xy, cfg.reg)?;
    let trained = empirical_readout(&seg.train, y_train, cfg.reg)?;
    let ya = predict(&analytic, &seg.test)?;
    let yt = predict(&trained, &seg.test)?;
    let grid = markov_grid(expected.max(f64::MIN_POSITIVE), MARKOV_POINTS);
    let analytic_report = empirical_error_stats(ya.samples(), y_test, &grid)?.with_bound_from(expected)?;
    let trained_report = empirical_error_stats(yt.samples(), y_test, &grid)?;
    let trace = (0..y_test.len().min(TRACE_LEN))
        .map(|k| TraceRow {
            t: seg.test.washout() + k,
            target: y_test[k],
            y_analytic: ya.samples()[k],
            y_trained: yt.samples()[k],
        })
        .collect();
    Ok(TaskOutcome {
        nmse_analytic: analytic_report.nmse,
        nmse_trained: trained_report.nmse,
        nmse_expected: expected / target_power,
        analytic_report,
        trained_report,
        trace,
    })
}

/// NARMA10 input and output. A divergent recursion is retried with a
/// fresh input derived deterministically from `seed`.
pub fn narma_series(cfg: &ExperimentConfig, seed: u64) -> Result<(Signal, Signal)> {
    let mut last = None;
    for draw in 0..NARMA_MAX_DRAWS {
        let s = seed.wrapping_add(draw.wrapping_mul(REDRAW_SEED_OFFSET));
        let u = gen_iid_uniform(cfg.samples, 0.0, 0.5, s)?;
        match narma10(&u, &cfg.narma) {
            Ok(y) => return Ok((u, y)),
            Err(e @ Error::Diverged { .. }) => {
                log::info!("NARMA10 diverged for seed {s}; redrawing the input");
                last = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one draw"))
}

/// One NARMA10 instance: analytic readout from the exact white-input state
/// covariance and the measured input/output cross-correlation.
pub fn narma_instance(cfg: &ExperimentConfig, net: &Network, seed: u64) -> Result<TaskOutcome> {
    let (u, y) = narma_series(cfg, seed)?;
    let test = if cfg.independent_test {
        Some(narma_series(cfg, seed.wrapping_add(TEST_SEED_OFFSET))?)
    } else {
        None
    };
    let seg = segments(cfg, net, &u, test.as_ref().map(|p| &p.0))?;
    let y_train = aligned(y.samples(), &seg.train);
    let y_test = aligned(test.as_ref().map_or(y.samples(), |p| p.1.samples()), &seg.test);

    // Moments from the training span, skipping the recursion's start-up.
    let end = seg.train.washout() + seg.train.len();
    let u_fit = u.slice(NARMA_TRANSIENT, end)?;
    let y_fit = y.slice(NARMA_TRANSIENT, end)?;
    let series = KrylovSeries::new(net, 0)?;
    let r_uy = empirical_crosscorr(&u_fit, &y_fit, series.terms().min(u_fit.len() - 1))?;
    let model = InputModel::Iid {
        var: 0.25 * 0.25 / 3.0,
        mean: 0.25,
    };
    let (xx, _) = state_covariance(net, &model, Backend::Auto)?;
    let xy = series.xy_crosscorr(&r_uy, 0)?;
    score(cfg, &seg, y_train, y_test, xx.view(), xy.view(), y_fit.power())
}

/// Standardized Mackey-Glass series long enough for `cfg` and its
/// prediction horizon.
pub fn mackey_glass_series(cfg: &ExperimentConfig, extra: usize) -> Result<Signal> {
    mackey_glass(&cfg.mackey_glass, cfg.samples + cfg.horizon + extra, cfg.history)
}

/// One Mackey-Glass instance: state covariance from the measured
/// autocorrelation and the `horizon`-shifted cross-covariance.
pub fn mackey_glass_instance(cfg: &ExperimentConfig, net: &Network, series: &Signal) -> Result<TaskOutcome> {
    let h = cfg.horizon;
    let (u, y) = prediction_pair(&series.slice(0, cfg.samples + h)?, h)?;
    let test = if cfg.independent_test {
        let tail = series.slice(cfg.samples + h, series.len())?;
        Some(prediction_pair(&tail, h)?)
    } else {
        None
    };
    let seg = segments(cfg, net, &u, test.as_ref().map(|p| &p.0))?;
    let y_train = aligned(y.samples(), &seg.train);
    let y_test = aligned(test.as_ref().map_or(y.samples(), |p| p.1.samples()), &seg.test);

    let end = seg.train.washout() + seg.train.len() + h;
    let fit = series.slice(0, end)?;
    let krylov = KrylovSeries::new(net, 0)?;
    let r = empirical_autocorr(&fit, (krylov.terms() + h).min(fit.len() - 1))?;
    let xx = krylov.xx(&InputModel::Empirical(r.clone()))?;
    let xy = krylov.xy_crosscorr(&r, h)?;
    score(cfg, &seg, y_train, y_test, xx.view(), xy.view(), r.at(0))
}

fn task_rows(j: &Job, metric: &str, o: &TaskOutcome) -> Vec<Row> {
    let row = |metric: String, analytic: f64, empirical: Option<f64>| Row {
        lambda: j.lambda,
        alpha: None,
        ell: j.ell,
        instance_seed: j.seed,
        tau: None,
        metric,
        analytic: Some(analytic),
        empirical,
    };
    vec![
        row(format!("{metric}_nmse"), o.nmse_analytic, Some(o.nmse_trained)),
        row(format!("{metric}_nmse_expected"), o.nmse_expected, None),
    ]
}

fn task_jobs(cfg: &ExperimentConfig) -> Vec<Job> {
    jobs(cfg, &[f64::NAN])
}

fn task_result(cfg: &ExperimentConfig, metric: &str, jobs: &[Job], outcomes: Vec<TaskOutcome>, extra: serde_json::Value) -> ExperimentResult {
    let rows = jobs
        .iter()
        .zip(&outcomes)
        .flat_map(|(j, o)| task_rows(j, metric, o))
        .collect();
    let instances: Vec<_> = jobs
        .iter()
        .zip(&outcomes)
        .map(|(j, o)| json!({"lambda": j.lambda, "ell": j.ell, "instance_seed": j.seed, "outcome": o}))
        .collect();
    let trace = outcomes.first().map(|o| o.trace.clone());
    let mut report = json!({ "instances": instances });
    if let (Some(obj), serde_json::Value::Object(more)) = (report.as_object_mut(), extra) {
        obj.extend(more);
    }
    ExperimentResult::new(cfg.clone(), rows, report, trace)
}

/// NARMA10 with analytic and trained readouts.
pub fn run_narma10(cfg: &ExperimentConfig, exec: Exec) -> Result<ExperimentResult> {
    let jobs = task_jobs(cfg);
    let outcomes = exec.try_map(&jobs, |j| {
        let net = build_network(cfg, j.lambda, j.ell, j.seed)?;
        narma_instance(cfg, &net, j.seed)
    })?;
    Ok(task_result(cfg, "narma10", &jobs, outcomes, json!({})))
}

/// `horizon`-step Mackey-Glass prediction with analytic and trained
/// readouts, plus the series' autocorrelation.
pub fn run_mackey_glass(cfg: &ExperimentConfig, exec: Exec) -> Result<ExperimentResult> {
    let extra = if cfg.independent_test { cfg.samples + cfg.horizon } else { 0 };
    let series = mackey_glass_series(cfg, extra)?;
    let jobs = task_jobs(cfg);
    let outcomes = exec.try_map(&jobs, |j| {
        let net = build_network(cfg, j.lambda, j.ell, j.seed)?;
        mackey_glass_instance(cfg, &net, &series)
    })?;
    let acf = empirical_autocorr(&series, MG_AUTOCORR_LAGS.min(series.len() - 1))?;
    Ok(task_result(
        cfg,
        "mackey_glass",
        &jobs,
        outcomes,
        json!({ "autocorrelation": acf.values() }),
    ))
}

/// Total memory, NARMA10 error and Mackey-Glass error as links are
/// randomized.
pub fn run_topology_sweep(cfg: &ExperimentConfig, exec: Exec) -> Result<ExperimentResult> {
    let series = mackey_glass_series(cfg, if cfg.independent_test { cfg.samples + cfg.horizon } else { 0 })?;
    let jobs = task_jobs(cfg);
    let per_job = exec.try_map(&jobs, |j| {
        let net = build_network(cfg, j.lambda, j.ell, j.seed)?;
        let mut rows = Vec::new();
        for &alpha in &cfg.alpha {
            let model = InputModel::Exponential { alpha };
            let curve = total_memory(&net, &model, cfg.tau_max, cfg.reg, Backend::Auto)?;
            rows.push(Row {
                lambda: j.lambda,
                alpha: Some(alpha),
                ell: j.ell,
                instance_seed: j.seed,
                tau: None,
                metric: "total_memory_per_n".into(),
                analytic: Some(curve.normalized_total()),
                empirical: None,
            });
        }
        let narma = narma_instance(cfg, &net, j.seed)?;
        let mg = mackey_glass_instance(cfg, &net, &series)?;
        rows.extend(task_rows(j, "narma10", &narma));
        rows.extend(task_rows(j, "mackey_glass", &mg));
        Ok(rows)
    })?;
    let rows: Vec<Row> = per_job.into_iter().flatten().collect();
    let res = ExperimentResult::new(cfg.clone(), rows, serde_json::Value::Null, None);
    let best = |metric: &str| -> Vec<serde_json::Value> {
        cfg.lambda
            .iter()
            .map(|&l| {
                let cells: Vec<_> = res.aggregate_of(metric).filter(|a| a.lambda == l).collect();
                let argmin = cells
                    .iter()
                    .min_by(|a, b| a.analytic_mean.partial_cmp(&b.analytic_mean).unwrap())
                    .map(|a| a.ell);
                json!({"lambda": l, "best_ell": argmin})
            })
            .collect()
    };
    let report = json!({
        "narma10_best_ell": best("narma10_nmse"),
        "mackey_glass_best_ell": best("mackey_glass_nmse"),
    });
    Ok(ExperimentResult { report, ..res })
}

/// Mean of `metric` over instances for each `(lambda, ell)` cell, using the
/// analytic column.
pub fn cell_means(res: &ExperimentResult, metric: &str) -> Vec<(f64, usize, f64)> {
    res.aggregate_of(metric)
        .filter_map(|a| a.analytic_mean.map(|m| (a.lambda, a.ell, m)))
        .collect()
}
