//! Result tables and their on-disk form.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::Result;

pub const SCHEMA_VERSION: u32 = 1;

/// One measurement. Columns that do not apply to an experiment are empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub lambda: f64,
    pub alpha: Option<f64>,
    pub ell: usize,
    pub instance_seed: u64,
    pub tau: Option<usize>,
    pub metric: String,
    pub analytic: Option<f64>,
    pub empirical: Option<f64>,
}

/// Mean and sample standard deviation over instances for one
/// `(lambda, alpha, ell, tau, metric)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub lambda: f64,
    pub alpha: Option<f64>,
    pub ell: usize,
    pub tau: Option<usize>,
    pub metric: String,
    pub count: usize,
    pub analytic_mean: Option<f64>,
    pub analytic_std: Option<f64>,
    pub empirical_mean: Option<f64>,
    pub empirical_std: Option<f64>,
}

/// First `t` is the absolute time step of the test segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub target: f64,
    pub y_analytic: f64,
    pub y_trained: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub rows: Vec<Row>,
    pub aggregate: Vec<AggregateRow>,
    /// Experiment-specific summary written to `report.json`.
    pub report: serde_json::Value,
    pub trace: Option<Vec<TraceRow>>,
}

impl ExperimentResult {
    pub fn new(
        config: ExperimentConfig,
        rows: Vec<Row>,
        report: serde_json::Value,
        trace: Option<Vec<TraceRow>>,
    ) -> Self {
        let aggregate = aggregate(&rows);
        ExperimentResult {
            config,
            rows,
            aggregate,
            report,
            trace,
        }
    }

    /// Rows of one metric.
    pub fn metric<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Row> + 'a {
        self.rows.iter().filter(move |r| r.metric == name)
    }

    /// Aggregate rows of one metric.
    pub fn aggregate_of<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a AggregateRow> + 'a {
        self.aggregate.iter().filter(move |r| r.metric == name)
    }
}

fn mean_std(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 {
        (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (Some(mean), Some(std))
}

type Key = (u64, Option<u64>, usize, Option<usize>, String);

fn key(r: &Row) -> Key {
    (
        r.lambda.to_bits(),
        r.alpha.map(f64::to_bits),
        r.ell,
        r.tau,
        r.metric.clone(),
    )
}

/// Groups rows by everything except the instance, in first-seen order.
pub fn aggregate(rows: &[Row]) -> Vec<AggregateRow> {
    let mut order: Vec<Key> = Vec::new();
    let mut groups: std::collections::HashMap<Key, Vec<&Row>> = std::collections::HashMap::new();
    for r in rows {
        let k = key(r);
        groups
            .entry(k.clone())
            .or_insert_with(|| {
                order.push(k);
                Vec::new()
            })
            .push(r);
    }
    order
        .into_iter()
        .map(|k| {
            let g = &groups[&k];
            let first = g[0];
            let an: Vec<f64> = g.iter().filter_map(|r| r.analytic).collect();
            let em: Vec<f64> = g.iter().filter_map(|r| r.empirical).collect();
            let (analytic_mean, analytic_std) = mean_std(&an);
            let (empirical_mean, empirical_std) = mean_std(&em);
            AggregateRow {
                lambda: first.lambda,
                alpha: first.alpha,
                ell: first.ell,
                tau: first.tau,
                metric: first.metric.clone(),
                count: g.len(),
                analytic_mean,
                analytic_std,
                empirical_mean,
                empirical_std,
            }
        })
        .collect()
}

fn write_table<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "# schema_version={SCHEMA_VERSION}")?;
    let mut wr = csv::Writer::from_writer(f);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

fn read_table<T: for<'de> Deserialize<'de>, R: Read>(r: R) -> Result<Vec<T>> {
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let mut out = Vec::new();
    for row in rd.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// Reads a `raw.csv` written by [`write_outputs`].
pub fn read_raw(path: &Path) -> Result<Vec<Row>> {
    read_table(File::open(path)?)
}

/// Reads an `aggregate.csv` written by [`write_outputs`].
pub fn read_aggregate(path: &Path) -> Result<Vec<AggregateRow>> {
    read_table(File::open(path)?)
}

/// Writes `raw.csv`, `aggregate.csv`, `report.json` and, when present,
/// `trace.csv` into `<root>/<experiment>/`, returning that directory.
pub fn write_outputs(result: &ExperimentResult, root: &Path) -> Result<PathBuf> {
    let dir = root.join(result.config.experiment.name());
    std::fs::create_dir_all(&dir)?;
    write_table(&dir.join("raw.csv"), &result.rows)?;
    write_table(&dir.join("aggregate.csv"), &result.aggregate)?;
    if let Some(trace) = &result.trace {
        write_table(&dir.join("trace.csv"), trace)?;
    }
    let doc = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "experiment": result.config.experiment,
        "config": result.config,
        "summary": result.report,
    });
    let mut f = BufWriter::new(File::create(dir.join("report.json"))?);
    serde_json::to_writer_pretty(&mut f, &doc)?;
    writeln!(f)?;
    f.flush()?;
    Ok(dir)
}
