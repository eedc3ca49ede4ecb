//! Input signals: generators, standardization, correlation estimators and
//! power spectral densities.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::C64;
use crate::par::Exec;
use crate::{seeded_rng, Error, Result};

/// Provenance of a signal.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SignalMeta {
    pub generator: String,
    pub seed: Option<u64>,
    pub params: BTreeMap<String, f64>,
}

impl SignalMeta {
    pub fn new(generator: impl Into<String>) -> Self {
        Self {
            generator: generator.into(),
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }
}

/// A finite, non-empty scalar time series.
#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    mean: f64,
    variance: f64,
    meta: SignalMeta,
}

impl Signal {
    pub fn new(samples: Vec<f64>, meta: SignalMeta) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("signal samples"));
        }
        if !samples.iter().all(|x| x.is_finite()) {
            return Err(Error::Numerical("signal contains non-finite samples".into()));
        }
        let (mean, variance) = moments(&samples);
        Ok(Self {
            samples,
            mean,
            variance,
            meta,
        })
    }

    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        Self::new(samples, SignalMeta::new("raw"))
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population variance (normalized by `n`).
    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// Mean of the squared samples.
    pub fn power(&self) -> f64 {
        self.variance + self.mean * self.mean
    }

    pub fn meta(&self) -> &SignalMeta {
        &self.meta
    }

    /// Sub-series `[start, end)` carrying the same metadata.
    pub fn slice(&self, start: usize, end: usize) -> Result<Signal> {
        if start >= end || end > self.len() {
            return Err(Error::param(
                "range",
                format!("[{start}, {end}) is not a non-empty range within {}", self.len()),
            ));
        }
        Signal::new(self.samples[start..end].to_vec(), self.meta.clone())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Signal> {
        Signal::new(self.samples.iter().map(|&x| f(x)).collect(), self.meta.clone())
    }

    /// Writes a single-column CSV with header `u`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["u"])?;
        for x in &self.samples {
            wr.write_record([format!("{x}")])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Signal> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        if headers.len() != 1 || &headers[0] != "u" {
            return Err(Error::Config(format!(
                "signal CSV must have the single header `u`, found {:?}",
                headers.iter().collect::<Vec<_>>()
            )));
        }
        let mut samples = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let v: f64 = rec[0]
                .trim()
                .parse()
                .map_err(|e| Error::Config(format!("row {}: {e}", i + 2)))?;
            samples.push(v);
        }
        Signal::new(samples, SignalMeta::new("csv"))
    }
}

fn moments(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// `n` i.i.d. samples uniform on `[lo, hi)`.
pub fn gen_iid_uniform(n: usize, lo: f64, hi: f64, seed: u64) -> Result<Signal> {
    if n == 0 {
        return Err(Error::param("n", "must be positive"));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidRange { lo, hi });
    }
    let mut rng = seeded_rng(seed, 0);
    let samples = (0..n).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect();
    Signal::new(
        samples,
        SignalMeta::new("iid_uniform")
            .with_seed(seed)
            .with_param("lo", lo)
            .with_param("hi", hi),
    )
}

/// Standardized signal with autocorrelation `e^(−α τ)`.
///
/// Uniform `[0, 1)` innovations pass through the AR(1) filter
/// `s_t = e^(−α) s_{t−1} + r_t`; the first `ceil(10/α)` filter outputs are
/// discarded so the collected samples are stationary.
pub fn gen_expcorr(n: usize, alpha: f64, seed: u64) -> Result<Signal> {
    if n == 0 {
        return Err(Error::param("n", "must be positive"));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::param("alpha", "decay exponent must be positive"));
    }
    let q = (-alpha).exp();
    let burn_in = (10.0 / alpha).ceil() as usize;
    let mut rng = seeded_rng(seed, 1);
    let mut s = 0.0;
    for _ in 0..burn_in {
        s = q * s + rng.random::<f64>();
    }
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        s = q * s + rng.random::<f64>();
        samples.push(s);
    }
    let raw = Signal::new(
        samples,
        SignalMeta::new("expcorr")
            .with_seed(seed)
            .with_param("alpha", alpha),
    )?;
    standardize(&raw)
}

/// Centers and scales to zero mean and unit (population) variance.
pub fn standardize(s: &Signal) -> Result<Signal> {
    let mean = s.mean;
    let var = s.variance;
    if !(var > f64::EPSILON * f64::EPSILON * mean * mean) || var == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let sd = var.sqrt();
    let out: Vec<f64> = s.samples.iter().map(|x| (x - mean) / sd).collect();
    Signal::new(out, s.meta.clone())
}

/// Analytic or estimated correlation values indexed by lag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationFunction {
    values: Vec<f64>,
    kind: CorrelationKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorrelationKind {
    AnalyticExponential { alpha: f64 },
    Empirical,
}

impl CorrelationFunction {
    /// `e^(−α τ)` for `τ = 0..=max_lag`.
    pub fn exponential(alpha: f64, max_lag: usize) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::param("alpha", "decay exponent must be positive"));
        }
        Ok(Self {
            values: (0..=max_lag).map(|t| (-alpha * t as f64).exp()).collect(),
            kind: CorrelationKind::AnalyticExponential { alpha },
        })
    }

    pub fn empirical(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("correlation values"));
        }
        Ok(Self {
            values,
            kind: CorrelationKind::Empirical,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> &CorrelationKind {
        &self.kind
    }

    pub fn max_lag(&self) -> usize {
        self.values.len() - 1
    }

    /// Value at `lag`, zero past the stored range.
    pub fn at(&self, lag: usize) -> f64 {
        self.values.get(lag).copied().unwrap_or(0.0)
    }

    /// Two-column CSV `lag,value`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["lag", "value"])?;
        for (lag, v) in self.values.iter().enumerate() {
            wr.write_record([lag.to_string(), format!("{v}")])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// `R(τ) = (1/(n−τ)) Σ_t s_t s_{t−τ}` for `τ = 0..=max_lag` (raw second
/// moments; no centering).
pub fn empirical_autocorr(s: &Signal, max_lag: usize) -> Result<CorrelationFunction> {
    lagged_products(s.samples(), s.samples(), max_lag)
}

/// `R(τ) = (1/(n−τ)) Σ_t u_{t−τ} y_t` for `τ = 0..=max_lag`.
pub fn empirical_crosscorr(u: &Signal, y: &Signal, max_lag: usize) -> Result<CorrelationFunction> {
    if u.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: y.len(),
        });
    }
    lagged_products(u.samples(), y.samples(), max_lag)
}

fn lagged_products(u: &[f64], y: &[f64], max_lag: usize) -> Result<CorrelationFunction> {
    let n = u.len();
    if max_lag >= n {
        return Err(Error::LagOutOfRange { lag: max_lag, len: n });
    }
    let values = Exec::default().map_range(max_lag + 1, |lag| {
        let s: f64 = u[..n - lag].iter().zip(&y[lag..]).map(|(a, b)| a * b).sum();
        s / (n - lag) as f64
    });
    CorrelationFunction::empirical(values)
}

/// Uniform periodic grid `f_j = −π + 2π (j + offset) / size` over one period.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub size: usize,
    pub offset: f64,
}

impl FrequencyGrid {
    pub fn new(size: usize) -> Self {
        Self { size, offset: 0.0 }
    }

    pub fn with_offset(size: usize, offset: f64) -> Self {
        Self { size, offset }
    }

    pub fn frequency(&self, j: usize) -> f64 {
        -PI + 2.0 * PI * (j as f64 + self.offset) / self.size as f64
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.size).map(|j| self.frequency(j)).collect()
    }

    /// Node spacing `2π / size`.
    pub fn step(&self) -> f64 {
        2.0 * PI / self.size as f64
    }

    pub fn refined(&self) -> Self {
        Self {
            size: self.size * 2,
            offset: self.offset,
        }
    }
}

/// Spectral density sampled on a [`FrequencyGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDensity {
    grid: FrequencyGrid,
    frequencies: Vec<f64>,
    values: Vec<C64>,
}

impl SpectralDensity {
    pub fn new(grid: FrequencyGrid, values: Vec<C64>) -> Result<Self> {
        if grid.size == 0 || values.len() != grid.size {
            return Err(Error::LengthMismatch {
                left: grid.size,
                right: values.len(),
            });
        }
        Ok(Self {
            frequencies: grid.frequencies(),
            grid,
            values,
        })
    }

    pub fn grid(&self) -> FrequencyGrid {
        self.grid
    }

    pub fn grid_size(&self) -> usize {
        self.grid.size
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// Largest violation of `S(−f) = conj(S(f))`; only meaningful on a grid
    /// that is symmetric under `f → −f` (zero offset).
    pub fn conjugate_symmetry_error(&self) -> f64 {
        let m = self.grid.size;
        (0..m)
            .map(|j| {
                let mirror = (m - j) % m;
                (self.values[mirror] - self.values[j].conj()).norm()
            })
            .fold(0.0, f64::max)
    }

    /// `R(τ) = (1/2π) ∫ S(f) e^{ifτ} df` by the periodic trapezoid rule.
    pub fn inverse_transform(&self, max_lag: usize) -> Vec<f64> {
        let m = self.grid.size as f64;
        (0..=max_lag)
            .map(|tau| {
                self.frequencies
                    .iter()
                    .zip(&self.values)
                    .map(|(&f, s)| (s * C64::from_polar(1.0, f * tau as f64)).re)
                    .sum::<f64>()
                    / m
            })
            .collect()
    }
}

/// `S(f) = (1 − q²) / (1 − 2q cos f + q²)` with `q = e^(−α)`: the spectrum of a
/// unit-variance process with autocorrelation `e^(−α|τ|)`.
pub fn exponential_psd_at(alpha: f64, f: f64) -> f64 {
    let q = (-alpha).exp();
    (1.0 - q * q) / (1.0 - 2.0 * q * f.cos() + q * q)
}

pub fn psd_exponential(alpha: f64, grid: FrequencyGrid) -> Result<SpectralDensity> {
    if !(alpha > 0.0) {
        return Err(Error::param("alpha", "decay exponent must be positive"));
    }
    if grid.size == 0 {
        return Err(Error::Empty("frequency grid"));
    }
    let values = grid
        .frequencies()
        .into_iter()
        .map(|f| C64::new(exponential_psd_at(alpha, f), 0.0))
        .collect();
    SpectralDensity::new(grid, values)
}

/// Spectral model used by the spectral-domain backends. Analytic variants
/// can be evaluated at any frequency, which the quadrature refinement needs.
#[derive(Clone, Debug, PartialEq)]
pub enum Spectrum {
    /// White spectrum of the given level (the variance of an i.i.d. signal).
    Flat(f64),
    /// Unit-variance exponentially correlated input.
    Exponential { alpha: f64 },
    /// Fixed samples; integrals are evaluated on this grid only.
    Sampled(SpectralDensity),
}

impl Spectrum {
    pub fn eval(&self, grid: &FrequencyGrid, j: usize) -> C64 {
        match self {
            Spectrum::Flat(level) => C64::new(*level, 0.0),
            Spectrum::Exponential { alpha } => {
                C64::new(exponential_psd_at(*alpha, grid.frequency(j)), 0.0)
            }
            Spectrum::Sampled(sd) => sd.values[j],
        }
    }

    /// The grid a sampled spectrum is tied to, if any.
    pub fn fixed_grid(&self) -> Option<FrequencyGrid> {
        match self {
            Spectrum::Sampled(sd) => Some(sd.grid),
            _ => None,
        }
    }
}
