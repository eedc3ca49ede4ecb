//! Experiment configuration: a JSON document whose omitted fields take
//! per-experiment defaults.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::readout::log_space;
use crate::tasks::{MGParams, NarmaParams};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    MemoryCurve,
    MemoryVsAlpha,
    Narma10,
    MackeyGlass,
    TopologySweep,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::MemoryCurve,
        ExperimentKind::MemoryVsAlpha,
        ExperimentKind::Narma10,
        ExperimentKind::MackeyGlass,
        ExperimentKind::TopologySweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::MemoryCurve => "memory-curve",
            ExperimentKind::MemoryVsAlpha => "memory-vs-alpha",
            ExperimentKind::Narma10 => "narma10",
            ExperimentKind::MackeyGlass => "mackey-glass",
            ExperimentKind::TopologySweep => "topology-sweep",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let known: Vec<_> = Self::ALL.iter().map(|k| k.name()).collect();
            Error::Config(format!("unknown experiment `{s}` (expected one of {})", known.join(", ")))
        })
    }
}

/// A grid given either as a single value or as a list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Grid<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> Grid<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            Grid::One(v) => vec![v],
            Grid::Many(v) => v,
        }
    }
}

/// The file format: everything but `experiment` is optional.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    experiment: Option<ExperimentKind>,
    n: Option<usize>,
    lambda: Option<Grid<f64>>,
    alpha: Option<Grid<f64>>,
    ell: Option<Grid<usize>>,
    tau_max: Option<usize>,
    #[serde(alias = "T")]
    samples: Option<usize>,
    washout: Option<usize>,
    reg: Option<f64>,
    instances: Option<usize>,
    base_seed: Option<u64>,
    output: Option<PathBuf>,
    horizon: Option<usize>,
    input_scale: Option<f64>,
    rescale: Option<bool>,
    independent_test: Option<bool>,
    history: Option<f64>,
    full_scale: Option<bool>,
    narma: Option<NarmaParams>,
    mackey_glass: Option<MGParams>,
}

/// A fully resolved experiment configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Reservoir size `N`.
    pub n: usize,
    /// Spectral radii; `0` selects the memoryless network.
    pub lambda: Vec<f64>,
    /// Input correlation exponents.
    pub alpha: Vec<f64>,
    /// Numbers of randomized links.
    pub ell: Vec<usize>,
    pub tau_max: usize,
    /// Input length `T`, washout included.
    pub samples: usize,
    pub washout: usize,
    /// Ridge term added to every covariance before inversion.
    pub reg: f64,
    pub instances: usize,
    pub base_seed: u64,
    pub output: PathBuf,
    /// Prediction horizon for Mackey-Glass.
    pub horizon: usize,
    /// Magnitude of the ± input weights.
    pub input_scale: f64,
    /// Restore the spectral radius after randomizing links.
    pub rescale: bool,
    /// Test on a freshly drawn sequence instead of the last third.
    pub independent_test: bool,
    /// Constant Mackey-Glass history on `[−τ, 0]`.
    pub history: f64,
    pub full_scale: bool,
    pub narma: NarmaParams,
    pub mackey_glass: MGParams,
}

/// `{0}` together with `points` log-spaced counts up to `N²/2`.
pub fn default_ell_grid(n: usize, points: usize) -> Vec<usize> {
    let top = (n * n / 2).max(1);
    let mut ell = vec![0];
    for v in log_space(1.0, top as f64, points) {
        let v = (v.round() as usize).clamp(1, top);
        if !ell.contains(&v) {
            ell.push(v);
        }
    }
    ell
}

impl ExperimentConfig {
    /// Defaults for `kind`; `full_scale` selects the large published
    /// setting where it differs from the desk-scale one.
    pub fn defaults(kind: ExperimentKind, full_scale: bool) -> Self {
        let mut c = ExperimentConfig {
            experiment: kind,
            n: 20,
            lambda: vec![0.9],
            alpha: vec![0.05],
            ell: vec![0],
            tau_max: 39,
            samples: 30_000,
            washout: 5_000,
            reg: 1e-9,
            instances: 1,
            base_seed: 0,
            output: PathBuf::from("results"),
            horizon: 10,
            input_scale: 0.1,
            rescale: true,
            independent_test: false,
            history: 1.2,
            full_scale,
            narma: NarmaParams::default(),
            mackey_glass: MGParams::default(),
        };
        match kind {
            ExperimentKind::MemoryCurve => {
                c.lambda = vec![0.5, 0.7, 0.9];
                if full_scale {
                    c.samples = 2_000_000;
                }
            }
            ExperimentKind::MemoryVsAlpha => {
                c.alpha = vec![1.0, 0.5, 0.1, 0.05, 0.02];
                if full_scale {
                    c.samples = 2_000_000;
                }
            }
            ExperimentKind::Narma10 | ExperimentKind::MackeyGlass => {}
            ExperimentKind::TopologySweep => {
                c.n = if full_scale { 100 } else { 30 };
                c.instances = if full_scale { 50 } else { 10 };
                c.lambda = vec![0.3, 0.6, 0.9];
                c.alpha = vec![0.01];
                c.ell = default_ell_grid(c.n, 6);
                c.reg = 1e-13;
            }
        }
        c
    }

    /// Parses a JSON document. `experiment` may be omitted when `kind` is
    /// supplied by the caller; a mismatch between the two is an error.
    pub fn from_json(text: &str, kind: Option<ExperimentKind>, full_scale: bool) -> Result<Self> {
        let file: ConfigFile = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {} column {}: {e}", e.line(), e.column())))?;
        let experiment = match (file.experiment, kind) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(format!(
                    "config is for `{a}` but `{b}` was requested"
                )))
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(Error::Config("missing field `experiment`".into())),
        };
        let full_scale = full_scale || file.full_scale.unwrap_or(false);
        let d = Self::defaults(experiment, full_scale);
        let n = file.n.unwrap_or(d.n);
        let ell = match file.ell {
            Some(g) => g.into_vec(),
            // The default link grid follows the network size.
            None if experiment == ExperimentKind::TopologySweep => default_ell_grid(n, 6),
            None => d.ell,
        };
        let c = ExperimentConfig {
            experiment,
            n,
            lambda: file.lambda.map_or(d.lambda, Grid::into_vec),
            alpha: file.alpha.map_or(d.alpha, Grid::into_vec),
            ell,
            tau_max: file.tau_max.unwrap_or(d.tau_max),
            samples: file.samples.unwrap_or(d.samples),
            washout: file.washout.unwrap_or(d.washout),
            reg: file.reg.unwrap_or(d.reg),
            instances: file.instances.unwrap_or(d.instances),
            base_seed: file.base_seed.unwrap_or(d.base_seed),
            output: file.output.unwrap_or(d.output),
            horizon: file.horizon.unwrap_or(d.horizon),
            input_scale: file.input_scale.unwrap_or(d.input_scale),
            rescale: file.rescale.unwrap_or(d.rescale),
            independent_test: file.independent_test.unwrap_or(d.independent_test),
            history: file.history.unwrap_or(d.history),
            full_scale,
            narma: file.narma.unwrap_or(d.narma),
            mackey_glass: file.mackey_glass.unwrap_or(d.mackey_glass),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Instance seeds `base_seed + i`.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.instances as u64).map(|i| self.base_seed.wrapping_add(i)).collect()
    }

    /// Number of post-washout samples used for training when the test
    /// segment is carved from the same sequence.
    pub fn train_len(&self) -> usize {
        let kept = self.samples - self.washout;
        if self.independent_test {
            kept
        } else {
            (2 * kept).div_ceil(3)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.lambda.is_empty() || self.alpha.is_empty() || self.ell.is_empty() {
            return bad("lambda, alpha and ell grids must be non-empty".into());
        }
        if self.instances == 0 {
            return bad("instances must be at least 1".into());
        }
        if let Some(l) = self.lambda.iter().find(|l| !(**l >= 0.0 && **l < 1.0)) {
            return bad(format!("lambda {l} outside [0, 1)"));
        }
        if let Some(a) = self.alpha.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return bad(format!("alpha {a} must be positive"));
        }
        if let Some(l) = self.ell.iter().find(|l| **l > self.n * self.n) {
            return bad(format!("ell {l} exceeds N² = {}", self.n * self.n));
        }
        if self.lambda.contains(&0.0) && self.ell.iter().any(|&l| l > 0) {
            return bad("randomized links need a positive lambda to rescale to".into());
        }
        if self.samples <= self.washout {
            return bad(format!(
                "T ({}) must exceed the washout ({})",
                self.samples, self.washout
            ));
        }
        let kept = self.samples - self.washout;
        if !self.independent_test && kept == self.train_len() {
            return bad(format!("{kept} post-washout samples leave an empty test segment"));
        }
        if !(self.reg >= 0.0 && self.reg.is_finite()) {
            return bad(format!("reg {} must be a non-negative number", self.reg));
        }
        if !(self.input_scale > 0.0 && self.input_scale.is_finite()) {
            return bad("input_scale must be positive".into());
        }
        if self.experiment == ExperimentKind::MemoryCurve && self.tau_max > self.washout {
            return bad(format!(
                "tau_max ({}) cannot exceed the washout ({})",
                self.tau_max, self.washout
            ));
        }
        if self.horizon >= kept {
            return bad("horizon must be shorter than the post-washout sequence".into());
        }
        self.mackey_glass.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.history > 0.0) {
            return bad("history must be positive".into());
        }
        Ok(())
    }
}

/// Reads and resolves a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    ExperimentConfig::from_json(&text, None, false)
}
