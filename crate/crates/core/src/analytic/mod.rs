//! Exact second moments of the reservoir state and the memory function.
//!
//! Three independent routes compute the same quantities:
//!
//! * [`sums`]: truncated time-domain sums over the impulse response,
//!   valid for any matrix and any input correlation;
//! * [`closed`]: eigenbasis closed forms for white and exponentially
//!   correlated input;
//! * [`spectral`]: quadrature over the input power spectrum.
//!
//! The sum route is the reference; the others exist to cross-check it and
//! to reproduce the frequency-domain formulas.

pub mod closed;
pub mod memory;
pub mod spectral;
pub mod sums;

use std::collections::BTreeMap;
use std::fmt;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::reservoir::Network;
use crate::signal::{CorrelationFunction, Spectrum};
use crate::{Error, Result};

pub use closed::{xx_expcorr, xx_iid, xy_delay};
pub use memory::{iid_total_memory, memory_function, total_memory, MemoryCurve};
pub use spectral::{memory_spectral, total_memory_spectral, xx_spectral, SpectralOptions};
pub use sums::xy_from_crosscorr;

/// Second-order statistics of the driving input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum InputModel {
    /// Independent samples with the given variance around a constant mean.
    Iid { var: f64, mean: f64 },
    /// Unit variance, zero mean, `R(τ) = e^(−α|τ|)`.
    Exponential { alpha: f64 },
    /// Measured raw autocorrelation `R(τ) = ⟨u_t u_{t−τ}⟩`, zero past its
    /// last lag.
    Empirical(CorrelationFunction),
}

impl InputModel {
    /// Zero-mean white input.
    pub fn iid(var: f64) -> Self {
        InputModel::Iid { var, mean: 0.0 }
    }

    /// `⟨u²⟩`, the power of a delayed copy of the input.
    pub fn second_moment(&self) -> f64 {
        match self {
            InputModel::Iid { var, mean } => var + mean * mean,
            InputModel::Exponential { .. } => 1.0,
            InputModel::Empirical(r) => r.at(0),
        }
    }

    /// The matching power spectrum, when it is a smooth function.
    pub fn spectrum(&self) -> Result<Spectrum> {
        match self {
            InputModel::Iid { var, mean } if *mean == 0.0 => Ok(Spectrum::Flat(*var)),
            InputModel::Exponential { alpha } => Ok(Spectrum::Exponential { alpha: *alpha }),
            _ => Err(Error::param(
                "input_model",
                "only zero-mean white and exponential inputs have an analytic spectrum",
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InputModel::Iid { var, mean } => {
                if !(*var >= 0.0) || !mean.is_finite() {
                    return Err(Error::param("var", "variance must be non-negative"));
                }
            }
            InputModel::Exponential { alpha } => {
                if !(*alpha > 0.0) {
                    return Err(Error::param("alpha", "decay exponent must be positive"));
                }
            }
            InputModel::Empirical(r) => {
                if !(r.at(0) > 0.0) {
                    return Err(Error::ZeroVariance);
                }
            }
        }
        Ok(())
    }
}

/// Which route evaluates the covariances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Sum,
    ClosedForm,
    Spectral,
    /// Closed form, falling back to sums when the eigenbasis is unusable or
    /// the input has no closed form.
    #[default]
    Auto,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Backend::Sum => "sum",
            Backend::ClosedForm => "closed-form",
            Backend::Spectral => "spectral",
            Backend::Auto => "auto",
        };
        f.write_str(s)
    }
}

/// `XXᵀ` together with `XYᵀ_τ` for the requested delays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovariancePair {
    pub xx: Array2<f64>,
    pub xy: BTreeMap<usize, Array1<f64>>,
    /// The route actually used (never `Auto`).
    pub backend: Backend,
    pub input_model: InputModel,
}

impl CovariancePair {
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            n: usize,
            backend: Backend,
            input_model: &'a InputModel,
            xx: Vec<f64>,
            xy: BTreeMap<usize, Vec<f64>>,
        }
        let doc = Doc {
            n: self.xx.nrows(),
            backend: self.backend,
            input_model: &self.input_model,
            xx: self.xx.iter().copied().collect(),
            xy: self.xy.iter().map(|(k, v)| (*k, v.to_vec())).collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

fn falls_back(e: &Error) -> bool {
    matches!(e, Error::Defective { .. } | Error::Numerical(_) | Error::Singular(_))
}

/// Resolves `Auto` for a given input model.
pub(crate) fn resolve(backend: Backend, model: &InputModel) -> Backend {
    match (backend, model) {
        (Backend::Auto, InputModel::Empirical(_)) => Backend::Sum,
        (Backend::Auto, _) => Backend::ClosedForm,
        (b, _) => b,
    }
}

/// `XXᵀ` under `model`, returning the backend that produced it.
pub fn state_covariance(net: &Network, model: &InputModel, backend: Backend) -> Result<(Array2<f64>, Backend)> {
    model.validate()?;
    let chosen = resolve(backend, model);
    let attempt = match chosen {
        Backend::Sum => sums::xx_sum(net, model),
        Backend::ClosedForm => match model {
            InputModel::Iid { var, mean } => closed::xx_iid_mean(net, *var, *mean),
            InputModel::Exponential { alpha } => closed::xx_expcorr(net, *alpha),
            InputModel::Empirical(_) => Err(Error::param(
                "backend",
                "empirical correlations have no closed form",
            )),
        },
        Backend::Spectral => xx_spectral(net, &model.spectrum()?, &SpectralOptions::default()),
        Backend::Auto => unreachable!("resolved above"),
    };
    match attempt {
        Ok(xx) => Ok((xx, chosen)),
        Err(e) if backend == Backend::Auto && falls_back(&e) => {
            log::debug!("closed form unavailable ({e}); using truncated sums");
            Ok((sums::xx_sum(net, model)?, Backend::Sum))
        }
        Err(e) => Err(e),
    }
}

/// Covariances for delay reconstruction at each lag in `lags`.
pub fn covariance_pair(
    net: &Network,
    model: &InputModel,
    lags: &[usize],
    backend: Backend,
) -> Result<CovariancePair> {
    if backend == Backend::Spectral {
        return Err(Error::param(
            "backend",
            "the spectral route evaluates XX and m(τ) directly; use xx_spectral / memory_spectral",
        ));
    }
    let (xx, used) = state_covariance(net, model, backend)?;
    let mut xy = BTreeMap::new();
    let mut source = memory::XySource::new(net, model, used)?;
    let max = lags.iter().copied().max().unwrap_or(0);
    let all = source.take(max + 1)?;
    for &lag in lags {
        xy.insert(lag, all[lag].clone());
    }
    Ok(CovariancePair {
        xx,
        xy,
        backend: used,
        input_model: model.clone(),
    })
}
