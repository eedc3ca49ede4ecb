//! The memory function `m(τ)` and total memory capacity.

use std::io::Write;

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::closed::DelayCovariances;
use super::sums::KrylovSeries;
use super::{resolve, state_covariance, Backend, InputModel};
use crate::linalg::SymmetricSolver;
use crate::par::Exec;
use crate::reservoir::Network;
use crate::{Error, Result};

/// Lags are added until `m(τ)` drops below this.
pub const TAIL_THRESHOLD: f64 = 1e-6;
/// Largest lag the automatic extension will reach.
pub const MAX_LAG: usize = 20_000;

/// `m(τ) = xyᵀ (XX + reg·I)⁻¹ xy / input_var`.
pub fn memory_function(xx: ArrayView2<'_, f64>, xy: ArrayView1<'_, f64>, input_var: f64, reg: f64) -> Result<f64> {
    if !(input_var > 0.0) {
        return Err(Error::ZeroVariance);
    }
    if xy.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let solver = SymmetricSolver::new(xx, reg)?;
    Ok(solver.quadratic_form(xy)? / input_var)
}

/// `Σ_τ m(τ) = Tr((XX + reg·I)⁻¹ XX)` for zero-mean white input, where
/// `Σ_τ XYᵀ_τ YXᵀ_τ = var · XXᵀ` makes the infinite sum exact.
pub fn iid_total_memory(xx: ArrayView2<'_, f64>, reg: f64) -> Result<f64> {
    let solver = SymmetricSolver::new(xx, reg)?;
    let n = xx.nrows();
    let diag = Exec::default().map_range(n, |j| solver.solve(xx.column(j)).map(|x| x[j]));
    diag.into_iter().sum()
}

/// `m(τ)` for `τ = 0..len` and their sum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryCurve {
    pub m: Vec<f64>,
    pub total: f64,
    /// Network size `N`, the i.i.d. capacity bound.
    pub normalization: usize,
}

impl MemoryCurve {
    /// `Σ m(τ) / N`.
    pub fn normalized_total(&self) -> f64 {
        self.total / self.normalization as f64
    }

    pub fn tau_max(&self) -> usize {
        self.m.len() - 1
    }

    /// Two-column CSV `tau,m`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["tau", "m"])?;
        for (tau, m) in self.m.iter().enumerate() {
            wr.write_record([tau.to_string(), format!("{m}")])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Successive delay cross-covariances `XYᵀ_0, XYᵀ_1, …`.
pub(crate) enum XySource<'a> {
    Closed(DelayCovariances<'a>),
    Sum { series: KrylovSeries, model: InputModel, next: usize },
}

impl<'a> XySource<'a> {
    pub(crate) fn new(net: &'a Network, model: &InputModel, backend: Backend) -> Result<Self> {
        match backend {
            Backend::ClosedForm => Ok(XySource::Closed(DelayCovariances::new(net, model)?)),
            Backend::Sum => Ok(XySource::Sum {
                series: KrylovSeries::new(net, 0)?,
                model: model.clone(),
                next: 0,
            }),
            other => Err(Error::param(
                "backend",
                format!("{other} cannot produce delay covariances incrementally"),
            )),
        }
    }

    /// The next `count` lags.
    pub(crate) fn take(&mut self, count: usize) -> Result<Vec<Array1<f64>>> {
        match self {
            XySource::Closed(it) => (0..count).map(|_| it.next_xy()).collect(),
            XySource::Sum { series, model, next } => {
                let start = *next;
                *next += count;
                let series = &*series;
                let model = &*model;
                Ok(Exec::default().map_range(count, |k| series.xy_delay(model, start + k)))
            }
        }
    }
}

/// Memory curve over `τ = 0..=tau_max`, extended past `tau_max` while
/// `m(τ) ≥ 1e-6`.
///
/// The spectral route has its own entry points
/// ([`super::memory_spectral`], [`super::total_memory_spectral`]).
pub fn total_memory(
    net: &Network,
    model: &InputModel,
    tau_max: usize,
    reg: f64,
    backend: Backend,
) -> Result<MemoryCurve> {
    if backend == Backend::Spectral {
        return Err(Error::param(
            "backend",
            "use total_memory_spectral for the frequency-domain route",
        ));
    }
    let input_var = model.second_moment();
    if !(input_var > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let (xx, used) = state_covariance(net, model, backend)?;
    debug_assert_ne!(resolve(used, model), Backend::Auto);
    let solver = SymmetricSolver::new(xx.view(), reg)?;
    let mut source = XySource::new(net, model, used)?;
    let mut m: Vec<f64> = Vec::new();
    let mut block = tau_max + 1;
    loop {
        let xys = source.take(block)?;
        let vals = Exec::default().try_map(&xys, |xy| {
            if xy.iter().all(|&x| x == 0.0) {
                Ok(0.0)
            } else {
                Ok(solver.quadratic_form(xy.view())? / input_var)
            }
        })?;
        m.extend(vals);
        let last = *m.last().expect("at least one lag");
        if last < TAIL_THRESHOLD {
            break;
        }
        if m.len() > MAX_LAG {
            return Err(Error::NoConvergence(format!(
                "m(τ) is still {last:.3e} at τ = {}; spectral radius too close to 1",
                m.len() - 1
            )));
        }
        block = m.len();
    }
    let total = m.iter().sum();
    Ok(MemoryCurve {
        m,
        total,
        normalization: net.n(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::closed::xx_iid;
    use crate::reservoir::{input_weights, ring_network};
    use ndarray::array;

    #[test]
    fn scalar_memory_function() {
        let lambda: f64 = 0.7;
        let net = Network::new(array![[lambda]], array![1.0]).unwrap();
        let c = total_memory(&net, &InputModel::iid(1.0), 10, 0.0, Backend::ClosedForm).unwrap();
        for (tau, m) in c.m.iter().enumerate().take(11) {
            let expect = lambda.powi(2 * tau as i32) * (1.0 - lambda * lambda);
            assert!((m - expect).abs() < 1e-12);
        }
        assert!((c.total - 1.0).abs() < 1e-6);
        assert!(c.m.len() > 11);
    }

    #[test]
    fn zero_cross_covariance_gives_zero() {
        let xx = array![[2.0, 0.0], [0.0, 1.0]];
        assert_eq!(memory_function(xx.view(), array![0.0, 0.0].view(), 1.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn ring_total_near_n() {
        let net = ring_network(20, 0.9)
            .unwrap()
            .with_input_weights(input_weights(20, 1, 0.1))
            .unwrap();
        let c = total_memory(&net, &InputModel::iid(1.0), 40, 0.0, Backend::Auto).unwrap();
        assert!(c.total <= 20.0 + 1e-6);
        assert!(c.total >= 0.9 * 20.0);
        let trace = iid_total_memory(xx_iid(&net, 1.0).unwrap().view(), 0.0).unwrap();
        assert!((trace - c.total).abs() < 1e-5);
    }

    #[test]
    fn curve_csv_header() {
        let c = MemoryCurve {
            m: vec![1.0, 0.5],
            total: 1.5,
            normalization: 1,
        };
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "tau,m\n0,1\n1,0.5\n");
    }
}
