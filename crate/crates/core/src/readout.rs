//! Linear readouts: optimal weights from covariances or from data, expected
//! error, and the distribution-free tail bound on the instantaneous error.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::linalg::SymmetricSolver;
use crate::reservoir::StateTrajectory;
use crate::signal::{Signal, SignalMeta};
use crate::{Error, Result};

/// Weights above this norm indicate a numerically meaningless solve.
pub const MAX_WEIGHT_NORM: f64 = 1e8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutSource {
    Analytic,
    Empirical,
}

/// Readout weights `ψ` solving `(XX + reg·I) ψ = xy`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Readout {
    pub psi: Array1<f64>,
    pub reg: f64,
    pub source: ReadoutSource,
}

impl Readout {
    pub fn scaled(&self, a: f64) -> Readout {
        Readout {
            psi: &self.psi * a,
            ..self.clone()
        }
    }
}

fn solve_readout(xx: ArrayView2<'_, f64>, xy: ArrayView1<'_, f64>, reg: f64, source: ReadoutSource) -> Result<Readout> {
    if xx.nrows() != xy.len() {
        return Err(Error::LengthMismatch {
            left: xx.nrows(),
            right: xy.len(),
        });
    }
    let psi = if xy.iter().all(|&v| v == 0.0) {
        Array1::zeros(xy.len())
    } else {
        SymmetricSolver::new(xx, reg)?.solve(xy)?
    };
    let norm = psi.dot(&psi).sqrt();
    if !(norm < MAX_WEIGHT_NORM) {
        return Err(Error::Numerical(format!(
            "readout norm {norm:.3e} exceeds {MAX_WEIGHT_NORM:e}; increase the regularization"
        )));
    }
    Ok(Readout { psi, reg, source })
}

/// `ψ = (XX + reg·I)⁻¹ xy` from exact covariances.
pub fn analytic_readout(xx: ArrayView2<'_, f64>, xy: ArrayView1<'_, f64>, reg: f64) -> Result<Readout> {
    let asym = (0..xx.nrows())
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .map(|(i, j)| (xx[[i, j]] - xx[[j, i]]).abs())
        .fold(0.0, f64::max);
    let scale = xx.iter().fold(1.0_f64, |a, &b| a.max(b.abs()));
    if asym > 1e-10 * scale {
        return Err(Error::param("xx", format!("covariance is not symmetric ({asym:.3e})")));
    }
    solve_readout(xx, xy, reg, ReadoutSource::Analytic)
}

/// Ridge regression of `target` on the states using second moments
/// normalized by the number of samples.
pub fn empirical_readout(x: &StateTrajectory, target: &[f64], reg: f64) -> Result<Readout> {
    if target.len() != x.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: target.len(),
        });
    }
    if !target.iter().all(|v| v.is_finite()) {
        return Err(Error::param("target", "target window contains invalid samples"));
    }
    let xx = x.gram();
    let xy = x.cross(target)?;
    solve_readout(xx.view(), xy.view(), reg, ReadoutSource::Empirical)
}

/// `y_t = ψᵀ x_t` for every column.
pub fn predict(r: &Readout, x: &StateTrajectory) -> Result<Signal> {
    if r.psi.len() != x.n() {
        return Err(Error::LengthMismatch {
            left: x.n(),
            right: r.psi.len(),
        });
    }
    let y = x.states().t().dot(&r.psi);
    Signal::new(y.to_vec(), SignalMeta::new("readout"))
}

/// `⟨E²⟩ = target_power − xyᵀ (XX + reg·I)⁻¹ xy`.
///
/// Roundoff can push an essentially perfect fit slightly below zero;
/// values within `1e-9 · max(1, target_power)` of zero are clipped, larger
/// negative values are reported as an error.
pub fn mse_analytic(target_power: f64, xx: ArrayView2<'_, f64>, xy: ArrayView1<'_, f64>, reg: f64) -> Result<f64> {
    if !(target_power >= 0.0) {
        return Err(Error::param("target_power", "must be non-negative"));
    }
    let explained = if xy.iter().all(|&v| v == 0.0) {
        0.0
    } else {
        SymmetricSolver::new(xx, reg)?.quadratic_form(xy)?
    };
    let mse = target_power - explained;
    let slack = 1e-9 * target_power.max(1.0);
    if mse >= 0.0 {
        Ok(mse)
    } else if mse >= -slack {
        log::warn!("analytic MSE {mse:.3e} clipped to zero");
        Ok(0.0)
    } else {
        Err(Error::Numerical(format!(
            "analytic MSE {mse:.3e} is negative beyond roundoff; covariances are inconsistent"
        )))
    }
}

/// One threshold of the tail bound `P[E² ≥ a] ≤ ⟨E²⟩ / a`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovPoint {
    pub a: f64,
    pub bound: f64,
    /// Observed frequency of `E² ≥ a`, when measured.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical: Option<f64>,
}

/// `min(1, mse / a)` for each threshold.
pub fn markov_bound(mse: f64, a_grid: &[f64]) -> Result<Vec<MarkovPoint>> {
    if !(mse >= 0.0) {
        return Err(Error::param("mse", "must be non-negative"));
    }
    a_grid
        .iter()
        .map(|&a| {
            if !(a > 0.0) {
                return Err(Error::param("a", format!("threshold {a} must be positive")));
            }
            Ok(MarkovPoint {
                a,
                bound: (mse / a).min(1.0),
                empirical: None,
            })
        })
        .collect()
}

/// `points` thresholds spaced logarithmically over `[0.1·mse, 100·mse]`.
pub fn markov_grid(mse: f64, points: usize) -> Vec<f64> {
    log_space(0.1 * mse, 100.0 * mse, points)
}

pub fn log_space(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (l, h) = (lo.ln(), hi.ln());
            (0..points)
                .map(|i| (l + (h - l) * i as f64 / (points - 1) as f64).exp())
                .collect()
        }
    }
}

/// Error statistics of a prediction against its target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub mse: f64,
    pub nmse: f64,
    /// `⟨ŷ²⟩`, the raw power of the target.
    pub target_power: f64,
    pub markov: Vec<MarkovPoint>,
}

impl ErrorReport {
    /// Replaces the bounds with ones derived from another mean-squared
    /// error (typically the analytic expectation), keeping the observed
    /// exceedance frequencies.
    pub fn with_bound_from(mut self, mse: f64) -> Result<Self> {
        let bounds = markov_bound(mse, &self.markov.iter().map(|p| p.a).collect::<Vec<_>>())?;
        for (p, b) in self.markov.iter_mut().zip(bounds) {
            p.bound = b.bound;
        }
        Ok(self)
    }

    /// Largest `empirical − bound` over the thresholds.
    pub fn worst_violation(&self) -> f64 {
        self.markov
            .iter()
            .filter_map(|p| p.empirical.map(|e| e - p.bound))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Sample MSE, NMSE and exceedance frequency of `(y − target)² ≥ a`.
pub fn empirical_error_stats(y: &[f64], target: &[f64], a_grid: &[f64]) -> Result<ErrorReport> {
    if y.len() != target.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: target.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::Empty("prediction"));
    }
    let t = y.len() as f64;
    let sq: Vec<f64> = y.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).collect();
    let mse = sq.iter().sum::<f64>() / t;
    let target_power = target.iter().map(|v| v * v).sum::<f64>() / t;
    if !(target_power > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let mut markov = markov_bound(mse, a_grid)?;
    for p in &mut markov {
        p.empirical = Some(sq.iter().filter(|&&e| e >= p.a).count() as f64 / t);
    }
    Ok(ErrorReport {
        mse,
        nmse: mse / target_power,
        target_power,
        markov,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reservoir::{run_reservoir, Network};
    use ndarray::array;

    #[test]
    fn scalar_readout() {
        let r = analytic_readout(array![[2.0]].view(), array![4.0].view(), 0.0).unwrap();
        assert!((r.psi[0] - 2.0).abs() < 1e-14);
        let z = analytic_readout(array![[2.0]].view(), array![0.0].view(), 0.0).unwrap();
        assert_eq!(z.psi, array![0.0]);
    }

    #[test]
    fn asymmetric_covariance_rejected() {
        let xx = array![[1.0, 0.5], [0.0, 1.0]];
        assert!(analytic_readout(xx.view(), array![1.0, 1.0].view(), 0.0).is_err());
    }

    fn two_node_trajectory() -> StateTrajectory {
        let w = array![[0.3, 0.1], [-0.2, 0.5]];
        let net = Network::new(w, array![1.0, -0.7]).unwrap();
        let u = crate::signal::gen_iid_uniform(500, -1.0, 1.0, 3).unwrap();
        run_reservoir(&net, &u, 10).unwrap()
    }

    #[test]
    fn empirical_readout_recovers_state_coordinate() {
        let x = two_node_trajectory();
        let target: Vec<f64> = x.states().row(0).to_vec();
        let r = empirical_readout(&x, &target, 0.0).unwrap();
        assert!((r.psi[0] - 1.0).abs() < 1e-10 && r.psi[1].abs() < 1e-10);
        let zero = empirical_readout(&x, &vec![0.0; x.len()], 1e-9).unwrap();
        assert!(zero.psi.iter().all(|&v| v == 0.0));
        assert!(empirical_readout(&x, &[1.0], 0.0).is_err());
    }

    #[test]
    fn predict_selects_and_scales() {
        let x = two_node_trajectory();
        let r = Readout {
            psi: array![0.0, 1.0],
            reg: 0.0,
            source: ReadoutSource::Analytic,
        };
        let y = predict(&r, &x).unwrap();
        assert_eq!(y.samples(), x.states().row(1).to_vec().as_slice());
        let y3 = predict(&r.scaled(3.0), &x).unwrap();
        for (a, b) in y3.samples().iter().zip(y.samples()) {
            assert!((a - 3.0 * b).abs() < 1e-15);
        }
    }

    #[test]
    fn mse_examples() {
        let xx = array![[2.0]];
        assert_eq!(mse_analytic(1.5, xx.view(), array![0.0].view(), 0.0).unwrap(), 1.5);
        // Perfectly representable: y = 2 x with ⟨x²⟩ = 2.
        let mse = mse_analytic(8.0, xx.view(), array![4.0].view(), 0.0).unwrap();
        assert!(mse.abs() < 1e-12);
        assert!(mse_analytic(1.0, xx.view(), array![4.0].view(), 0.0).is_err());
    }

    #[test]
    fn markov_examples() {
        let b = markov_bound(0.01, &[1.0, 0.005]).unwrap();
        assert!((b[0].bound - 0.01).abs() < 1e-15);
        assert_eq!(b[1].bound, 1.0);
        assert!(markov_bound(0.01, &[0.0]).is_err());
    }

    #[test]
    fn error_stats_examples() {
        let t = vec![1.0, -2.0, 3.0];
        let same = empirical_error_stats(&t, &t, &[0.5]).unwrap();
        assert_eq!(same.mse, 0.0);
        assert_eq!(same.markov[0].empirical, Some(0.0));
        let shifted: Vec<f64> = t.iter().map(|v| v + 1.0).collect();
        let r = empirical_error_stats(&shifted, &t, &[0.5, 2.0]).unwrap();
        assert!((r.mse - 1.0).abs() < 1e-15);
        assert_eq!(r.markov[0].empirical, Some(1.0));
        assert_eq!(r.markov[1].empirical, Some(0.0));
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert!(v["markov"][0]["a"].is_number() && v["nmse"].is_number());
    }

    #[test]
    fn log_space_endpoints() {
        let g = markov_grid(0.5, 20);
        assert_eq!(g.len(), 20);
        assert!((g[0] - 0.05).abs() < 1e-12 && (g[19] - 50.0).abs() < 1e-10);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}
