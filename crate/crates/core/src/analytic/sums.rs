//! Truncated time-domain sums over the impulse response `Ω^k ω`.
//!
//! `XXᵀ = Σ_{i,j} Ω^i ω R(|i−j|) ωᵀ (Ωᵀ)^j = V T Vᵀ` with `V = [ω, Ωω, …]`
//! and `T` the Toeplitz matrix of `R`. The product `V T` is formed without
//! storing `T`, using the structure of each input model.

use ndarray::linalg::general_mat_vec_mul;
use ndarray::{s, Array1, Array2, ArrayView1, Axis};

use super::InputModel;
use crate::linalg::symmetrize;
use crate::par::Exec;
use crate::reservoir::Network;
use crate::signal::CorrelationFunction;
use crate::{Error, Result};

/// Target size of the neglected geometric tail, relative to its head.
pub const TRUNCATION_TOL: f64 = 1e-12;
/// Columns are appended until `‖Ω^k ω‖` falls below this fraction of the
/// largest column seen so far.
const NEGLIGIBLE: f64 = 1e-14;
/// Hard cap on the number of impulse-response terms.
pub const MAX_TERMS: usize = 50_000;

/// `k_max = ceil(ln(tol) / ln(λ))`, at least `n`.
pub fn horizon(lambda: f64, n: usize) -> usize {
    let k = if lambda > 0.0 && lambda < 1.0 {
        (TRUNCATION_TOL.ln() / lambda.ln()).ceil() as usize
    } else {
        1
    };
    k.max(n)
}

/// The impulse response `V = [ω, Ωω, Ω²ω, …]` truncated where it becomes
/// negligible.
#[derive(Clone, Debug)]
pub struct KrylovSeries {
    v: Array2<f64>,
}

impl KrylovSeries {
    /// At least `horizon(λ, N) + extra` columns; more when a non-normal
    /// transient keeps the terms from decaying.
    pub fn new(net: &Network, extra: usize) -> Result<Self> {
        let n = net.n();
        let min_terms = horizon(net.spectral_radius(), n) + extra;
        let w = net.w();
        let mut cols: Vec<Array1<f64>> = Vec::with_capacity(min_terms + 1);
        let mut p = net.w_in().to_owned();
        let mut next = Array1::zeros(n);
        let mut peak = 0.0_f64;
        loop {
            let norm = p.dot(&p).sqrt();
            if !norm.is_finite() {
                return Err(Error::Numerical("impulse response overflowed".into()));
            }
            peak = peak.max(norm);
            cols.push(p.clone());
            if cols.len() > min_terms && norm <= NEGLIGIBLE * peak {
                break;
            }
            if cols.len() > MAX_TERMS {
                return Err(Error::NoConvergence(format!(
                    "impulse response still at {:.3e} of its peak after {MAX_TERMS} terms",
                    norm / peak
                )));
            }
            general_mat_vec_mul(1.0, &w, &p, 0.0, &mut next);
            std::mem::swap(&mut p, &mut next);
        }
        let k = cols.len();
        let mut v = Array2::zeros((n, k));
        for (j, c) in cols.iter().enumerate() {
            v.column_mut(j).assign(c);
        }
        Ok(Self { v })
    }

    pub fn terms(&self) -> usize {
        self.v.ncols()
    }

    /// `Ω^k ω`, zero past the truncation point.
    pub fn term(&self, k: usize) -> Array1<f64> {
        if k < self.terms() {
            self.v.column(k).to_owned()
        } else {
            Array1::zeros(self.v.nrows())
        }
    }

    /// `Σ_k Ω^k ω = (I − Ω)⁻¹ ω` (truncated).
    pub fn steady_response(&self) -> Array1<f64> {
        self.v.sum_axis(Axis(1))
    }

    /// State covariance under `model`.
    pub fn xx(&self, model: &InputModel) -> Result<Array2<f64>> {
        let mut xx = match model {
            InputModel::Iid { var, mean } => {
                let mut xx = self.v.dot(&self.v.t()) * *var;
                if *mean != 0.0 {
                    let s = self.steady_response();
                    let ss = outer(&s, &s);
                    xx = xx + ss * (mean * mean);
                }
                xx
            }
            InputModel::Exponential { alpha } => {
                let y = self.toeplitz_exponential((-alpha).exp());
                y.dot(&self.v.t())
            }
            InputModel::Empirical(r) => {
                let y = self.toeplitz_banded(r);
                y.dot(&self.v.t())
            }
        };
        symmetrize(&mut xx);
        Ok(xx)
    }

    /// `Σ_i Ω^i ω R(|i − τ|)`: covariance between the state and `u_{t−τ}`.
    pub fn xy_delay(&self, model: &InputModel, tau: usize) -> Array1<f64> {
        match model {
            InputModel::Iid { var, mean } => {
                let mut xy = self.term(tau) * *var;
                if *mean != 0.0 {
                    xy.scaled_add(mean * mean, &self.steady_response());
                }
                xy
            }
            InputModel::Exponential { alpha } => {
                let q = (-alpha).exp();
                let weights: Array1<f64> = (0..self.terms())
                    .map(|i| q.powi((i as i64 - tau as i64).unsigned_abs() as i32))
                    .collect();
                self.v.dot(&weights)
            }
            InputModel::Empirical(r) => {
                let weights: Array1<f64> = (0..self.terms())
                    .map(|i| r.at((i as i64 - tau as i64).unsigned_abs() as usize))
                    .collect();
                self.v.dot(&weights)
            }
        }
    }

    /// `Σ_{i ≥ shift} Ω^{i−shift} ω r(i)`.
    pub fn xy_crosscorr(&self, r: &CorrelationFunction, shift: usize) -> Result<Array1<f64>> {
        if shift > r.max_lag() {
            return Err(Error::LagOutOfRange {
                lag: shift,
                len: r.values().len(),
            });
        }
        let k = (r.max_lag() - shift + 1).min(self.terms());
        let weights = ArrayView1::from(&r.values()[shift..shift + k]);
        Ok(self.v.slice(s![.., ..k]).dot(&weights))
    }

    /// `V T` for `T_ij = q^{|i−j|}` via one forward and one backward pass.
    fn toeplitz_exponential(&self, q: f64) -> Array2<f64> {
        let (n, k) = self.v.dim();
        let mut fwd = Array2::zeros((n, k));
        let mut acc = Array1::<f64>::zeros(n);
        for j in 0..k {
            acc = acc * q + self.v.column(j);
            fwd.column_mut(j).assign(&acc);
        }
        let mut acc = Array1::<f64>::zeros(n);
        for j in (0..k).rev() {
            acc = acc * q + self.v.column(j);
            let mut col = fwd.column_mut(j);
            col += &acc;
            col -= &self.v.column(j);
        }
        fwd
    }

    /// `V T` for an empirical correlation of finite support.
    fn toeplitz_banded(&self, r: &CorrelationFunction) -> Array2<f64> {
        let (n, k) = self.v.dim();
        let band = r.max_lag();
        let cols = Exec::default().map_range(k, |j| {
            let lo = j.saturating_sub(band);
            let hi = (j + band + 1).min(k);
            let mut acc = Array1::<f64>::zeros(n);
            for i in lo..hi {
                acc.scaled_add(r.at(i.abs_diff(j)), &self.v.column(i));
            }
            acc
        });
        let mut y = Array2::zeros((n, k));
        for (j, c) in cols.into_iter().enumerate() {
            y.column_mut(j).assign(&c);
        }
        y
    }
}

pub(crate) fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let a2 = a.view().insert_axis(Axis(1));
    let b2 = b.view().insert_axis(Axis(0));
    a2.dot(&b2)
}

/// `XXᵀ` by truncated summation.
pub fn xx_sum(net: &Network, model: &InputModel) -> Result<Array2<f64>> {
    KrylovSeries::new(net, 0)?.xx(model)
}

/// `XYᵀ_τ` for delay reconstruction by truncated summation.
pub fn xy_delay_sum(net: &Network, model: &InputModel, tau: usize) -> Result<Array1<f64>> {
    Ok(KrylovSeries::new(net, tau)?.xy_delay(model, tau))
}

/// `XYᵀ` from a measured input/target cross-correlation.
///
/// The truncation at `k_max` terms leaves a tail bounded by
/// `‖ω‖ · max|r| · λ^(k_max+1) / (1 − λ)` for normal `W`.
pub fn xy_from_crosscorr(net: &Network, r: &CorrelationFunction, shift: usize) -> Result<Array1<f64>> {
    KrylovSeries::new(net, 0)?.xy_crosscorr(r, shift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reservoir::ring_network;
    use ndarray::array;

    fn scalar(lambda: f64, c: f64) -> Network {
        Network::new(array![[lambda]], array![c]).unwrap()
    }

    #[test]
    fn horizon_matches_tolerance() {
        assert_eq!(horizon(0.9, 1), 263);
        assert_eq!(horizon(0.5, 100), 100);
    }

    #[test]
    fn scalar_iid_series() {
        let k = KrylovSeries::new(&scalar(0.5, 2.0), 0).unwrap();
        let xx = k.xx(&InputModel::iid(1.0)).unwrap();
        assert!((xx[[0, 0]] - 4.0 / 0.75).abs() < 1e-12);
    }

    #[test]
    fn scalar_exponential_against_double_sum() {
        // Oracle: brute-force double series Σ_{i,j} λ^{i+j} q^{|i−j|}.
        let (lambda, alpha) = (0.5_f64, 0.05_f64);
        let q = (-alpha).exp();
        let mut direct = 0.0;
        for i in 0..120 {
            for j in 0..120 {
                direct += lambda.powi(i + j) * q.powi((i - j).abs());
            }
        }
        let k = KrylovSeries::new(&scalar(lambda, 1.0), 0).unwrap();
        let xx = k.xx(&InputModel::Exponential { alpha }).unwrap();
        assert!((xx[[0, 0]] - direct).abs() < 1e-12);
        let emp = InputModel::Empirical(CorrelationFunction::exponential(alpha, 400).unwrap());
        assert!((k.xx(&emp).unwrap()[[0, 0]] - direct).abs() < 1e-12);
    }

    #[test]
    fn delta_crosscorr_picks_single_term() {
        let net = ring_network(5, 0.8)
            .unwrap()
            .with_input_weights(array![1.0, -1.0, 0.5, 0.0, 2.0])
            .unwrap();
        let mut vals = vec![0.0; 10];
        vals[3] = 1.0;
        let r = CorrelationFunction::empirical(vals).unwrap();
        let xy = xy_from_crosscorr(&net, &r, 0).unwrap();
        let k = KrylovSeries::new(&net, 0).unwrap();
        assert_eq!(xy, k.term(3));
        let zero = CorrelationFunction::empirical(vec![0.0; 10]).unwrap();
        assert!(xy_from_crosscorr(&net, &zero, 0).unwrap().iter().all(|&x| x == 0.0));
        assert!(xy_from_crosscorr(&net, &r, 10).is_err());
    }

    #[test]
    fn shifted_crosscorr_reindexes() {
        let net = scalar(0.5, 1.0);
        let r = CorrelationFunction::exponential(0.1, 300).unwrap();
        let xy = xy_from_crosscorr(&net, &r, 4).unwrap();
        let q = (-0.1_f64).exp();
        let expect = q.powi(4) / (1.0 - 0.5 * q);
        assert!((xy[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn nonzero_mean_adds_steady_response() {
        let net = scalar(0.5, 1.0);
        let k = KrylovSeries::new(&net, 0).unwrap();
        let xx = k.xx(&InputModel::Iid { var: 1.0, mean: 1.0 }).unwrap();
        assert!((xx[[0, 0]] - (1.0 / 0.75 + 4.0)).abs() < 1e-12);
        let xy = k.xy_delay(&InputModel::Iid { var: 1.0, mean: 1.0 }, 2);
        assert!((xy[0] - (0.25 + 2.0)).abs() < 1e-12);
    }
}
