//! Closed forms in the eigenbasis `W = U diag(d) U⁻¹`, `w̄ = U⁻¹ w_in`.
//!
//! With `G = w̄ w̄ᵀ ∘ [1 / (1 − d_a d_b)]` the white-noise covariance is
//! `U G Uᵀ`. The geometric sums collapse through the Hadamard identity
//! `Σ_i D^i w̄ w̄ᵀ D^i = w̄ w̄ᵀ ∘ [1 / (1 − d_a d_b)]`. All arithmetic is
//! complex; realness of the result is checked, not assumed.

use ndarray::linalg::general_mat_vec_mul;
use ndarray::{Array1, Array2, Axis};
use ndarray_linalg::solve::{Factorize, LUFactorized, Solve};

use super::sums::outer;
use super::InputModel;
use crate::linalg::{checked_real, solve_general, symmetrize, C64};
use crate::reservoir::{EigenCache, Network};
use crate::{Error, Result};

/// `G_ab = w̄_a w̄_b / (1 − d_a d_b)`.
fn white_gram(e: &EigenCache) -> Array2<C64> {
    let n = e.d.len();
    Array2::from_shape_fn((n, n), |(a, b)| {
        e.w_bar[a] * e.w_bar[b] / (C64::new(1.0, 0.0) - e.d[a] * e.d[b])
    })
}

/// `U M Uᵀ`, checked real.
fn congruence(e: &EigenCache, m: &Array2<C64>, what: &str) -> Result<Array2<f64>> {
    let full = e.u.dot(m).dot(&e.u.t());
    checked_real(&full, what)
}

/// `Σ_i Ω^i ω var ωᵀ (Ωᵀ)^i` in closed form.
pub fn xx_iid(net: &Network, var: f64) -> Result<Array2<f64>> {
    xx_iid_mean(net, var, 0.0)
}

/// White input of variance `var` around a constant `mean`; the mean adds
/// `mean² s sᵀ` with `s = (I − Ω)⁻¹ ω`.
pub fn xx_iid_mean(net: &Network, var: f64, mean: f64) -> Result<Array2<f64>> {
    if !(var >= 0.0) {
        return Err(Error::param("var", "variance must be non-negative"));
    }
    let e = net.eigen()?;
    let mut xx = congruence(&e, &white_gram(&e), "i.i.d. covariance")? * var;
    if mean != 0.0 {
        let s = steady_response(net)?;
        xx = xx + outer(&s, &s) * (mean * mean);
    }
    symmetrize(&mut xx);
    Ok(xx)
}

/// Covariance for unit-variance input with `R(τ) = e^(−α|τ|)`.
///
/// Split the double sum into `i ≥ j` and its transpose, minus the doubly
/// counted diagonal: `XXᵀ = M + Mᵀ − U G Uᵀ` with
/// `M = U (G ∘ [1 / (1 − q d_b)]) Uᵀ`, `q = e^(−α)`.
pub fn xx_expcorr(net: &Network, alpha: f64) -> Result<Array2<f64>> {
    if !(alpha > 0.0) {
        return Err(Error::param("alpha", "decay exponent must be positive"));
    }
    let q = (-alpha).exp();
    let e = net.eigen()?;
    let g = white_gram(&e);
    let right: Array1<C64> = e.d.mapv(|d| 1.0 / (C64::new(1.0, 0.0) - q * d));
    let lower = &g * &right.view().insert_axis(Axis(0));
    let m = congruence(&e, &lower, "exponential covariance")?;
    let diag = congruence(&e, &g, "exponential covariance")?;
    let mut xx = &m + &m.t() - &diag;
    symmetrize(&mut xx);
    Ok(xx)
}

/// `s = (I − Ω)⁻¹ ω`.
pub fn steady_response(net: &Network) -> Result<Array1<f64>> {
    let n = net.n();
    let a = Array2::eye(n) - net.w();
    solve_general(&a, &net.w_in().to_owned())
}

/// Delay covariances `XYᵀ_τ` for `τ = 0, 1, 2, …` in `O(N²)` per lag.
///
/// For exponential input the finite part `S_τ = Σ_{i≤τ} q^{τ−i} Ω^i ω`
/// follows the Horner step `S_τ = q S_{τ−1} + Ω^τ ω`, and the tail is
/// `Σ_{i>τ} q^{i−τ} Ω^i ω = q (I − qΩ)⁻¹ Ω^{τ+1} ω`.
pub struct DelayCovariances<'a> {
    net: &'a Network,
    kind: DelayKind,
    tau: usize,
    power: Array1<f64>,
    next_power: Array1<f64>,
    finite: Array1<f64>,
}

enum DelayKind {
    Iid { var: f64, offset: Option<Array1<f64>> },
    Exponential { q: f64, lu: LUFactorized<ndarray::OwnedRepr<f64>> },
}

impl<'a> DelayCovariances<'a> {
    pub fn new(net: &'a Network, model: &InputModel) -> Result<Self> {
        let kind = match model {
            InputModel::Iid { var, mean } => DelayKind::Iid {
                var: *var,
                offset: if *mean != 0.0 {
                    Some(steady_response(net)? * (mean * mean))
                } else {
                    None
                },
            },
            InputModel::Exponential { alpha } => {
                if !(*alpha > 0.0) {
                    return Err(Error::param("alpha", "decay exponent must be positive"));
                }
                let q = (-alpha).exp();
                let a = Array2::eye(net.n()) - &net.w() * q;
                let lu = a
                    .factorize()
                    .map_err(|e| Error::Singular(format!("I − qΩ: {e}")))?;
                DelayKind::Exponential { q, lu }
            }
            InputModel::Empirical(_) => {
                return Err(Error::param(
                    "input_model",
                    "empirical correlations have no closed form; use the sum backend",
                ))
            }
        };
        let n = net.n();
        Ok(Self {
            net,
            kind,
            tau: 0,
            power: net.w_in().to_owned(),
            next_power: Array1::zeros(n),
            finite: Array1::zeros(n),
        })
    }

    /// Covariance at the current lag, then advances to the next one.
    pub fn next_xy(&mut self) -> Result<Array1<f64>> {
        let xy = match &self.kind {
            DelayKind::Iid { var, offset } => {
                let mut xy = &self.power * *var;
                if let Some(o) = offset {
                    xy += o;
                }
                xy
            }
            DelayKind::Exponential { q, lu } => {
                self.finite = &self.finite * *q + &self.power;
                general_mat_vec_mul(1.0, &self.net.w(), &self.power, 0.0, &mut self.next_power);
                let tail = lu
                    .solve(&self.next_power)
                    .map_err(|e| Error::Singular(format!("I − qΩ: {e}")))?;
                &self.finite + &(tail * *q)
            }
        };
        if matches!(self.kind, DelayKind::Iid { .. }) {
            general_mat_vec_mul(1.0, &self.net.w(), &self.power, 0.0, &mut self.next_power);
        }
        std::mem::swap(&mut self.power, &mut self.next_power);
        self.tau += 1;
        if !xy.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite XY at lag {}", self.tau - 1)));
        }
        Ok(xy)
    }

    /// Lag that the next call to [`Self::next_xy`] returns.
    pub fn lag(&self) -> usize {
        self.tau
    }
}

/// `XYᵀ_τ = Σ_i Ω^i ω e^(−α|i−τ|)` in closed form.
pub fn xy_delay(net: &Network, alpha: f64, tau: usize) -> Result<Array1<f64>> {
    xy_delay_model(net, &InputModel::Exponential { alpha }, tau)
}

pub fn xy_delay_model(net: &Network, model: &InputModel, tau: usize) -> Result<Array1<f64>> {
    let mut it = DelayCovariances::new(net, model)?;
    for _ in 0..tau {
        it.next_xy()?;
    }
    it.next_xy()
}
