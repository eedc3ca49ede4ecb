//! Network construction and the linear state recursion.

use std::sync::Arc;

use ndarray::linalg::general_mat_vec_mul;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ShapeBuilder};
use ndarray_linalg::{Eig, Inverse};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{norm_one, C64};
use crate::signal::Signal;
use crate::{seeded_rng, Error, Result};

/// Eigenvectors whose condition number exceeds this are treated as defective.
pub const MAX_EIGVEC_COND: f64 = 1e12;
/// Largest tolerated `‖U diag(d) U⁻¹ − W‖_max`.
pub const MAX_RECONSTRUCTION_ERROR: f64 = 1e-8;

/// `W = U diag(d) U⁻¹` together with the transformed input `w̄ = U⁻¹ w_in`.
#[derive(Clone, Debug)]
pub struct EigenCache {
    pub u: Array2<C64>,
    pub d: Array1<C64>,
    pub u_inv: Array2<C64>,
    pub w_bar: Array1<C64>,
    /// `‖U‖₁ ‖U⁻¹‖₁`.
    pub cond: f64,
    pub residual: f64,
}

/// Recurrent weights `W`, input weights `w_in` and an optional cached
/// eigendecomposition. Immutable once built: every transformation returns a
/// new network with the cache dropped.
#[derive(Clone, Debug)]
pub struct Network {
    w: Array2<f64>,
    w_in: Array1<f64>,
    spectral_radius: f64,
    seed: Option<u64>,
    ell: usize,
    eig: Option<Arc<EigenCache>>,
}

impl Network {
    /// Wraps arbitrary weights; the spectral radius is computed and must be
    /// below one.
    pub fn new(w: Array2<f64>, w_in: Array1<f64>) -> Result<Self> {
        let n = w.nrows();
        if n == 0 || w.ncols() != n {
            return Err(Error::param("w", "expected a non-empty square matrix"));
        }
        if w_in.len() != n {
            return Err(Error::LengthMismatch {
                left: n,
                right: w_in.len(),
            });
        }
        if !w.iter().chain(w_in.iter()).all(|x| x.is_finite()) {
            return Err(Error::param("w", "weights must be finite"));
        }
        let rho = spectral_radius(w.view())?;
        if !(rho < 1.0) {
            return Err(Error::param(
                "w",
                format!("spectral radius {rho} violates the echo state condition (< 1)"),
            ));
        }
        Ok(Self {
            w,
            w_in,
            spectral_radius: rho,
            seed: None,
            ell: 0,
            eig: None,
        })
    }

    /// `n` nodes with no recurrent coupling.
    pub fn zero(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", "must be positive"));
        }
        Self::new(Array2::zeros((n, n)), Array1::zeros(n))
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn w(&self) -> ArrayView2<'_, f64> {
        self.w.view()
    }

    pub fn w_in(&self) -> ArrayView1<'_, f64> {
        self.w_in.view()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Number of randomized links.
    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn eig_cache(&self) -> Option<&EigenCache> {
        self.eig.as_deref()
    }

    pub fn with_input_weights(mut self, w_in: Array1<f64>) -> Result<Self> {
        if w_in.len() != self.n() {
            return Err(Error::LengthMismatch {
                left: self.n(),
                right: w_in.len(),
            });
        }
        if !w_in.iter().all(|x| x.is_finite()) {
            return Err(Error::param("w_in", "weights must be finite"));
        }
        self.w_in = w_in;
        self.eig = None;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// The cached decomposition, or a freshly computed one.
    pub fn eigen(&self) -> Result<Arc<EigenCache>> {
        match &self.eig {
            Some(e) => Ok(Arc::clone(e)),
            None => Ok(Arc::new(decompose(self.w.view(), self.w_in.view())?)),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&NetworkDoc::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: NetworkDoc = serde_json::from_str(s)?;
        let n = doc.n;
        if doc.w.len() != n * n {
            return Err(Error::LengthMismatch {
                left: n * n,
                right: doc.w.len(),
            });
        }
        let w = Array2::from_shape_vec((n, n), doc.w)
            .map_err(|e| Error::Config(format!("network matrix: {e}")))?;
        let mut net = Network::new(w, Array1::from(doc.w_in))?;
        net.spectral_radius = doc.lambda;
        net.seed = doc.seed;
        net.ell = doc.ell;
        Ok(net)
    }
}

#[derive(Serialize, Deserialize)]
struct NetworkDoc {
    n: usize,
    lambda: f64,
    seed: Option<u64>,
    ell: usize,
    w: Vec<f64>,
    w_in: Vec<f64>,
}

impl From<&Network> for NetworkDoc {
    fn from(net: &Network) -> Self {
        Self {
            n: net.n(),
            lambda: net.spectral_radius,
            seed: net.seed,
            ell: net.ell,
            w: net.w.iter().copied().collect(),
            w_in: net.w_in.to_vec(),
        }
    }
}

/// Ring of `n` nodes, `W[(i+1) mod n, i] = λ`, with zero input weights.
pub fn ring_network(n: usize, lambda: f64) -> Result<Network> {
    if n == 0 {
        return Err(Error::param("n", "must be positive"));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::param("lambda", format!("{lambda} is outside (0, 1)")));
    }
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        w[[(i + 1) % n, i]] = lambda;
    }
    Ok(Network {
        w,
        w_in: Array1::zeros(n),
        spectral_radius: lambda,
        seed: None,
        ell: 0,
        eig: None,
    })
}

/// Replaces `ell` distinct entries of `W`, drawn uniformly from all `N²`
/// positions, by fresh standard normal values. With `rescale` the result is
/// scaled back to the original spectral radius.
pub fn randomize_links(net: &Network, ell: usize, seed: u64, rescale: bool) -> Result<Network> {
    let n = net.n();
    if ell > n * n {
        return Err(Error::param("ell", format!("{ell} exceeds N² = {}", n * n)));
    }
    if ell == 0 {
        return Ok(net.clone());
    }
    let mut rng = seeded_rng(seed, 2);
    let mut w = net.w.clone();
    for pos in rand::seq::index::sample(&mut rng, n * n, ell).into_iter() {
        w[[pos / n, pos % n]] = rng.sample(StandardNormal);
    }
    let rho = spectral_radius(w.view())?;
    let target = net.spectral_radius;
    if rescale && rho > 0.0 {
        w.mapv_inplace(|x| x * target / rho);
    }
    let mut out = Network::new(w, net.w_in.clone())?;
    if rescale && rho > 0.0 {
        out.spectral_radius = target;
    }
    out.seed = Some(seed);
    out.ell = ell;
    Ok(out)
}

/// Equiprobable `±scale` entries.
pub fn input_weights(n: usize, seed: u64, scale: f64) -> Array1<f64> {
    let mut rng = seeded_rng(seed, 3);
    (0..n)
        .map(|_| if rng.random::<bool>() { scale } else { -scale })
        .collect()
}

/// Largest eigenvalue magnitude.
pub fn spectral_radius(w: ArrayView2<'_, f64>) -> Result<f64> {
    if w.nrows() == 0 || w.ncols() != w.nrows() {
        return Err(Error::param("w", "expected a non-empty square matrix"));
    }
    if w.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let (d, _) = w.to_owned().eig()?;
    Ok(d.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Returns a copy of `net` with the eigendecomposition cached.
///
/// Fails with [`Error::Defective`] when `W` is too close to defective for
/// the eigenbasis formulas to be trusted.
pub fn eig_decompose(net: &Network) -> Result<Network> {
    let cache = decompose(net.w.view(), net.w_in.view())?;
    let mut out = net.clone();
    out.eig = Some(Arc::new(cache));
    Ok(out)
}

fn decompose(w: ArrayView2<'_, f64>, w_in: ArrayView1<'_, f64>) -> Result<EigenCache> {
    let (d, u) = w.to_owned().eig()?;
    let u_inv = match u.inv() {
        Ok(m) => m,
        Err(_) => {
            return Err(Error::Defective {
                cond: f64::INFINITY,
                residual: f64::NAN,
            })
        }
    };
    let cond = norm_one(&u) * norm_one(&u_inv);
    let scaled = &u * &d.view().insert_axis(ndarray::Axis(0));
    let recon = scaled.dot(&u_inv);
    let residual = recon
        .iter()
        .zip(w.iter())
        .map(|(z, &x)| (z - x).norm())
        .fold(0.0, f64::max);
    if !(cond <= MAX_EIGVEC_COND) || !(residual <= MAX_RECONSTRUCTION_ERROR) {
        return Err(Error::Defective { cond, residual });
    }
    let w_bar = u_inv.dot(&w_in.mapv(|x| C64::new(x, 0.0)));
    Ok(EigenCache {
        u,
        d,
        u_inv,
        w_bar,
        cond,
        residual,
    })
}

/// Post-washout states. Column `k` holds the state after consuming input
/// `washout + k`, so it depends on `u_0 ..= u_{washout+k}`.
#[derive(Clone, Debug)]
pub struct StateTrajectory {
    x: Array2<f64>,
    washout: usize,
}

impl StateTrajectory {
    pub fn states(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.x.ncols() == 0
    }

    pub fn washout(&self) -> usize {
        self.washout
    }

    /// Columns `[start, end)`; the washout of the result accounts for the
    /// dropped leading columns.
    pub fn window(&self, start: usize, end: usize) -> Result<StateTrajectory> {
        if start >= end || end > self.len() {
            return Err(Error::param(
                "window",
                format!("[{start}, {end}) is not a non-empty range within {}", self.len()),
            ));
        }
        Ok(StateTrajectory {
            x: self.x.slice(s![.., start..end]).to_owned(),
            washout: self.washout + start,
        })
    }

    /// Sample second moment `X Xᵀ / T`.
    pub fn gram(&self) -> Array2<f64> {
        let t = self.len() as f64;
        self.x.dot(&self.x.t()) / t
    }

    /// Sample cross moment `X y / T`.
    pub fn cross(&self, y: &[f64]) -> Result<Array1<f64>> {
        if y.len() != self.len() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: y.len(),
            });
        }
        let t = self.len() as f64;
        Ok(self.x.dot(&ArrayView1::from(y)) / t)
    }
}

/// Drives `net` from the zero state with `u` and keeps every state after
/// the first `washout` inputs.
pub fn run_reservoir(net: &Network, u: &Signal, washout: usize) -> Result<StateTrajectory> {
    let t = u.len();
    if washout >= t {
        return Err(Error::param(
            "washout",
            format!("{washout} leaves no samples from a signal of length {t}"),
        ));
    }
    let n = net.n();
    let mut x = Array2::zeros((n, t - washout).f());
    let mut state = Array1::<f64>::zeros(n);
    let mut next = Array1::<f64>::zeros(n);
    for (step, &ut) in u.samples().iter().enumerate() {
        next.assign(&net.w_in);
        general_mat_vec_mul(1.0, &net.w, &state, ut, &mut next);
        std::mem::swap(&mut state, &mut next);
        if step >= washout {
            x.column_mut(step - washout).assign(&state);
        }
    }
    if !x.iter().all(|v: &f64| v.is_finite()) {
        return Err(Error::Numerical("state trajectory overflowed".into()));
    }
    Ok(StateTrajectory { x, washout })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn sorted_by_angle(d: &Array1<C64>) -> Vec<C64> {
        let mut v = d.to_vec();
        v.sort_by(|a, b| a.arg().partial_cmp(&b.arg()).unwrap());
        v
    }

    #[test]
    fn ring_of_one_is_self_loop() {
        let net = ring_network(1, 0.9).unwrap();
        assert_eq!(net.w(), array![[0.9]]);
    }

    #[test]
    fn ring_rejects_lambda_outside_unit_interval() {
        assert!(ring_network(3, 0.0).is_err());
        assert!(ring_network(3, 1.0).is_err());
        assert!(ring_network(0, 0.5).is_err());
    }

    #[test]
    fn ring_spectrum_is_scaled_roots_of_unity() {
        let net = ring_network(3, 0.5).unwrap();
        let e = eig_decompose(&net).unwrap();
        let d = sorted_by_angle(&e.eig_cache().unwrap().d);
        let expect = [
            C64::from_polar(0.5, -2.0 * std::f64::consts::PI / 3.0),
            C64::new(0.5, 0.0),
            C64::from_polar(0.5, 2.0 * std::f64::consts::PI / 3.0),
        ];
        for (a, b) in d.iter().zip(expect.iter()) {
            assert!((a - b).norm() < 1e-12);
        }

        let e4 = eig_decompose(&ring_network(4, 0.9).unwrap()).unwrap();
        for z in e4.eig_cache().unwrap().d.iter() {
            assert!((z.powu(4) - C64::new(0.9f64.powi(4), 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn spectral_radius_examples() {
        assert!((spectral_radius(Array2::eye(3).view()).unwrap() - 1.0).abs() < 1e-14);
        let net = ring_network(5, 0.7).unwrap();
        assert!((spectral_radius(net.w()).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(spectral_radius(Array2::zeros((4, 4)).view()).unwrap(), 0.0);
    }

    #[test]
    fn diagonal_matrix_decomposes_trivially() {
        let w = Array2::from_diag(&array![0.1, -0.4, 0.7]);
        let net = Network::new(w, array![1.0, 1.0, 1.0]).unwrap();
        let e = eig_decompose(&net).unwrap();
        let c = e.eig_cache().unwrap();
        let mut d: Vec<f64> = c.d.iter().map(|z| z.re).collect();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(d, vec![-0.4, 0.1, 0.7]);
        for z in c.u.iter() {
            assert!(z.norm() < 1e-14 || (z.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn perturbed_ring_reconstructs() {
        let net = ring_network(20, 0.9)
            .unwrap()
            .with_input_weights(input_weights(20, 1, 0.1))
            .unwrap();
        let p = randomize_links(&net, 40, 5, true).unwrap();
        let e = eig_decompose(&p).unwrap();
        assert!(e.eig_cache().unwrap().residual < 1e-8);
    }

    #[test]
    fn defective_matrix_is_rejected() {
        let w = array![[0.5, 1.0], [0.0, 0.5]];
        let net = Network::new(w, array![1.0, 1.0]).unwrap();
        assert!(matches!(eig_decompose(&net), Err(Error::Defective { .. })));
    }

    #[test]
    fn randomize_zero_links_is_identity() {
        let net = ring_network(6, 0.8).unwrap();
        let p = randomize_links(&net, 0, 3, true).unwrap();
        assert_eq!(p.w(), net.w());
    }

    #[test]
    fn randomize_rescales_and_is_deterministic() {
        let net = ring_network(100, 0.9).unwrap();
        let a = randomize_links(&net, 5000, 11, true).unwrap();
        let b = randomize_links(&net, 5000, 11, true).unwrap();
        assert_eq!(a.w(), b.w());
        assert!((spectral_radius(a.w()).unwrap() - 0.9).abs() < 1e-10);
        assert!(randomize_links(&net, 10_001, 11, true).is_err());
    }

    #[test]
    fn input_weight_signs() {
        let w = input_weights(1, 4, 0.1);
        assert!(w[0] == 0.1 || w[0] == -0.1);
        let w = input_weights(10_000, 4, 0.1);
        let plus = w.iter().filter(|&&x| x == 0.1).count();
        assert!(w.iter().all(|&x| x.abs() == 0.1));
        assert!((plus as f64 / 1e4 - 0.5).abs() < 0.02);
        assert_eq!(w, input_weights(10_000, 4, 0.1));
    }

    #[test]
    fn single_step_without_recurrence() {
        let net = Network::zero(2)
            .unwrap()
            .with_input_weights(array![0.1, 0.0])
            .unwrap();
        let u = Signal::from_samples(vec![5.0]).unwrap();
        let x = run_reservoir(&net, &u, 0).unwrap();
        assert_eq!(x.states(), array![[0.5], [0.0]]);
    }

    #[test]
    fn geometric_decay() {
        let net = Network::new(array![[0.5]], array![1.0]).unwrap();
        let u = Signal::from_samples(vec![1.0, 0.0, 0.0]).unwrap();
        let x = run_reservoir(&net, &u, 0).unwrap();
        assert_eq!(x.states(), array![[1.0, 0.5, 0.25]]);
        assert!(run_reservoir(&net, &u, 3).is_err());
        let tail = run_reservoir(&net, &u, 1).unwrap();
        assert_eq!(tail.states(), array![[0.5, 0.25]]);
        assert_eq!(tail.washout(), 1);
    }

    #[test]
    fn json_round_trip() {
        let net = ring_network(4, 0.6)
            .unwrap()
            .with_input_weights(input_weights(4, 2, 0.1))
            .unwrap();
        let p = randomize_links(&net, 3, 9, true).unwrap();
        let back = Network::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(back.w(), p.w());
        assert_eq!(back.w_in(), p.w_in());
        assert_eq!(back.ell(), 3);
        assert_eq!(back.seed(), Some(9));
    }
}
