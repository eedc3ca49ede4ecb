//! Frequency-domain evaluation of the covariances and the memory function.
//!
//! With `R(τ) = (1/2π) ∫ S(f) e^{ifτ} df` over one period, the normalized
//! integral `(1/2π) ∫ … df` is exactly the mean over a uniform periodic
//! grid of the integrand, which the trapezoid rule computes with spectral
//! accuracy for smooth periodic integrands. Grids are doubled until the
//! result stops changing.
//!
//! For a delay-`τ` target the cross-covariance is
//! `XYᵀ_τ = (1/2π) ∫ (I − e^{if}Ω)⁻¹ ω e^{−ifτ} S_uŷ(f) df`, where `S_uŷ` is
//! the cross-spectrum at lag zero (equal to `S_uu` for reconstruction).

use ndarray::{Array1, Array2, Axis};
use ndarray_linalg::Inverse;

use crate::linalg::{checked_real, rel_frobenius, solve_complex, symmetrize, C64};
use crate::par::Exec;
use crate::reservoir::{EigenCache, Network};
use crate::signal::{FrequencyGrid, Spectrum};
use crate::{Error, Result};

/// Quadrature controls shared by the spectral routines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralOptions {
    /// Starting number of nodes.
    pub initial: usize,
    /// Refinement stops with an error once the grid would exceed this.
    pub max_size: usize,
    /// Relative change between successive doublings that counts as converged.
    pub rel_tol: f64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            initial: 1024,
            max_size: 1 << 16,
            rel_tol: 1e-6,
        }
    }
}

/// Runs `eval` on successively doubled grids until two consecutive values
/// differ by less than `tol` according to `dist`. A sampled spectrum pins
/// the grid and is evaluated once.
fn refine<T>(
    spectrum: &Spectrum,
    opts: &SpectralOptions,
    eval: impl Fn(&FrequencyGrid) -> Result<T>,
    dist: impl Fn(&T, &T) -> f64,
    what: &str,
) -> Result<T> {
    if let Some(g) = spectrum.fixed_grid() {
        return eval(&g);
    }
    if opts.initial == 0 {
        return Err(Error::param("initial", "grid size must be positive"));
    }
    let mut grid = FrequencyGrid::new(opts.initial);
    let mut prev = eval(&grid)?;
    loop {
        grid = grid.refined();
        if grid.size > opts.max_size {
            return Err(Error::NoConvergence(format!(
                "{what}: quadrature not converged at {} nodes",
                grid.size / 2
            )));
        }
        let cur = eval(&grid)?;
        let d = dist(&cur, &prev);
        log::trace!("{what}: {} nodes, change {d:.3e}", grid.size);
        if d < opts.rel_tol {
            return Ok(cur);
        }
        prev = cur;
    }
}

fn check_grid(spectrum: &Spectrum, grid: &FrequencyGrid) -> Result<()> {
    if let Some(g) = spectrum.fixed_grid() {
        if g != *grid {
            return Err(Error::param(
                "spectrum",
                "sampled spectrum is tied to a different frequency grid",
            ));
        }
    }
    Ok(())
}

/// `XXᵀ = (1/2π) ∫ (I − e^{if}Ω)⁻¹ ω S(f) ωᵀ (I − e^{−if}Ωᵀ)⁻¹ df`.
///
/// Uses one complex linear solve per node, independent of the
/// eigendecomposition.
pub fn xx_spectral(net: &Network, s: &Spectrum, opts: &SpectralOptions) -> Result<Array2<f64>> {
    refine(
        s,
        opts,
        |g| xx_on_grid(net, s, g),
        |a, b| rel_frobenius(a.view(), b.view()),
        "xx_spectral",
    )
}

/// Single-grid version of [`xx_spectral`].
pub fn xx_on_grid(net: &Network, s: &Spectrum, grid: &FrequencyGrid) -> Result<Array2<f64>> {
    check_grid(s, grid)?;
    let n = net.n();
    let m = grid.size;
    let w: Array2<C64> = net.w().mapv(|x| C64::new(x, 0.0));
    let w_in: Array1<C64> = net.w_in().mapv(|x| C64::new(x, 0.0));
    let eye: Array2<C64> = Array2::eye(n);
    let rows = Exec::default().map_range(m, |j| {
        let z = C64::from_polar(1.0, grid.frequency(j));
        let a = &eye - &(&w * z);
        solve_complex(&a, &w_in).map(|v| (v, s.eval(grid, j)))
    });
    let mut weighted = Array2::<C64>::zeros((m, n));
    let mut conj = Array2::<C64>::zeros((m, n));
    for (j, r) in rows.into_iter().enumerate() {
        let (v, sj) = r?;
        weighted.row_mut(j).assign(&(&v * sj));
        conj.row_mut(j).assign(&v.mapv(|z| z.conj()));
    }
    let xx = weighted.t().dot(&conj) / m as f64;
    let mut xx = checked_real(&xx, "xx_spectral")?;
    symmetrize(&mut xx);
    Ok(xx)
}

/// Per-node resolvent factors `Φ_ja = 1 / (1 − e^{i f_j} d_a)`.
fn resolvent(e: &EigenCache, grid: &FrequencyGrid, sign: f64) -> Array2<C64> {
    let n = e.d.len();
    Array2::from_shape_fn((grid.size, n), |(j, a)| {
        let z = C64::from_polar(1.0, sign * grid.frequency(j));
        1.0 / (C64::new(1.0, 0.0) - z * e.d[a])
    })
}

/// `C = (1/2π) ∫ [w̄ / (1 − e^{if} d)] ⊗ [w̄ / (1 − e^{−if} d)] S_uu(f) df`,
/// the state covariance in the eigenbasis (`XXᵀ = U C Uᵀ`).
pub fn c_matrix(e: &EigenCache, s_uu: &Spectrum, grid: &FrequencyGrid) -> Result<Array2<C64>> {
    check_grid(s_uu, grid)?;
    let m = grid.size;
    let wb = e.w_bar.view().insert_axis(Axis(0));
    let plus = resolvent(e, grid, 1.0) * wb;
    let minus = resolvent(e, grid, -1.0) * wb;
    let sv: Array1<C64> = (0..m).map(|j| s_uu.eval(grid, j)).collect();
    let weighted = plus * sv.view().insert_axis(Axis(1));
    Ok(weighted.t().dot(&minus) / m as f64)
}

/// `g_a(τ) = (1/2π) ∫ e^{−ifτ} S_uŷ(f) / (1 − e^{if} d_a) df`; the
/// eigenbasis cross-covariance is `w̄ ∘ g`.
fn g_vector(e: &EigenCache, s_uy: &Spectrum, grid: &FrequencyGrid, tau: usize) -> Array1<C64> {
    let n = e.d.len();
    let m = grid.size;
    let mut g = Array1::<C64>::zeros(n);
    for j in 0..m {
        let f = grid.frequency(j);
        let w = C64::from_polar(1.0, -f * tau as f64) * s_uy.eval(grid, j);
        let z = C64::from_polar(1.0, f);
        for a in 0..n {
            g[a] += w / (C64::new(1.0, 0.0) - z * e.d[a]);
        }
    }
    g / m as f64
}

fn input_power(s_uu: &Spectrum, grid: &FrequencyGrid) -> Result<f64> {
    let p: C64 = (0..grid.size).map(|j| s_uu.eval(grid, j)).sum::<C64>() / grid.size as f64;
    if !(p.re > 0.0) || p.im.abs() > 1e-9 * p.re.abs().max(1.0) {
        return Err(Error::ZeroVariance);
    }
    Ok(p.re)
}

fn real_scalar(z: C64, what: &str) -> Result<f64> {
    if z.im.abs() > 1e-9 * z.re.abs().max(1.0) || !z.re.is_finite() {
        return Err(Error::Numerical(format!(
            "{what}: imaginary residue {:.3e}",
            z.im
        )));
    }
    Ok(z.re)
}

/// `m(τ) = w̄ᵀ (A ∘ C⁻¹) w̄ / R_uu(0)` with `A = g(τ) g(τ)ᵀ`.
///
/// `C⁻¹` is the ordinary matrix inverse; the delay enters through
/// `e^{−ifτ}` so that `A` pairs with the time-domain definition.
pub fn memory_spectral(
    net: &Network,
    s_uu: &Spectrum,
    s_uy: &Spectrum,
    tau: usize,
    opts: &SpectralOptions,
) -> Result<f64> {
    let e = net.eigen()?;
    let eval = |grid: &FrequencyGrid| -> Result<f64> {
        check_grid(s_uy, grid)?;
        let c = c_matrix(&e, s_uu, grid)?;
        let g = g_vector(&e, s_uy, grid, tau);
        let a = &e.w_bar * &g;
        if a.iter().all(|z| z.norm() == 0.0) {
            return Ok(0.0);
        }
        let x = solve_complex(&c, &a)?;
        let m = real_scalar(a.dot(&x), "memory_spectral")?;
        Ok(m / input_power(s_uu, grid)?)
    };
    refine(s_uu, opts, eval, |a, b| (a - b).abs(), "memory_spectral")
}

/// `Σ_τ m(τ) = w̄ᵀ (B ∘ C⁻¹) w̄ / R_uu(0)` with
/// `B_ab = (1/2π)² ∬ F_a(f) F_b(f′) / (1 − e^{−i(f+f′)}) df df′` and
/// `F_a(f) = S_uŷ(f) / (1 − e^{if} d_a)`.
///
/// As a distribution the kernel is `π δ(f+f′) + ½ − (i/2) cot((f+f′)/2)`.
/// The second grid is offset by half a cell so no node pair sits on the
/// pole; the symmetric node pairs around it then realize the principal
/// value, and the delta part is added separately as
/// `(1/4π) ∫ F_a(f) F_b(−f) df`.
pub fn total_memory_spectral(
    net: &Network,
    s_uu: &Spectrum,
    s_uy: &Spectrum,
    opts: &SpectralOptions,
) -> Result<f64> {
    if s_uu.fixed_grid().is_some() || s_uy.fixed_grid().is_some() {
        return Err(Error::param(
            "spectrum",
            "the double integral needs a spectrum that can be evaluated off-grid",
        ));
    }
    let e = net.eigen()?;
    let n = net.n();
    let eval = |grid: &FrequencyGrid| -> Result<f64> {
        let m = grid.size;
        let shifted = FrequencyGrid::with_offset(m, 0.5);
        let c = c_matrix(&e, s_uu, grid)?;
        let c_inv = c
            .inv()
            .map_err(|err| Error::Singular(format!("C matrix: {err}")))?;
        let f_rows = |g: &FrequencyGrid| -> Array2<C64> {
            let r = resolvent(&e, g, 1.0);
            let sv: Array1<C64> = (0..m).map(|j| s_uy.eval(g, j)).collect();
            r * sv.view().insert_axis(Axis(1))
        };
        let f = f_rows(grid);
        let fs = f_rows(&shifted);
        // f_j + f'_k depends only on (j + k) mod M.
        let kernel: Vec<C64> = (0..m)
            .map(|s| {
                let theta = grid.frequency(0) + shifted.frequency(s);
                1.0 / (C64::new(1.0, 0.0) - C64::from_polar(1.0, -theta))
            })
            .collect();
        let h_rows = Exec::default().map_range(m, |j| {
            let mut h = Array1::<C64>::zeros(n);
            for k in 0..m {
                h.scaled_add(kernel[(j + k) % m], &fs.row(k));
            }
            h / m as f64
        });
        let mut h = Array2::<C64>::zeros((m, n));
        for (j, r) in h_rows.into_iter().enumerate() {
            h.row_mut(j).assign(&r);
        }
        let mut b = f.t().dot(&h) / m as f64;
        // Delta term: −f_j is node (M − j) mod M of the unshifted grid.
        let mut mirrored = Array2::<C64>::zeros((m, n));
        for j in 0..m {
            mirrored.row_mut(j).assign(&f.row((m - j) % m));
        }
        b = b + f.t().dot(&mirrored) / (2.0 * m as f64);
        let wb = &e.w_bar;
        let mut acc = C64::new(0.0, 0.0);
        for a in 0..n {
            for bb in 0..n {
                acc += wb[a] * b[[a, bb]] * c_inv[[a, bb]] * wb[bb];
            }
        }
        Ok(real_scalar(acc, "total_memory_spectral")? / input_power(s_uu, grid)?)
    };
    refine(
        s_uu,
        opts,
        eval,
        |a, b| (a - b).abs() / b.abs().max(1.0),
        "total_memory_spectral",
    )
}

/// The eigenbasis state covariance `C` on `grid`.
pub fn spectral_operators(net: &Network, s_uu: &Spectrum, grid: &FrequencyGrid) -> Result<Array2<C64>> {
    let e = net.eigen()?;
    c_matrix(&e, s_uu, grid)
}
