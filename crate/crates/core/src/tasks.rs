//! Benchmark targets: delayed reconstruction, NARMA10 and Mackey-Glass
//! prediction.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::signal::{standardize, CorrelationFunction, Signal, SignalMeta};
use crate::{Error, Result};

/// A target series whose first `valid_from` entries are undefined (`NaN`)
/// and must be kept out of any regression window.
#[derive(Clone, Debug, PartialEq)]
pub struct Target {
    pub values: Vec<f64>,
    pub valid_from: usize,
}

impl Target {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The defined part of the series.
    pub fn valid(&self) -> &[f64] {
        &self.values[self.valid_from..]
    }

    /// Delays the target further by `tau` steps.
    pub fn delay(&self, tau: usize) -> Result<Target> {
        let n = self.values.len();
        if tau >= n {
            return Err(Error::LagOutOfRange { lag: tau, len: n });
        }
        let mut values = vec![f64::NAN; n];
        values[tau..].copy_from_slice(&self.values[..n - tau]);
        Ok(Target {
            values,
            valid_from: (self.valid_from + tau).min(n),
        })
    }
}

/// `target_t = u_{t−τ}`.
pub fn delay_target(u: &Signal, tau: usize) -> Result<Target> {
    Target {
        values: u.samples().to_vec(),
        valid_from: 0,
    }
    .delay(tau)
}

/// Coefficients of `y_t = α y_{t−1} + β y_{t−1} Σ_{i=1}^{10} y_{t−i} + γ u_{t−10} u_{t−1} + δ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NarmaParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Default for NarmaParams {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            beta: 0.05,
            gamma: 1.5,
            delta: 0.1,
        }
    }
}

/// NARMA10 recursion order.
pub const NARMA_ORDER: usize = 10;
/// Leading outputs dominated by the zero initial history.
pub const NARMA_TRANSIENT: usize = 50;
const NARMA_LIMIT: f64 = 1e3;

/// NARMA10 output for input `u`, one value per input sample. History
/// before the first sample is zero; `|y| > 10³` aborts as divergent.
pub fn narma10(u: &Signal, p: &NarmaParams) -> Result<Signal> {
    let u = u.samples();
    let mut y = vec![0.0; u.len()];
    let at = |v: &[f64], i: isize| if i >= 0 { v[i as usize] } else { 0.0 };
    for t in 0..u.len() {
        let ti = t as isize;
        let prev = at(&y, ti - 1);
        let window: f64 = (1..=NARMA_ORDER as isize).map(|i| at(&y, ti - i)).sum();
        let v = p.alpha * prev
            + p.beta * prev * window
            + p.gamma * at(u, ti - NARMA_ORDER as isize) * at(u, ti - 1)
            + p.delta;
        if !(v.abs() <= NARMA_LIMIT) {
            return Err(Error::Diverged { step: t, value: v.abs() });
        }
        y[t] = v;
    }
    Signal::new(
        y,
        SignalMeta::new("narma10")
            .with_param("alpha", p.alpha)
            .with_param("beta", p.beta)
            .with_param("gamma", p.gamma)
            .with_param("delta", p.delta),
    )
}

/// How the delayed state between stored grid points is reconstructed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayInterpolation {
    Linear,
    /// Cubic Hermite through stored values and derivatives.
    #[default]
    Hermite,
}

/// Mackey-Glass `dx/dt = β x(t−τ) / (1 + x(t−τ)^n) − γ x(t)` and its
/// discretization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MGParams {
    pub beta: f64,
    pub gamma: f64,
    pub n_exp: f64,
    pub tau_delay: f64,
    pub dt: f64,
    /// Integration steps per emitted sample.
    pub subsample: usize,
    /// Emitted samples discarded before collection.
    pub burn_in: usize,
    pub interpolation: DelayInterpolation,
}

impl Default for MGParams {
    fn default() -> Self {
        Self {
            beta: 2.0,
            gamma: 1.0,
            n_exp: 9.7451,
            tau_delay: 2.0,
            dt: 0.05,
            subsample: 20,
            burn_in: 1000,
            interpolation: DelayInterpolation::Hermite,
        }
    }
}

impl MGParams {
    /// Integration steps spanning the delay.
    pub fn delay_steps(&self) -> Result<usize> {
        if !(self.dt > 0.0) || !(self.tau_delay > 0.0) {
            return Err(Error::param("dt", "step and delay must be positive"));
        }
        let d = self.tau_delay / self.dt;
        if (d - d.round()).abs() > 1e-9 * d.max(1.0) {
            return Err(Error::param(
                "dt",
                format!("delay {} is not a whole number of steps of {}", self.tau_delay, self.dt),
            ));
        }
        Ok(d.round() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.delay_steps()?;
        if self.subsample == 0 {
            return Err(Error::param("subsample", "must be positive"));
        }
        Ok(())
    }
}

/// Fixed-step RK4 integrator for the Mackey-Glass delay equation.
///
/// The last `τ/dt + 1` grid values and slopes live in ring buffers; the
/// delayed state at half steps is reconstructed from them.
#[derive(Clone, Debug)]
pub struct MackeyGlassIntegrator {
    p: MGParams,
    d: usize,
    xs: Vec<f64>,
    dxs: Vec<f64>,
    head: usize,
    /// Steps taken; the interval `[−dt, 0]` of a constant history is
    /// reached at step `d − 1`.
    steps: usize,
    constant_history: bool,
}

impl MackeyGlassIntegrator {
    /// Starts from the constant history `history` on `[−τ, 0]`.
    pub fn new(p: &MGParams, history: f64) -> Result<Self> {
        p.validate()?;
        if !(history > 0.0) {
            return Err(Error::param("history", "initial history must be positive"));
        }
        let d = p.delay_steps()?;
        let mut dxs = vec![0.0; d + 1];
        // Slope at t = 0 is the right derivative; the history itself is flat.
        dxs[d] = rhs(p, history, history);
        Ok(Self {
            p: *p,
            d,
            xs: vec![history; d + 1],
            dxs,
            head: d,
            steps: 0,
            constant_history: true,
        })
    }

    pub fn params(&self) -> &MGParams {
        &self.p
    }

    /// Current state `x(t)`.
    pub fn state(&self) -> f64 {
        self.xs[self.head]
    }

    /// Advances one step of `dt`.
    pub fn step(&mut self) -> Result<f64> {
        let (d, h) = (self.d, self.p.dt);
        let len = d + 1;
        let i0 = (self.head + 1) % len;
        let i1 = (i0 + 1) % len;
        let (a, b) = (self.xs[i0], self.xs[i1]);
        let mid = match self.p.interpolation {
            _ if self.constant_history && self.steps + 1 == d => a,
            DelayInterpolation::Linear => 0.5 * (a + b),
            DelayInterpolation::Hermite => 0.5 * (a + b) + h * (self.dxs[i0] - self.dxs[i1]) / 8.0,
        };
        let x = self.state();
        let p = &self.p;
        let k1 = rhs(p, x, a);
        let k2 = rhs(p, x + 0.5 * h * k1, mid);
        let k3 = rhs(p, x + 0.5 * h * k2, mid);
        let k4 = rhs(p, x + h * k3, b);
        let next = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !next.is_finite() {
            return Err(Error::Numerical(format!(
                "Mackey-Glass overflow at step {}",
                self.steps
            )));
        }
        self.head = i0;
        self.xs[i0] = next;
        // x(t + dt − τ) is the old entry i1.
        self.dxs[i0] = rhs(p, next, b);
        self.steps += 1;
        Ok(next)
    }

    /// Advances one emitted sample (`subsample` steps).
    pub fn sample(&mut self) -> Result<f64> {
        for _ in 0..self.p.subsample {
            self.step()?;
        }
        Ok(self.state())
    }

    /// Same trajectory continued with half the step: the stored history is
    /// refined by cubic Hermite interpolation.
    pub fn halved(&self) -> Result<MackeyGlassIntegrator> {
        let (d, h) = (self.d, self.p.dt);
        let p = MGParams {
            dt: h / 2.0,
            subsample: self.p.subsample * 2,
            ..self.p
        };
        if self.constant_history && self.steps < d {
            // Still inside the first delay span: replay from the history.
            let mut fine = MackeyGlassIntegrator::new(&p, self.xs[(self.head + 1) % (d + 1)])?;
            for _ in 0..2 * self.steps {
                fine.step()?;
            }
            return Ok(fine);
        }
        let len = d + 1;
        let mut xs = Vec::with_capacity(2 * d + 1);
        let mut dxs = Vec::with_capacity(2 * d + 1);
        for k in 0..=d {
            let i = (self.head + 1 + k) % len;
            xs.push(self.xs[i]);
            dxs.push(self.dxs[i]);
            if k < d {
                let j = (i + 1) % len;
                let (p0, p1, m0, m1) = (self.xs[i], self.xs[j], self.dxs[i], self.dxs[j]);
                xs.push(0.5 * (p0 + p1) + h * (m0 - m1) / 8.0);
                dxs.push(1.5 * (p1 - p0) / h - 0.25 * (m0 + m1));
            }
        }
        Ok(MackeyGlassIntegrator {
            p,
            d: 2 * d,
            xs,
            dxs,
            head: 2 * d,
            steps: 0,
            constant_history: false,
        })
    }
}

fn rhs(p: &MGParams, x: f64, xd: f64) -> f64 {
    p.beta * xd / (1.0 + xd.abs().powf(p.n_exp)) - p.gamma * x
}

/// Mackey-Glass samples, without standardization, from the constant
/// history `history` on `[−τ, 0]`. The first `burn_in` samples are dropped.
pub fn mackey_glass_raw(p: &MGParams, n_out: usize, history: f64) -> Result<Signal> {
    if n_out == 0 {
        return Err(Error::param("n_out", "must be positive"));
    }
    let mut mg = MackeyGlassIntegrator::new(p, history)?;
    for _ in 0..p.burn_in {
        mg.sample()?;
    }
    let out = (0..n_out).map(|_| mg.sample()).collect::<Result<Vec<_>>>()?;
    Signal::new(
        out,
        SignalMeta::new("mackey_glass")
            .with_param("beta", p.beta)
            .with_param("gamma", p.gamma)
            .with_param("n", p.n_exp)
            .with_param("tau", p.tau_delay)
            .with_param("dt", p.dt)
            .with_param("history", history),
    )
}

/// RMS difference over `n_compare` samples between integrating with `dt`
/// and with `dt/2`, both continued from the same state at the end of the
/// burn-in.
pub fn step_halving_rms(p: &MGParams, history: f64, n_compare: usize) -> Result<f64> {
    if n_compare == 0 {
        return Err(Error::param("n_compare", "must be positive"));
    }
    let mut coarse = MackeyGlassIntegrator::new(p, history)?;
    for _ in 0..p.burn_in {
        coarse.sample()?;
    }
    let mut fine = coarse.halved()?;
    let mut acc = 0.0;
    for _ in 0..n_compare {
        let e = coarse.sample()? - fine.sample()?;
        acc += e * e;
    }
    Ok((acc / n_compare as f64).sqrt())
}

/// Standardized Mackey-Glass series of `n_out` samples.
pub fn mackey_glass(p: &MGParams, n_out: usize, history: f64) -> Result<Signal> {
    standardize(&mackey_glass_raw(p, n_out, history)?)
}

/// `(input_t, target_t) = (s_t, s_{t+h})`, dropping the last `h` samples.
pub fn prediction_pair(series: &Signal, horizon: usize) -> Result<(Signal, Signal)> {
    let n = series.len();
    if horizon >= n {
        return Err(Error::LagOutOfRange { lag: horizon, len: n });
    }
    let s = series.samples();
    let meta = series.meta().clone();
    Ok((
        Signal::new(s[..n - horizon].to_vec(), meta.clone())?,
        Signal::new(s[horizon..].to_vec(), meta)?,
    ))
}

/// Declarative description of a benchmark target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskSpec {
    Delay { tau: usize },
    Narma10 { params: NarmaParams },
    MackeyGlass { params: MGParams, horizon: usize },
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            TaskSpec::Delay { .. } | TaskSpec::Narma10 { .. } => Ok(()),
            TaskSpec::MackeyGlass { params, horizon } => {
                if *horizon == 0 {
                    return Err(Error::param("horizon", "must be at least 1"));
                }
                params.validate()
            }
        }
    }

    /// `(R_uu, R_uŷ)` when both are known in closed form: delay
    /// reconstruction of exponentially correlated input, where
    /// `R_uŷ(i) = e^(−α|i−τ|)`.
    pub fn analytic_corr(&self, alpha: f64, max_lag: usize) -> Result<Option<(CorrelationFunction, CorrelationFunction)>> {
        match self {
            TaskSpec::Delay { tau } => {
                let ruu = CorrelationFunction::exponential(alpha, max_lag)?;
                let ruy = CorrelationFunction::empirical(
                    (0..=max_lag)
                        .map(|i| (-alpha * i.abs_diff(*tau) as f64).exp())
                        .collect(),
                )?;
                Ok(Some((ruu, ruy)))
            }
            _ => Ok(None),
        }
    }
}

/// Three-column CSV `t,u,y_target`; undefined targets are left empty.
pub fn write_task_csv<W: Write>(w: W, u: &[f64], target: &[f64]) -> Result<()> {
    if u.len() != target.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: target.len(),
        });
    }
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["t", "u", "y_target"])?;
    for (t, (a, b)) in u.iter().zip(target).enumerate() {
        let y = if b.is_finite() { format!("{b}") } else { String::new() };
        wr.write_record([t.to_string(), format!("{a}"), y])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{empirical_autocorr, gen_iid_uniform};

    #[test]
    fn delay_examples() {
        let u = Signal::from_samples(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(delay_target(&u, 0).unwrap().values, u.samples());
        let d = delay_target(&u, 2).unwrap();
        assert_eq!(d.valid_from, 2);
        assert_eq!(d.valid(), &[1.0, 2.0]);
        assert!(d.values[0].is_nan() && d.values[1].is_nan());
        let twice = delay_target(&u, 1).unwrap().delay(1).unwrap();
        assert_eq!(twice.valid(), d.valid());
        assert_eq!(twice.valid_from, 2);
        assert!(delay_target(&u, 4).is_err());
    }

    #[test]
    fn narma_first_step_is_delta() {
        let u = Signal::from_samples(vec![0.0; 5]).unwrap();
        let y = narma10(&u, &NarmaParams::default()).unwrap();
        assert_eq!(y.samples()[0], 0.1);
    }

    #[test]
    fn narma_zero_input_reaches_fixed_point() {
        // Oracle: iterate the scalar map y ← 0.3y + 0.5y² + 0.1 to 1e-12.
        let mut y = 0.0_f64;
        for _ in 0..10_000 {
            y = 0.3 * y + 0.05 * 10.0 * y * y + 0.1;
        }
        let u = Signal::from_samples(vec![0.0; 3000]).unwrap();
        let s = narma10(&u, &NarmaParams::default()).unwrap();
        let last = *s.samples().last().unwrap();
        assert!((last - y).abs() < 1e-10);
        assert!((y - 0.16148).abs() < 1e-4);
    }

    #[test]
    fn narma_bounded_on_standard_input() {
        let u = gen_iid_uniform(20_000, 0.0, 0.5, 1).unwrap();
        let y = narma10(&u, &NarmaParams::default()).unwrap();
        let tail = y.slice(NARMA_TRANSIENT, y.len()).unwrap();
        assert!(tail.mean() > 0.1 && tail.mean() < 0.4);
    }

    #[test]
    fn narma_divergence_detected() {
        let u = Signal::from_samples(vec![3.0; 200]).unwrap();
        assert!(matches!(
            narma10(&u, &NarmaParams::default()),
            Err(Error::Diverged { .. })
        ));
        // Occasional bursts also occur on the standard input range.
        let u = gen_iid_uniform(20_000, 0.0, 0.5, 2).unwrap();
        assert!(matches!(
            narma10(&u, &NarmaParams::default()),
            Err(Error::Diverged { step: 3875, .. })
        ));
    }

    #[test]
    fn narma_crosscorr_is_nontrivial() {
        let u = gen_iid_uniform(20_000, 0.0, 0.5, 5).unwrap();
        let y = narma10(&u, &NarmaParams::default()).unwrap();
        let r = crate::signal::empirical_crosscorr(&u, &y, 30).unwrap();
        assert!(r.values().iter().all(|v| *v > 0.0));
        assert!(r.at(1) > r.at(30));
    }

    #[test]
    fn mackey_glass_fixed_point() {
        for interpolation in [DelayInterpolation::Linear, DelayInterpolation::Hermite] {
            let p = MGParams {
                n_exp: 4.0,
                interpolation,
                ..MGParams::default()
            };
            let s = mackey_glass_raw(&p, 200, 1.0).unwrap();
            assert!(s.samples().iter().all(|v| (v - 1.0).abs() < 1e-12));
            assert!(matches!(mackey_glass(&p, 200, 1.0), Err(Error::ZeroVariance)));
        }
    }

    #[test]
    fn step_halving_converges_after_transient() {
        let rms = step_halving_rms(&MGParams::default(), 0.5, 100).unwrap();
        assert!(rms < 1e-4, "{rms}");
    }

    #[test]
    fn halving_inside_history_replays() {
        let p = MGParams {
            burn_in: 0,
            ..MGParams::default()
        };
        let mut a = MackeyGlassIntegrator::new(&p, 0.5).unwrap();
        for _ in 0..3 {
            a.step().unwrap();
        }
        let mut b = a.halved().unwrap();
        let fine = MGParams {
            dt: p.dt / 2.0,
            subsample: p.subsample * 2,
            ..p
        };
        let mut c = MackeyGlassIntegrator::new(&fine, 0.5).unwrap();
        for _ in 0..6 {
            c.step().unwrap();
        }
        for _ in 0..50 {
            assert_eq!(b.step().unwrap(), c.step().unwrap());
        }
    }

    #[test]
    fn mackey_glass_rejects_misaligned_step() {
        let p = MGParams {
            dt: 0.3,
            ..MGParams::default()
        };
        assert!(mackey_glass_raw(&p, 10, 0.5).is_err());
    }

    #[test]
    fn mackey_glass_is_bounded_and_correlated() {
        let s = mackey_glass(&MGParams::default(), 5000, 0.5).unwrap();
        assert!(s.mean().abs() < 1e-10 && (s.variance() - 1.0).abs() < 1e-6);
        let r = empirical_autocorr(&s, 200).unwrap();
        assert!(r.values()[51..].iter().any(|v| v.abs() > 0.1));
    }

    #[test]
    fn default_parameters_settle_on_a_cycle() {
        // With a delay of 2 the attractor is a long periodic orbit rather
        // than chaos: the series returns to itself after 188 samples.
        let s = mackey_glass(&MGParams::default(), 20_000, 1.2).unwrap();
        let r = empirical_autocorr(&s, 200).unwrap();
        assert!(r.at(188) > 0.9999, "{}", r.at(188));
    }

    #[test]
    fn prediction_pair_alignment() {
        let s = Signal::from_samples((0..10).map(f64::from).collect()).unwrap();
        let (u, y) = prediction_pair(&s, 0).unwrap();
        assert_eq!(u.samples(), y.samples());
        let (u, y) = prediction_pair(&s, 3).unwrap();
        assert_eq!(u.len(), 7);
        assert_eq!(y.samples()[0], 3.0);
        let back = delay_target(&y, 3).unwrap();
        assert_eq!(back.valid(), &u.samples()[3..]);
        assert!(prediction_pair(&s, 10).is_err());
    }

    #[test]
    fn task_csv_leaves_undefined_targets_empty() {
        let mut buf = Vec::new();
        write_task_csv(&mut buf, &[1.0, 2.0], &[f64::NAN, 1.0]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,u,y_target\n0,1,\n1,2,1\n");
    }
}
