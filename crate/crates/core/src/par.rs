//! Execution strategy for the data-parallel loops (grid sweeps, quadrature
//! nodes, correlation lags).
//!
//! With the `parallel` feature (on by default) work is spread over the rayon
//! global pool; without it every loop runs sequentially. Results are always
//! collected in input order, so both strategies produce identical output.

use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::Result;

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Sets the strategy returned by [`Exec::default`] for the whole process.
/// Output does not depend on this choice, only wall time does.
pub fn set_default_exec(exec: Exec) {
    FORCE_SEQUENTIAL.store(exec == Exec::Sequential, Ordering::Relaxed);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            if FORCE_SEQUENTIAL.load(Ordering::Relaxed) {
                Exec::Sequential
            } else {
                Exec::Parallel
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// Maps `f` over `0..n`, preserving order.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            Exec::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
        }
    }

    /// Maps `f` over a slice, preserving order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Exec::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => items.par_iter().map(f).collect(),
        }
    }

    /// Fallible map; the first error in input order is returned.
    pub fn try_map<T, R, F>(self, items: &[T], f: F) -> Result<Vec<R>>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> Result<R> + Sync + Send,
    {
        self.map(items, f).into_iter().collect()
    }

    /// Sums `f(i)` over `0..n` with a fixed chunking so that the floating
    /// point result does not depend on the strategy or the thread count.
    pub fn sum_chunked<R, F, A>(self, n: usize, zero: R, f: F, add: A) -> R
    where
        R: Send + Clone + Sync,
        F: Fn(usize) -> R + Sync + Send,
        A: Fn(R, R) -> R + Sync + Send,
    {
        const CHUNK: usize = 64;
        let chunks = n.div_ceil(CHUNK);
        let partials = self.map_range(chunks, |c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            (lo..hi).fold(zero.clone(), |acc, i| add(acc, f(i)))
        });
        partials.into_iter().fold(zero, &add)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_agree() {
        let f = |i: usize| (i as f64).sqrt().sin();
        let seq = Exec::Sequential.sum_chunked(1000, 0.0, f, |a, b| a + b);
        let def = Exec::default().sum_chunked(1000, 0.0, f, |a, b| a + b);
        assert_eq!(seq.to_bits(), def.to_bits());
        assert_eq!(
            Exec::Sequential.map_range(10, |i| i * i),
            Exec::default().map_range(10, |i| i * i)
        );
    }
}
