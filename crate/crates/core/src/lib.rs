//! Exact short-term memory and task-error analysis for linear echo state
//! networks driven by correlated input.
//!
//! The state recursion is `x_{t+1} = W x_t + w_in u_t` with a linear readout
//! `y_t = ψᵀ x_t`. Everything needed to train `ψ` optimally is contained in
//! the second moments `XXᵀ` and `XYᵀ`; [`analytic`] evaluates them in closed
//! form (three independent ways) and [`readout`] turns them into weights,
//! expected errors and worst-case tail bounds. [`experiments`] compares the
//! analytic values with direct simulation on delay reconstruction, NARMA10
//! and Mackey-Glass prediction.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod par;
pub mod readout;
pub mod reservoir;
pub mod signal;
pub mod tasks;

pub use error::{Error, Result};
pub use par::Exec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic generator for `seed`; distinct `stream`s give independent
/// sequences for the same seed.
pub(crate) fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
