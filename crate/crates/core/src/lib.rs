//! Spectral laboratory for the nonlocal parabolic problem
//!
//! u_t = u_xx + (λf(u) + h(α(t))) / a(l(u)) on (0,1), u = 0 at x = 0, 1,
//! α(t) = σ + ∫_σ^t a(l(u(r))) dr,
//!
//! together with its quasilinear counterpart obtained through the clock α.

// !(x > 0.0) also rejects NaN, which is the point
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attractor;
pub mod comparison;
pub mod config;
pub mod error;
pub mod modulus;
pub mod output;
pub mod pchip;
pub mod problem;
pub mod reparam;
pub mod run;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
