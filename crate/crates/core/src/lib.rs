//! Weighted Riesz s-energy point configurations on compact rectifiable sets.
//!
//! The crate generates near-minimal configurations for
//! `E_s^w(ω_N) = Σ_{i≠j} w(x_i, x_j) / |x_i - x_j|^s` on a catalog of
//! embedded sets and checks the large-N behaviour of the minimal energy,
//! the limit distribution `h_d^{s,w}` and the separation of minimizers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod optimize;
pub mod recipes;
pub mod weights;

pub use error::{Error, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
