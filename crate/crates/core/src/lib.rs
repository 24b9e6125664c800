//! Simulation core for decentralized stochastic optimization over networks
//! with Byzantine agents and Gaussian gradient masking.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs and an explicit seed, so runs are replayable
//! bit-for-bit. File formats, configuration and the CLI live in the
//! `scc-sim` companion crate.
//!
//! Module map:
//!
//! * [`topology`] builds networks, Metropolis–Hastings weights, the virtual
//!   weight matrix and the constants used by the convergence bounds.
//! * [`objectives`] holds the 100-agent benchmark and the estimators for the
//!   variance, heterogeneity, smoothness and P-Ł constants.
//! * [`aggregation`] implements `Clip`, self-centered clipping and the plain
//!   gossip mean.
//! * [`privacy`] masks gradients and evaluates the local/global DP formulas.
//! * [`attacks`] generates falsified Byzantine messages.
//! * [`engine`] runs the synchronous round loop and collects metrics.
//! * [`bounds`] evaluates the disagreement and optimal-gap bounds term by term.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod aggregation;
pub mod attacks;
pub mod bounds;
pub mod engine;
mod error;
pub mod linalg;
pub(crate) mod math;
pub mod metrics;
pub mod objectives;
pub mod privacy;
pub mod rng;
pub mod schedule;
pub mod special;
pub mod topology;

pub use error::{Error, Result};
pub use topology::AgentId;
