//! Deterministic simulator and library for distributed strongly convex
//! optimization.
//!
//! The crate builds consensus topologies, runs the distributed online
//! gradient descent engine (consensus on accumulated gradients, Euclidean
//! projection, epoch-doubling rounds) next to a distributed dual-averaging
//! baseline and the serial lazy-projection scheme they reduce to, and checks
//! the convergence theory behind them as runtime-verifiable inequalities:
//! spectral mixing of the consensus matrix, the lazy-projection regret bound,
//! the strong-convexity gap bound, the network-error bound, and the
//! near-linear decay of the optimality gap.
//!
//! Everything is deterministic given the experiment seeds; identical configs
//! reproduce identical artifacts byte for byte.

pub mod error;
pub mod linalg;
pub mod rng;

pub mod feasible;
pub mod objectives;
pub mod topology;

pub mod harness;
pub mod metrics;
pub mod serial;
pub mod suites;
pub mod trace;

pub mod cli;
pub mod dda;
pub mod dogd;

pub use error::{Error, Result};
