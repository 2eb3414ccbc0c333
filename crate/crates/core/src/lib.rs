//! Simulation and sparse estimation of linear generalized exponential marked
//! Hawkes processes.
//!
//! The crate covers the full pipeline used in the experiments: exact
//! intensity evaluation through the excitation state, Ogata thinning,
//! the quasi log-likelihood with analytic gradients, a projected
//! quasi-Newton solver for box-constrained maximization, the three-step
//! penalized-to-ordinary (P-O) sparse estimator, an elastic-net
//! least-squares baseline, and a seeded Monte Carlo harness.

pub mod error;
pub mod events;
pub mod experiment;
pub mod graph;
pub mod likelihood;
pub mod marks;
pub mod model;
pub mod config;
pub mod optimize;
pub mod po;
pub mod simulate;

pub use error::{Error, Result};
