//! Simulation laboratory for decentralized double-auction markets where
//! buyers and sellers learn their own valuations from bandit feedback.
//!
//! Layers, bottom up:
//! - [`market`]: the average-price clearing mechanism and the oracle
//!   solution under true valuations;
//! - [`agents`]: confidence-bound bidding (UCB buyers, LCB sellers),
//!   truthful play, and price-setter deviations;
//! - [`environment`]: instance generation and noisy reward sampling;
//! - [`metrics`]: exact individual and social regret ledgers;
//! - [`theory`]: closed-form regret-bound calculators for comparison;
//! - [`sim`]: the round loop and parallel multi-path replication;
//! - [`config`] / [`output`]: reproducible experiment plumbing.

pub mod agents;
pub mod config;
pub mod environment;
pub mod error;
pub mod market;
pub mod metrics;
pub mod output;
pub mod sim;
pub mod theory;

pub use error::{Error, Result};
