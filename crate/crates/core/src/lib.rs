//! Simulation and Monte Carlo analysis of stochastic logistic population
//! models whose coefficients switch with a continuous-time Markov chain.
//!
//! The central scheme is a truncated Euler–Maruyama method in log
//! coordinates, which keeps every numerical state strictly positive and
//! bounded. Around it sit the regime-chain machinery, reference solutions,
//! and estimators for strong convergence order, long-run behaviour and
//! stationary laws.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod error;
pub mod linalg;
pub mod model;
pub mod runner;
pub mod schemes;
pub mod stochastic;

pub use error::{Error, Result};
