//! Competitive wealth exchange between `n` agents as a discrete-time Markov
//! chain, with four routes to its transient law:
//!
//! - [`sim`]: exact Monte Carlo sampling of trajectories and ensembles;
//! - [`master`]: exact evolution of the probability mass over the lattice;
//! - [`fpe`]: finite-difference solution of the continuum Fokker-Planck
//!   equation with sticky corners and elastic edges;
//! - [`analytic`]: Gaussian kernels, image-method solutions and absorption
//!   probabilities.
//!
//! [`harness`] compares the routes against each other.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analytic;
pub mod error;
pub mod export;
pub mod fpe;
pub mod grid;
pub mod harness;
pub mod kernel;
pub mod master;
pub mod model;
pub mod sim;

pub use error::{Error, Result};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
