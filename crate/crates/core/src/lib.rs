//! Simulation and analysis of the homodyned emission of a driven two-level
//! system in front of a mirror: analytic steady-state correlations, stochastic
//! homodyne trajectories, maximum-likelihood state reconstruction of a filtered
//! temporal mode, and Wigner-function negativity.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod filter;
pub mod phase_space;
pub(crate) mod quad;
pub mod tls;
pub mod tomography;
pub mod trajectory;

pub use error::{Error, Result};
