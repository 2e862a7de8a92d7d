//! Numerical laboratory for heat kernels of stable processes with critical
//! killing: exact constants, principal-value operator oracles, Monte Carlo
//! estimators and a finite-grid perturbation engine.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod constants;
pub mod error;
pub mod feynman_kac;
pub mod flap;
pub mod model;
pub mod numeric;
pub mod perturbation;
pub mod quadrature;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
