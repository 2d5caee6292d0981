//! Mean diagonal eigenvector overlaps of the deformed complex Ginibre ensemble
//! `X = X0 + sqrt(tau/N) G`.
//!
//! The crate has three independent ways of producing the overlap density at a
//! point of the spectrum:
//!
//! * [`asymptotics`]: closed-form large-N limits at the edge and at outliers,
//! * [`sampler`]: binned Monte Carlo over sampled matrices,
//! * [`exactrep`]: deterministic quadrature of an exact finite-N integral
//!   representation (rank 1 and 2 perturbations).
//!
//! [`specfun`] holds the special functions the limits are built from and
//! [`model`] the description of the finite-rank perturbation `X0`.

pub mod asymptotics;
pub mod cli;
mod error;
pub mod exactrep;
pub mod linalg;
pub mod model;
pub mod output;
pub mod quad;
pub mod sampler;
pub mod specfun;

pub use error::{Error, Result};
pub use num_complex::Complex64;
