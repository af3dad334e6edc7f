//! Dephasing and dissipative stabilization of spin cat states in
//! inhomogeneously broadened ensembles.

pub mod analytic;
pub mod cli;
pub mod lindblad;
pub mod meanfield;
pub mod ensemble;
pub mod error;
pub mod ode;
pub mod stats;

pub use error::{Error, Result};
