//! Simulation and estimation toolkit for photon-pair entanglement distributed
//! between two atomic-frequency-comb (AFC) quantum memories.
//!
//! The crate has two halves that share the same linear-algebra layer:
//!
//! * a stochastic event simulator ([`source`] → [`memory`] → [`detection`]) that
//!   produces time-tagged detections and coincidence histograms, and
//! * an estimation chain ([`estimation`]) for g² cross-correlation, maximum-likelihood
//!   tomography, entanglement metrics and the CHSH parameter.
//!
//! [`harness`] ties both together behind a strict TOML configuration.

pub mod detection;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod linalg;
pub mod memory;
mod numeric;
pub mod source;

pub use error::{Error, Result};
