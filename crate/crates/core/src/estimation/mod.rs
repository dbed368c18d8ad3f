//! Estimators: g² cross-correlation, state tomography, entanglement metrics,
//! CHSH, interference visibility and memory efficiencies.

pub mod chsh;
pub mod efficiency;
pub mod g2;
pub mod metrics;
pub mod montecarlo;
pub mod tomography;
pub mod visibility;

use serde::{Deserialize, Serialize};

/// A value with its one-standard-deviation uncertainty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

impl Estimate {
    pub fn new(value: f64, sigma: f64) -> Self {
        Self { value, sigma }
    }

    /// Number of standard deviations separating `self` from `reference`.
    pub fn deviation_sigmas(&self, reference: f64) -> f64 {
        (self.value - reference).abs() / self.sigma
    }

    /// Whether the estimate exceeds `threshold` by more than `k` standard deviations.
    pub fn exceeds(&self, threshold: f64, k: f64) -> bool {
        self.value - k * self.sigma > threshold
    }
}

impl std::fmt::Display for Estimate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4} ± {:.4}", self.value, self.sigma)
    }
}

pub use chsh::{chsh_s, ChshCorrelations, MinusSlot};
pub use metrics::{concurrence, entanglement_of_formation, fidelity, purity};
pub use tomography::{tomography_mle, Likelihood, MleOptions, TomographyInput, TomographyRow};
