//! System, coupling and device efficiency bookkeeping for a memory.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Efficiencies {
    /// Output over input photon rate.
    pub system: f64,
    /// Output over input optical power with the memory transparent.
    pub coupling: f64,
    /// `system / coupling`
    pub device: f64,
}

/// Efficiencies from count rates `(R_in, R_out)` and coupling powers `(P_in, P_out)`.
pub fn efficiencies(r_in: f64, r_out: f64, p_in: f64, p_out: f64) -> Result<Efficiencies> {
    if !(r_in > 0.0) || !(p_in > 0.0) {
        return Err(Error::invalid("input rate and input power must be positive"));
    }
    if r_out < 0.0 || p_out < 0.0 {
        return Err(Error::invalid("output rate and output power must be non-negative"));
    }
    let system = r_out / r_in;
    let coupling = p_out / p_in;
    device_from_system(system, coupling).map(|device| Efficiencies {
        system,
        coupling,
        device,
    })
}

/// `η_device = η_system / η_coupling`
pub fn device_from_system(system: f64, coupling: f64) -> Result<f64> {
    if !(coupling > 0.0) {
        return Err(Error::invalid("coupling efficiency must be positive"));
    }
    Ok(system / coupling)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_ratios() {
        let e = efficiencies(417.0, 417.0, 2.0, 2.0).unwrap();
        assert_eq!((e.system, e.coupling, e.device), (1.0, 1.0, 1.0));
    }

    #[test]
    fn device_values_from_twenty_percent_coupling() {
        assert!((device_from_system(0.001, 0.2).unwrap() - 0.005).abs() < 1e-15);
        assert!((device_from_system(0.004, 0.2).unwrap() - 0.02).abs() < 1e-15);
    }

    #[test]
    fn zero_denominators_rejected() {
        assert!(efficiencies(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(efficiencies(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(efficiencies(1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn rate_ratio_is_the_plain_quotient() {
        let e = efficiencies(417.0, 1.8, 1.0, 0.2).unwrap();
        assert!((e.system - 1.8 / 417.0).abs() < 1e-15);
        assert!((e.device - 1.8 / 417.0 / 0.2).abs() < 1e-15);
    }
}
