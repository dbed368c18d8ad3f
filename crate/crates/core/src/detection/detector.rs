//! Single-photon detectors: finite efficiency, Gaussian timing jitter, dark counts.
//!
//! Detectors are gated on during the storage period of the memories only; the
//! simulated time span is entirely inside that period.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::{Channel, PhotonEvent};
use crate::error::{Error, Result};
use crate::linalg::Port;

const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub efficiency: f64,
    pub jitter_fwhm_ps: f64,
    pub dark_rate_hz: f64,
    /// Constant delay of this channel (cables, delay generators).
    pub offset_ps: i64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            efficiency: 0.7,
            jitter_fwhm_ps: 250.0,
            dark_rate_hz: 100.0,
            offset_ps: 0,
        }
    }
}

impl DetectorConfig {
    /// Unit efficiency, no jitter, no dark counts.
    pub fn ideal() -> Self {
        Self {
            efficiency: 1.0,
            jitter_fwhm_ps: 0.0,
            dark_rate_hz: 0.0,
            offset_ps: 0,
        }
    }

    pub fn jitter_sigma_ps(&self) -> f64 {
        self.jitter_fwhm_ps / FWHM_PER_SIGMA
    }

    pub fn validate(&self, key: &str) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::config(format!("{key}.efficiency"), "must be in [0, 1]"));
        }
        if !(self.jitter_fwhm_ps >= 0.0) || !self.jitter_fwhm_ps.is_finite() {
            return Err(Error::config(format!("{key}.jitter_fwhm_ps"), "must be ≥ 0"));
        }
        if !(self.dark_rate_hz >= 0.0) || !self.dark_rate_hz.is_finite() {
            return Err(Error::config(format!("{key}.dark_rate_hz"), "must be ≥ 0"));
        }
        Ok(())
    }
}

/// A photon reaching the detector: kept with probability `efficiency`, shifted by the
/// channel offset and Gaussian jitter. Lost photons never click.
pub fn detect<R: Rng + ?Sized>(event: &PhotonEvent, cfg: &DetectorConfig, rng: &mut R) -> Option<PhotonEvent> {
    if event.is_lost() {
        return None;
    }
    if cfg.efficiency < 1.0 && rng.random::<f64>() >= cfg.efficiency {
        return None;
    }
    let mut out = event.clone();
    out.time_ps = (out.time_ps + cfg.offset_ps + jitter(cfg, rng)).max(0);
    out.joint_state = None;
    Some(out)
}

fn jitter<R: Rng + ?Sized>(cfg: &DetectorConfig, rng: &mut R) -> i64 {
    let sigma = cfg.jitter_sigma_ps();
    if sigma > 0.0 {
        Normal::new(0.0, sigma).expect("finite sigma").sample(rng).round() as i64
    } else {
        0
    }
}

/// Mean number of dark counts of one detector over `span_ps`.
pub fn expected_dark_counts(rate_hz: f64, span_ps: i64) -> f64 {
    rate_hz * span_ps as f64 * 1e-12
}

/// Dark counts in `[start_ps, end_ps)` for each detector (one per analyzer port),
/// as a homogeneous Poisson process.
pub fn dark_counts<R: Rng + ?Sized>(
    channel: Channel,
    cfg: &DetectorConfig,
    ports: &[Option<Port>],
    start_ps: i64,
    end_ps: i64,
    rep_period_ps: i64,
    rng: &mut R,
) -> Vec<PhotonEvent> {
    let mean = expected_dark_counts(cfg.dark_rate_hz, end_ps - start_ps);
    let mut out = Vec::new();
    if !(mean > 0.0) {
        return out;
    }
    let law = Poisson::new(mean).expect("positive mean");
    for &port in ports {
        let n = law.sample(rng) as u64;
        for _ in 0..n {
            let t = rng.random_range(start_ps..end_ps);
            out.push(PhotonEvent::dark(channel, t, (t / rep_period_ps) as u64, port));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{Bin, MemoryOutcome, Origin};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn photon() -> PhotonEvent {
        PhotonEvent {
            channel: Channel::Signal794,
            time_ps: 50_000,
            cycle: 4,
            pair_id: Some(1),
            bin: Bin::Early,
            origin: Origin::Pair,
            memory_outcome: Some(MemoryOutcome::Transmitted),
            port: None,
            joint_state: None,
        }
    }

    #[test]
    fn ideal_detector_passes_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(detect(&photon(), &DetectorConfig::ideal(), &mut rng), Some(photon()));
        }
    }

    #[test]
    fn blind_detector_never_clicks() {
        let cfg = DetectorConfig {
            efficiency: 0.0,
            ..DetectorConfig::ideal()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..1000).all(|_| detect(&photon(), &cfg, &mut rng).is_none()));
    }

    #[test]
    fn lost_photons_never_click() {
        let mut e = photon();
        e.memory_outcome = Some(MemoryOutcome::Lost);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(detect(&e, &DetectorConfig::ideal(), &mut rng).is_none());
    }

    #[test]
    fn jitter_and_efficiency_statistics() {
        let cfg = DetectorConfig {
            dark_rate_hz: 0.0,
            offset_ps: 300,
            ..DetectorConfig::default()
        };
        assert!((cfg.jitter_sigma_ps() - 106.2).abs() < 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 200_000;
        let times: Vec<f64> = (0..n)
            .filter_map(|_| detect(&photon(), &cfg, &mut rng))
            .map(|e| (e.time_ps - 50_300) as f64)
            .collect();
        let k = times.len() as f64;
        assert!((k / n as f64 - 0.7).abs() < 4.0 * (0.21 / n as f64).sqrt());
        let mean = times.iter().sum::<f64>() / k;
        let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (k - 1.0);
        assert!(mean.abs() < 4.0 * cfg.jitter_sigma_ps() / k.sqrt());
        assert!((var.sqrt() / cfg.jitter_sigma_ps() - 1.0).abs() < 0.01);
    }

    #[test]
    fn dark_counts_over_storage_window() {
        let span = 700_000_000_000i64;
        assert!((expected_dark_counts(100.0, span) - 70.0).abs() < 1e-9);
        let cfg = DetectorConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let blocks = 2000;
        let mut total = 0usize;
        for _ in 0..blocks {
            let d = dark_counts(Channel::Idler1535, &cfg, &[None], 0, span, 12_500, &mut rng);
            assert!(d.iter().all(|e| e.origin == Origin::Dark && (0..span).contains(&e.time_ps)));
            total += d.len();
        }
        let mean = total as f64 / blocks as f64;
        assert!((mean - 70.0).abs() < 4.0 * (70.0 / blocks as f64).sqrt());
    }
}
