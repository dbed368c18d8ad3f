//! Pulsed time-bin entangled photon-pair source.
//!
//! Every pump pulse produces a Poisson-distributed number of pairs. Pairs carry a
//! shared two-photon state; the time bin of each photon is only fixed later by the
//! analyzer, so that analyzer settings enter the joint outcome statistics.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Geometric, Poisson};
use serde::{Deserialize, Serialize};

use crate::detection::{Bin, Channel, Origin, PhotonEvent};
use crate::error::{Error, Result};
use crate::linalg::{DensityMatrix, Ket};

/// Above this mean pair number the single-pair-per-mode picture is no longer accurate.
pub const LOW_GAIN_LIMIT: f64 = 0.5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PumpMode {
    /// Pump pulse in both arms of the pump interferometer: `(|ee⟩ + e^{2iφ}|ℓℓ⟩)/√2`.
    #[default]
    BothArms,
    /// Long pump arm blocked: every photon is in the early bin.
    EarlyOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub mean_pairs_per_pulse: f64,
    #[serde(default = "default_rep_period")]
    pub rep_period_ps: i64,
    #[serde(default = "default_bin_separation")]
    pub bin_separation_ps: i64,
    #[serde(default)]
    pub pump_mode: PumpMode,
    /// Pump interferometer phase φ, radians.
    #[serde(default)]
    pub pump_phase: f64,
    /// Weight `w` of white noise in the emitted state, `(1−w)|φ⟩⟨φ| + w·I/4`.
    #[serde(default)]
    pub white_noise: f64,
}

fn default_rep_period() -> i64 {
    12_500
}

fn default_bin_separation() -> i64 {
    1_400
}

impl SourceConfig {
    pub fn new(mean_pairs_per_pulse: f64) -> Self {
        Self {
            mean_pairs_per_pulse,
            rep_period_ps: default_rep_period(),
            bin_separation_ps: default_bin_separation(),
            pump_mode: PumpMode::BothArms,
            pump_phase: 0.0,
            white_noise: 0.0,
        }
    }

    /// Checks the invariants; returns warnings for valid but questionable settings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mu = self.mean_pairs_per_pulse;
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::config("source.mean_pairs_per_pulse", "must be a finite number ≥ 0"));
        }
        if self.bin_separation_ps <= 0 {
            return Err(Error::config("source.bin_separation_ps", "must be positive"));
        }
        if self.rep_period_ps <= 2 * self.bin_separation_ps {
            return Err(Error::config(
                "source.rep_period_ps",
                format!(
                    "must exceed twice the bin separation ({} ps)",
                    2 * self.bin_separation_ps
                ),
            ));
        }
        if !(0.0..=1.0).contains(&self.white_noise) {
            return Err(Error::config("source.white_noise", "must be in [0, 1]"));
        }
        if !self.pump_phase.is_finite() {
            return Err(Error::config("source.pump_phase", "must be finite"));
        }
        let mut warnings = Vec::new();
        if mu > LOW_GAIN_LIMIT {
            let msg = format!(
                "mean pair number {mu} exceeds {LOW_GAIN_LIMIT}; the low-gain pair model is inaccurate"
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        Ok(warnings)
    }

    /// The two-photon state emitted per pair.
    pub fn joint_state(&self) -> DensityMatrix {
        match self.pump_mode {
            PumpMode::BothArms => {
                DensityMatrix::pure(&Ket::phi_plus_with_phase(2.0 * self.pump_phase))
                    .mix_with_white(self.white_noise)
            }
            PumpMode::EarlyOnly => DensityMatrix::pure(&Ket::basis(0)),
        }
    }

    /// Analytic cross-correlation of independent Poisson pairs, `1 + 1/μ`.
    pub fn predicted_g2(&self) -> f64 {
        1.0 + 1.0 / self.mean_pairs_per_pulse
    }
}

/// State carried by a pair.
#[derive(Clone, Debug, PartialEq)]
pub enum JointState {
    TimeBin(Arc<DensityMatrix>),
    /// Early-only pumping: both photons in the early bin.
    SingleMode,
}

impl JointState {
    pub fn for_config(cfg: &SourceConfig) -> Self {
        match cfg.pump_mode {
            PumpMode::BothArms => JointState::TimeBin(Arc::new(cfg.joint_state())),
            PumpMode::EarlyOnly => JointState::SingleMode,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairEmission {
    pub cycle: u64,
    pub pair_id: u64,
    pub joint_state: JointState,
}

/// Pairs emitted by pump pulse `cycle`. `next_pair_id` is advanced for every pair.
pub fn sample_cycle<R: Rng + ?Sized>(
    cfg: &SourceConfig,
    state: &JointState,
    rng: &mut R,
    cycle: u64,
    next_pair_id: &mut u64,
) -> Vec<PairEmission> {
    let mu = cfg.mean_pairs_per_pulse;
    if mu <= 0.0 {
        return Vec::new();
    }
    let n = Poisson::new(mu).expect("positive mean").sample(rng) as u64;
    make_pairs(n, cycle, state, next_pair_id)
}

fn make_pairs(n: u64, cycle: u64, state: &JointState, next_pair_id: &mut u64) -> Vec<PairEmission> {
    (0..n)
        .map(|_| {
            let id = *next_pair_id;
            *next_pair_id += 1;
            PairEmission {
                cycle,
                pair_id: id,
                joint_state: state.clone(),
            }
        })
        .collect()
}

/// Iterates over the pulses in `[start, end)` that emit at least one pair, skipping
/// empty pulses geometrically. Equivalent in distribution to calling [`sample_cycle`]
/// for every pulse.
pub struct NonEmptyCycles<'a, R: Rng> {
    state: &'a JointState,
    rng: &'a mut R,
    mu: f64,
    gap: Option<Geometric>,
    next: u64,
    end: u64,
    next_pair_id: u64,
}

impl<'a, R: Rng> NonEmptyCycles<'a, R> {
    pub fn new(cfg: &SourceConfig, state: &'a JointState, rng: &'a mut R, start: u64, end: u64, first_pair_id: u64) -> Self {
        let mu = cfg.mean_pairs_per_pulse;
        let p = -(-mu).exp_m1();
        Self {
            state,
            rng,
            mu,
            gap: (p > 0.0).then(|| Geometric::new(p).expect("valid probability")),
            next: start,
            end,
            next_pair_id: first_pair_id,
        }
    }

    pub fn next_pair_id(&self) -> u64 {
        self.next_pair_id
    }

    /// Zero-truncated Poisson by inversion.
    fn positive_count(&mut self) -> u64 {
        let mu = self.mu;
        let norm = -(-mu).exp_m1();
        let u: f64 = self.rng.random::<f64>() * norm;
        let mut k = 1u64;
        let mut pk = mu * (-mu).exp();
        let mut cdf = pk;
        while u > cdf && k < 1000 {
            k += 1;
            pk *= mu / k as f64;
            cdf += pk;
        }
        k
    }
}

impl<R: Rng> Iterator for NonEmptyCycles<'_, R> {
    type Item = Vec<PairEmission>;

    fn next(&mut self) -> Option<Self::Item> {
        let gap = self.gap?;
        let skip = gap.sample(self.rng);
        let cycle = self.next.checked_add(skip)?;
        if cycle >= self.end {
            self.next = self.end;
            return None;
        }
        self.next = cycle + 1;
        let n = self.positive_count();
        Some(make_pairs(n, cycle, self.state, &mut self.next_pair_id))
    }
}

/// Two unresolved photon events per pair, stamped at the start of the pump pulse.
pub fn emit_photon_events(pairs: &[PairEmission], cfg: &SourceConfig) -> Vec<PhotonEvent> {
    let mut out = Vec::with_capacity(2 * pairs.len());
    for p in pairs {
        let (bin, state) = match &p.joint_state {
            JointState::TimeBin(rho) => (Bin::Superposed, Some(rho.clone())),
            JointState::SingleMode => (Bin::Early, None),
        };
        for channel in [Channel::Signal794, Channel::Idler1535] {
            out.push(PhotonEvent {
                channel,
                time_ps: p.cycle as i64 * cfg.rep_period_ps,
                cycle: p.cycle,
                pair_id: Some(p.pair_id),
                bin,
                origin: Origin::Pair,
                memory_outcome: None,
                port: None,
                joint_state: state.clone(),
            });
        }
    }
    out
}
