//! CHSH test on simulated stored-and-recalled pairs.

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::simulate::{pair_peak_delay, simulate, start_rule};
use crate::detection::{histogram_from_times, tdc_starts, AnalyzerSetting, Channel, StartRule};
use crate::error::{Error, Result};
use crate::estimation::chsh::{chsh_s, correlation_coefficient, minus_slot_for, ChshSettings, Slot};
use crate::estimation::{ChshCorrelations, Estimate};
use crate::linalg::Port;
use crate::source::PumpMode;

/// Coincidences of one setting pair at the pair peak.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotCounts {
    pub slot: Slot,
    pub signal_phase: f64,
    pub idler_phase: f64,
    /// `C(+,+) + C(−,−)`: signal and herald detectors on equal ports.
    pub same: u64,
    pub opposite: u64,
    pub correlation: Estimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshSimulation {
    pub delay_ps: i64,
    pub slots: Vec<SlotCounts>,
    pub correlations: ChshCorrelations,
    pub minus_slot: Slot,
    pub s: Estimate,
}

/// Runs one simulation per setting pair with both analyzers set to interferometers at
/// the CHSH phases. Coincidences at the pair peak are split by herald and signal port,
/// `E = (C₊₊ + C₋₋ − C₊₋ − C₋₊)/ΣC`. Each run uses `cfg.run.cycles` cycles and a seed
/// derived from `cfg.run.seed`.
pub fn simulate_chsh(cfg: &ExperimentConfig, settings: &ChshSettings) -> Result<ChshSimulation> {
    if cfg.source.pump_mode != PumpMode::BothArms {
        return Err(Error::config("source.pump_mode", "a CHSH test needs the entangled (both_arms) source"));
    }
    let [a, a_prime, b, b_prime] = settings.phases()?;
    let minus = minus_slot_for(settings, cfg.source.pump_phase)?;
    let mut slots = Vec::new();
    let mut delay_ps = 0;
    for (k, slot) in Slot::ALL.into_iter().enumerate() {
        let (alpha, beta) = match slot {
            Slot::AB => (a, b),
            Slot::ABPrime => (a, b_prime),
            Slot::APrimeB => (a_prime, b),
            Slot::APrimeBPrime => (a_prime, b_prime),
        };
        let mut c = cfg.clone();
        c.run.seed = cfg.run.seed.wrapping_add(k as u64);
        c.analyzers.signal_794 = AnalyzerSetting::interferometer(alpha);
        c.analyzers.idler_1535 = AnalyzerSetting::interferometer(beta);
        c.tdc.herald_port = None;
        delay_ps = pair_peak_delay(&c)?;
        c.tdc.g2_delays_ps = Some(vec![delay_ps]);
        let out = simulate(&c)?;
        let mut counts = [[0u64; 2]; 2];
        for (i, herald) in [Port::Plus, Port::Minus].into_iter().enumerate() {
            let rule = StartRule {
                herald_port: Some(herald),
                ..start_rule(&c)?
            };
            let starts = tdc_starts(&out.detections, &rule)?;
            for (j, stop) in [Port::Plus, Port::Minus].into_iter().enumerate() {
                let stops: Vec<i64> = out
                    .detections
                    .iter()
                    .filter(|e| e.channel == Channel::Signal794 && e.port == Some(stop))
                    .map(|e| e.time_ps)
                    .collect();
                let h = histogram_from_times(&starts, &stops, c.tdc.bin_width_ps, c.tdc.window_ps)?;
                counts[i][j] = h.coincidence_rate(delay_ps as f64, c.tdc.peak_halfwidth_ps)?;
            }
        }
        let same = counts[0][0] + counts[1][1];
        let opposite = counts[0][1] + counts[1][0];
        slots.push(SlotCounts {
            slot,
            signal_phase: alpha,
            idler_phase: beta,
            same,
            opposite,
            correlation: correlation_coefficient(same as f64, opposite as f64)?,
        });
    }
    let correlations = ChshCorrelations::from_fn(|s| slots[s as usize].correlation);
    Ok(ChshSimulation {
        delay_ps,
        s: chsh_s(&correlations, minus),
        correlations,
        minus_slot: minus,
        slots,
    })
}
