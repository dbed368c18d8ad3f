//! Time-bin qubit analyzers and Born-rule sampling of joint outcomes.
//!
//! An analyzer is either a plain time-of-arrival measurement or an unbalanced
//! interferometer with the same delay as the time-bin separation. Behind the
//! interferometer a photon leaves in one of three time slots and one of two ports:
//!
//! | slot      | offset | POVM element (per port)        |
//! |-----------|--------|--------------------------------|
//! | early     | 0      | `¼ |e⟩⟨e|`                     |
//! | central   | T      | `½ |p±⟩⟨p±|`, `p± = (|e⟩ ± e^{iα}|ℓ⟩)/√2` |
//! | late      | 2T     | `¼ |ℓ⟩⟨ℓ|`                     |

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Bin, PhotonEvent};
use crate::error::{Error, Result};
use crate::linalg::{projector, tensor_product, CMatrix, DensityMatrix, Ket, Port, ProjectorSetting};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalyzerSetting {
    /// Interferometer replaced by a short fibre: the time bin is measured directly.
    #[default]
    TimeOfArrival,
    Interferometer { phase: f64 },
}

impl AnalyzerSetting {
    pub fn interferometer(phase: f64) -> Self {
        AnalyzerSetting::Interferometer {
            phase: phase.rem_euclid(TAU),
        }
    }

    pub fn validate(&self, key: &str) -> Result<()> {
        if let AnalyzerSetting::Interferometer { phase } = self {
            if !(0.0..TAU).contains(phase) {
                return Err(Error::config(format!("{key}.phase"), "must be in [0, 2π)"));
            }
        }
        Ok(())
    }

    /// Output ports a detector has to watch.
    pub fn ports(&self) -> &'static [Option<Port>] {
        match self {
            AnalyzerSetting::TimeOfArrival => &[None],
            AnalyzerSetting::Interferometer { .. } => &[Some(Port::Plus), Some(Port::Minus)],
        }
    }

    /// All outcomes with their POVM elements for time-bin separation `bin_separation_ps`.
    pub fn outcomes(&self, bin_separation_ps: i64) -> Vec<SlotOutcome> {
        let e = projector(ProjectorSetting::Z);
        let l = projector(ProjectorSetting::ZMinus);
        let t = bin_separation_ps;
        match *self {
            AnalyzerSetting::TimeOfArrival => vec![
                SlotOutcome { bin: Bin::Early, port: None, offset_ps: 0, povm: e },
                SlotOutcome { bin: Bin::Late, port: None, offset_ps: t, povm: l },
            ],
            AnalyzerSetting::Interferometer { phase } => {
                let mut out = Vec::with_capacity(6);
                for port in [Port::Plus, Port::Minus] {
                    out.push(SlotOutcome {
                        bin: Bin::Early,
                        port: Some(port),
                        offset_ps: 0,
                        povm: e.scale_re(0.25),
                    });
                    out.push(SlotOutcome {
                        bin: Bin::Central,
                        port: Some(port),
                        offset_ps: t,
                        povm: projector(ProjectorSetting::phase(phase, port)).scale_re(0.5),
                    });
                    out.push(SlotOutcome {
                        bin: Bin::Late,
                        port: Some(port),
                        offset_ps: 2 * t,
                        povm: l.scale_re(0.25),
                    });
                }
                out
            }
        }
    }
}

/// One detectable outcome of an analyzer.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotOutcome {
    pub bin: Bin,
    pub port: Option<Port>,
    pub offset_ps: i64,
    pub povm: CMatrix,
}

/// Joint and marginal outcome distributions of a two-photon state for fixed settings.
/// Index order: signal (794 nm) outcome first.
#[derive(Clone, Debug)]
pub struct OutcomeTable {
    signal: Vec<SlotOutcome>,
    idler: Vec<SlotOutcome>,
    joint: Vec<f64>,
    signal_marginal: Vec<f64>,
    idler_marginal: Vec<f64>,
}

impl OutcomeTable {
    pub fn new(
        state: &DensityMatrix,
        signal: AnalyzerSetting,
        idler: AnalyzerSetting,
        bin_separation_ps: i64,
    ) -> Result<Self> {
        if state.dim() != 4 {
            return Err(Error::invalid("joint outcome table needs a two-qubit state"));
        }
        let signal = signal.outcomes(bin_separation_ps);
        let idler = idler.outcomes(bin_separation_ps);
        let mut joint = Vec::with_capacity(signal.len() * idler.len());
        for a in &signal {
            for b in &idler {
                let op = tensor_product(&a.povm, &b.povm)?;
                joint.push(state.expectation(&op).max(0.0));
            }
        }
        let rho_s = state.partial_trace(0)?;
        let rho_i = state.partial_trace(1)?;
        let signal_marginal = signal.iter().map(|o| rho_s.expectation(&o.povm).max(0.0)).collect();
        let idler_marginal = idler.iter().map(|o| rho_i.expectation(&o.povm).max(0.0)).collect();
        Ok(Self {
            signal,
            idler,
            joint,
            signal_marginal,
            idler_marginal,
        })
    }

    /// Table for photons that are both in the early bin (early-only pumping).
    pub fn early_only(signal: AnalyzerSetting, idler: AnalyzerSetting, bin_separation_ps: i64) -> Result<Self> {
        Self::new(&DensityMatrix::pure(&Ket::basis(0)), signal, idler, bin_separation_ps)
    }

    pub fn signal_outcomes(&self) -> &[SlotOutcome] {
        &self.signal
    }

    pub fn idler_outcomes(&self) -> &[SlotOutcome] {
        &self.idler
    }

    pub fn joint_probability(&self, signal: usize, idler: usize) -> f64 {
        self.joint[signal * self.idler.len() + idler]
    }

    pub fn signal_marginal(&self) -> &[f64] {
        &self.signal_marginal
    }

    pub fn idler_marginal(&self) -> &[f64] {
        &self.idler_marginal
    }

    pub fn sample_joint<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let k = sample_index(&self.joint, rng);
        (k / self.idler.len(), k % self.idler.len())
    }

    pub fn sample_signal<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.signal_marginal, rng)
    }

    pub fn sample_idler<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.idler_marginal, rng)
    }
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, p) in probs.iter().enumerate() {
        if u < *p {
            return k;
        }
        u -= p;
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

fn resolve(event: &PhotonEvent, outcome: &SlotOutcome) -> PhotonEvent {
    let mut out = event.clone();
    out.time_ps += outcome.offset_ps;
    out.bin = outcome.bin;
    out.port = outcome.port;
    out.joint_state = None;
    out
}

/// Fixes bin and output port of both members of a pair from the joint Born-rule
/// distribution. Lost members yield `None`; if exactly one member survives it is
/// resolved from its reduced state.
pub fn analyzer_sample<R: Rng + ?Sized>(
    signal: &PhotonEvent,
    idler: &PhotonEvent,
    table: &OutcomeTable,
    rng: &mut R,
) -> Result<(Option<PhotonEvent>, Option<PhotonEvent>)> {
    if signal.pair_id.is_none() || signal.pair_id != idler.pair_id {
        return Err(Error::invalid("analyzer needs both members of the same pair"));
    }
    Ok(match (signal.is_lost(), idler.is_lost()) {
        (false, false) => {
            let (a, b) = table.sample_joint(rng);
            (
                Some(resolve(signal, &table.signal[a])),
                Some(resolve(idler, &table.idler[b])),
            )
        }
        (false, true) => (Some(resolve(signal, &table.signal[table.sample_signal(rng)])), None),
        (true, false) => (None, Some(resolve(idler, &table.idler[table.sample_idler(rng)]))),
        (true, true) => (None, None),
    })
}

/// Resolves a single photon whose time bin is already known (`Early` or `Late`).
pub fn analyzer_sample_single<R: Rng + ?Sized>(
    event: &PhotonEvent,
    setting: AnalyzerSetting,
    bin_separation_ps: i64,
    rng: &mut R,
) -> Result<PhotonEvent> {
    let povm = match event.bin {
        Bin::Early => projector(ProjectorSetting::Z),
        Bin::Late => projector(ProjectorSetting::ZMinus),
        other => return Err(Error::invalid(format!("cannot analyze a single photon in bin {other}"))),
    };
    let outcomes = setting.outcomes(bin_separation_ps);
    let probs: Vec<f64> = outcomes.iter().map(|o| povm.trace_product_re(&o.povm).max(0.0)).collect();
    Ok(resolve(event, &outcomes[sample_index(&probs, rng)]))
}

/// Probability that both photons leave the central slots through ports `(+, +)`
/// for `|φ⟩ = (|ee⟩ + e^{2iφ_p}|ℓℓ⟩)/√2`: `(1 + cos(α + β − 2φ_p))/16`.
pub fn central_coincidence_probability(alpha: f64, beta: f64, pump_phase: f64) -> f64 {
    (1.0 + (alpha + beta - 2.0 * pump_phase).cos()) / 16.0
}
