//! End-to-end event simulation: source → memories → analyzers → detectors → TDC.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::detection::{
    analyzer_sample, dark_counts, detect, histogram_from_times, tdc_starts, write_events_csv, AnalyzerSetting,
    Channel, CoincidenceHistogram, OutcomeTable, PhotonEvent, StartRule,
};
use crate::error::{Error, Result};
use crate::estimation::g2::{g2_cross, G2Options};
use crate::estimation::Estimate;
use crate::linalg::Port;
use crate::memory::{apply_memory, MemoryModel};
use crate::source::{emit_photon_events, JointState, NonEmptyCycles, PumpMode};

const PEAK_MIN_SEPARATION_PS: f64 = 2_000.0;
const PEAK_THRESHOLD_SIGMAS: f64 = 5.0;

/// Start/stop histogram for one stop-port selection.
#[derive(Clone, Debug, PartialEq)]
pub struct NamedHistogram {
    pub name: String,
    pub stop_port: Option<Port>,
    pub histogram: CoincidenceHistogram,
}

#[derive(Clone, Debug)]
pub struct SimulationOutput {
    /// Photon and dark-count detections in time order.
    pub detections: Vec<PhotonEvent>,
    /// Gated clock starts (`CLOCK` events) in time order.
    pub starts: Vec<PhotonEvent>,
    pub histograms: Vec<NamedHistogram>,
    pub summary: SimulationSummary,
}

impl SimulationOutput {
    pub fn histogram(&self, name: &str) -> Option<&CoincidenceHistogram> {
        self.histograms.iter().find(|h| h.name == name).map(|h| &h.histogram)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub seed: u64,
    pub cycles: u64,
    pub simulated_time_s: f64,
    pub pairs: u64,
    pub signal_detections: u64,
    pub idler_detections: u64,
    pub dark_counts: u64,
    pub starts: u64,
    pub and_offset_ps: i64,
    pub pair_peak_delay_ps: i64,
    /// Storage time over total memory-preparation cycle; multiplies raw rates.
    pub duty_fraction: f64,
    pub start_rate: Rate,
    pub histograms: Vec<HistogramSummary>,
    pub warnings: Vec<String>,
}

/// Rate per second of simulated time, raw and scaled by the duty cycle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub raw_hz: f64,
    pub duty_normalized_hz: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramSummary {
    pub name: String,
    pub file: String,
    pub stop_port: Option<Port>,
    pub total_counts: u64,
    pub peaks_ps: Vec<f64>,
    pub delays: Vec<DelaySummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelaySummary {
    pub delay_ps: i64,
    pub coincidences: u64,
    pub rate: Rate,
    pub g2: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g2_error: Option<String>,
}

fn primary_delay(model: &Option<MemoryModel>) -> i64 {
    model.as_ref().map(|m| m.recalls[0].delay_ps).unwrap_or(0)
}

fn central_offset(setting: AnalyzerSetting, bin_separation_ps: i64) -> i64 {
    match setting {
        AnalyzerSetting::TimeOfArrival => 0,
        AnalyzerSetting::Interferometer { .. } => bin_separation_ps,
    }
}

/// Clock-tick delay of the AND gate: the slot where a recalled (or, without memory,
/// transmitted) 1535 nm photon leaves the analyzer.
pub fn and_offset(cfg: &ExperimentConfig) -> Result<i64> {
    if let Some(o) = cfg.tdc.and_offset_ps {
        return Ok(o);
    }
    let (_, idler) = cfg.memory_models()?;
    Ok(primary_delay(&idler) + central_offset(cfg.analyzers.idler_1535, cfg.source.bin_separation_ps))
}

/// `δt` of the coincidence peak formed by pairs recalled from both memories.
pub fn pair_peak_delay(cfg: &ExperimentConfig) -> Result<i64> {
    let (signal, _) = cfg.memory_models()?;
    Ok(primary_delay(&signal) + central_offset(cfg.analyzers.signal_794, cfg.source.bin_separation_ps)
        - and_offset(cfg)?)
}

pub fn start_rule(cfg: &ExperimentConfig) -> Result<StartRule> {
    Ok(StartRule {
        herald: Channel::Idler1535,
        herald_port: cfg.tdc.herald_port,
        rep_period_ps: cfg.source.rep_period_ps,
        and_offset_ps: and_offset(cfg)?,
        and_width_ps: cfg.tdc.and_width_ps,
    })
}

struct Shard {
    detections: Vec<PhotonEvent>,
    pairs: u64,
    dark: u64,
}

struct Chain<'a> {
    cfg: &'a ExperimentConfig,
    state: JointState,
    table: OutcomeTable,
    memory_794: Option<MemoryModel>,
    memory_1535: Option<MemoryModel>,
}

impl Chain<'_> {
    fn run_shard(&self, shard: u64, start: u64, end: u64) -> Result<Shard> {
        let cfg = self.cfg;
        let mut source_rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
        source_rng.set_stream(2 * shard);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
        rng.set_stream(2 * shard + 1);
        let mut detections = Vec::new();
        let mut pairs = 0u64;
        let cycles = NonEmptyCycles::new(&cfg.source, &self.state, &mut source_rng, start, end, shard << 40);
        for batch in cycles {
            for pair in batch {
                pairs += 1;
                let mut events = emit_photon_events(std::slice::from_ref(&pair), &cfg.source);
                let idler = events.pop().expect("two photons");
                let signal = events.pop().expect("two photons");
                let signal = match &self.memory_794 {
                    Some(m) => apply_memory(&signal, m, &mut rng),
                    None => signal,
                };
                let idler = match &self.memory_1535 {
                    Some(m) => apply_memory(&idler, m, &mut rng),
                    None => idler,
                };
                let (s, i) = analyzer_sample(&signal, &idler, &self.table, &mut rng)?;
                if let Some(d) = s.and_then(|s| detect(&s, &cfg.detectors.signal_794, &mut rng)) {
                    detections.push(d);
                }
                if let Some(d) = i.and_then(|i| detect(&i, &cfg.detectors.idler_1535, &mut rng)) {
                    detections.push(d);
                }
            }
        }
        let rep = cfg.source.rep_period_ps;
        let (t0, t1) = (start as i64 * rep, end as i64 * rep);
        let mut dark = dark_counts(
            Channel::Signal794,
            &cfg.detectors.signal_794,
            cfg.analyzers.signal_794.ports(),
            t0,
            t1,
            rep,
            &mut rng,
        );
        dark.extend(dark_counts(
            Channel::Idler1535,
            &cfg.detectors.idler_1535,
            cfg.analyzers.idler_1535.ports(),
            t0,
            t1,
            rep,
            &mut rng,
        ));
        let n_dark = dark.len() as u64;
        detections.extend(dark);
        Ok(Shard {
            detections,
            pairs,
            dark: n_dark,
        })
    }
}

/// Runs the configured experiment in memory. Deterministic given the configuration
/// (including `run.shards`), independent of the number of worker threads.
pub fn simulate(cfg: &ExperimentConfig) -> Result<SimulationOutput> {
    let warnings = cfg.validate()?;
    let (memory_794, memory_1535) = cfg.memory_models()?;
    let state = JointState::for_config(&cfg.source);
    let bin_sep = cfg.source.bin_separation_ps;
    let table = match cfg.source.pump_mode {
        PumpMode::BothArms => {
            OutcomeTable::new(&cfg.source.joint_state(), cfg.analyzers.signal_794, cfg.analyzers.idler_1535, bin_sep)?
        }
        PumpMode::EarlyOnly => OutcomeTable::early_only(cfg.analyzers.signal_794, cfg.analyzers.idler_1535, bin_sep)?,
    };
    let chain = Chain {
        cfg,
        state,
        table,
        memory_794,
        memory_1535,
    };
    let n = cfg.run.cycles;
    let shards = cfg.run.shards.min(n);
    let results: Vec<Result<Shard>> = (0..shards)
        .into_par_iter()
        .map(|s| chain.run_shard(s, s * n / shards, (s + 1) * n / shards))
        .collect();
    let mut detections = Vec::new();
    let (mut pairs, mut dark) = (0u64, 0u64);
    for r in results {
        let shard = r?;
        pairs += shard.pairs;
        dark += shard.dark;
        detections.extend(shard.detections);
    }
    detections.sort_by(|a, b| (a.time_ps, a.channel, a.cycle).cmp(&(b.time_ps, b.channel, b.cycle)));

    let rule = start_rule(cfg)?;
    let starts = tdc_starts(&detections, &rule)?;
    let stop_ports: Vec<(String, Option<Port>)> = match cfg.analyzers.signal_794 {
        AnalyzerSetting::TimeOfArrival => vec![("all".into(), None)],
        AnalyzerSetting::Interferometer { .. } => vec![
            ("all".into(), None),
            ("port_plus".into(), Some(Port::Plus)),
            ("port_minus".into(), Some(Port::Minus)),
        ],
    };
    let mut histograms = Vec::new();
    for (name, port) in stop_ports {
        let stops: Vec<i64> = detections
            .iter()
            .filter(|e| e.channel == Channel::Signal794 && (port.is_none() || e.port == port))
            .map(|e| e.time_ps)
            .collect();
        let histogram = histogram_from_times(&starts, &stops, cfg.tdc.bin_width_ps, cfg.tdc.window_ps)?;
        histograms.push(NamedHistogram {
            name,
            stop_port: port,
            histogram,
        });
    }

    let simulated_time_s = n as f64 * cfg.source.rep_period_ps as f64 * 1e-12;
    let duty = cfg.duty_fraction();
    let rate = |count: u64| {
        let raw = count as f64 / simulated_time_s;
        Rate {
            raw_hz: raw,
            duty_normalized_hz: raw * duty,
        }
    };
    let peak_delay = pair_peak_delay(cfg)?;
    let delays = cfg.tdc.g2_delays_ps.clone().unwrap_or_else(|| vec![peak_delay]);
    let g2_opts = G2Options {
        rep_period_ps: cfg.source.rep_period_ps as f64,
        peak_halfwidth_ps: cfg.tdc.peak_halfwidth_ps,
        n_min: cfg.tdc.g2_n_min,
        n_max: cfg.tdc.g2_n_max,
    };
    let mut summaries = Vec::new();
    for h in &histograms {
        let mut ds = Vec::new();
        for &d in &delays {
            let coincidences = h.histogram.coincidence_rate(d as f64, cfg.tdc.peak_halfwidth_ps)?;
            let (g2, g2_error) = match g2_cross(&h.histogram, d as f64, &g2_opts) {
                Ok(g) => (Some(g), None),
                Err(e) => (None, Some(e.to_string())),
            };
            ds.push(DelaySummary {
                delay_ps: d,
                coincidences,
                rate: rate(coincidences),
                g2,
                g2_error,
            });
        }
        summaries.push(HistogramSummary {
            name: h.name.clone(),
            file: histogram_file_name(&h.name),
            stop_port: h.stop_port,
            total_counts: h.histogram.total(),
            peaks_ps: h
                .histogram
                .find_peaks(cfg.tdc.peak_halfwidth_ps, PEAK_MIN_SEPARATION_PS, PEAK_THRESHOLD_SIGMAS)
                .iter()
                .map(|p| p.dt_ps)
                .collect(),
            delays: ds,
        });
    }
    let count = |c: Channel| detections.iter().filter(|e| e.channel == c).count() as u64;
    let summary = SimulationSummary {
        seed: cfg.run.seed,
        cycles: n,
        simulated_time_s,
        pairs,
        signal_detections: count(Channel::Signal794),
        idler_detections: count(Channel::Idler1535),
        dark_counts: dark,
        starts: starts.len() as u64,
        and_offset_ps: rule.and_offset_ps,
        pair_peak_delay_ps: peak_delay,
        duty_fraction: duty,
        start_rate: rate(starts.len() as u64),
        histograms: summaries,
        warnings,
    };
    Ok(SimulationOutput {
        detections,
        starts,
        histograms,
        summary,
    })
}

pub fn histogram_file_name(name: &str) -> String {
    format!("histogram_{name}.csv")
}

/// Files written by [`run_simulation`].
#[derive(Clone, Debug, PartialEq)]
pub struct SimulationFiles {
    pub summary: PathBuf,
    pub histograms: Vec<PathBuf>,
    pub events: Option<PathBuf>,
}

/// Runs the simulation and writes `summary.json`, one `histogram_<name>.csv` per stop
/// selection and, if `run.write_events` is set, `events.csv` (detections and starts).
pub fn run_simulation(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(SimulationSummary, SimulationFiles)> {
    let out = simulate(cfg)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut histograms = Vec::new();
    for h in &out.histograms {
        let path = out_dir.join(histogram_file_name(&h.name));
        h.histogram.write_csv(&path)?;
        histograms.push(path);
    }
    let events = if cfg.run.write_events {
        let path = out_dir.join("events.csv");
        let mut all: Vec<PhotonEvent> = out.detections.iter().chain(&out.starts).cloned().collect();
        all.sort_by(|a, b| (a.time_ps, a.channel, a.cycle).cmp(&(b.time_ps, b.channel, b.cycle)));
        write_events_csv(&all, &path)?;
        Some(path)
    } else {
        None
    };
    let summary_path = out_dir.join("summary.json");
    let json = serde_json::to_string_pretty(&out.summary).expect("summary is serializable");
    std::fs::write(&summary_path, json + "\n").map_err(|e| Error::io(&summary_path, e))?;
    Ok((
        out.summary,
        SimulationFiles {
            summary: summary_path,
            histograms,
            events,
        },
    ))
}
