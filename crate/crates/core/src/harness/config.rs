//! Experiment configuration: a single TOML file with strict keys.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detection::{AnalyzerSetting, DetectorConfig};
use crate::error::{Error, Result};
use crate::linalg::Port;
use crate::memory::{MemoryConfig, MemoryModel};
use crate::source::SourceConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunConfig,
    pub source: SourceConfig,
    /// Thulium memory on the 794 nm arm; absent means a plain fibre.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_794: Option<MemoryConfig>,
    /// Erbium memory on the 1535 nm arm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_1535: Option<MemoryConfig>,
    #[serde(default)]
    pub detectors: DetectorPair,
    #[serde(default)]
    pub analyzers: AnalyzerPair,
    #[serde(default)]
    pub tdc: TdcConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_cycles")]
    pub cycles: u64,
    #[serde(default = "default_shards")]
    pub shards: u64,
    #[serde(default)]
    pub write_events: bool,
}

fn default_cycles() -> u64 {
    1_000_000
}

fn default_shards() -> u64 {
    16
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorPair {
    pub signal_794: DetectorConfig,
    pub idler_1535: DetectorConfig,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyzerPair {
    pub signal_794: AnalyzerSetting,
    pub idler_1535: AnalyzerSetting,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TdcConfig {
    pub bin_width_ps: i64,
    pub window_ps: i64,
    pub peak_halfwidth_ps: f64,
    /// Delay of the gated clock tick after the pump pulse. Defaults to the arrival slot
    /// of a recalled, analyzed 1535 nm photon.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub and_offset_ps: Option<i64>,
    pub and_width_ps: i64,
    /// Herald detector port; `None` accepts both.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub herald_port: Option<Port>,
    /// Delays at which g² is reported. Defaults to the stored-and-recalled pair peak.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g2_delays_ps: Option<Vec<i64>>,
    pub g2_n_min: i64,
    pub g2_n_max: i64,
}

impl Default for TdcConfig {
    fn default() -> Self {
        Self {
            bin_width_ps: 80,
            window_ps: 100_000,
            peak_halfwidth_ps: 500.0,
            and_offset_ps: None,
            and_width_ps: 1_000,
            herald_port: None,
            g2_delays_ps: None,
            g2_n_min: -5,
            g2_n_max: 5,
        }
    }
}

impl ExperimentConfig {
    /// Configuration with every optional part at its default.
    pub fn minimal(seed: u64, mean_pairs_per_pulse: f64) -> Self {
        Self {
            run: RunConfig {
                seed,
                cycles: default_cycles(),
                shards: default_shards(),
                write_events: false,
            },
            source: SourceConfig::new(mean_pairs_per_pulse),
            memory_794: None,
            memory_1535: None,
            detectors: DetectorPair::default(),
            analyzers: AnalyzerPair::default(),
            tdc: TdcConfig::default(),
        }
    }

    /// Checks every invariant; returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.run.cycles == 0 {
            return Err(Error::config("run.cycles", "must be positive"));
        }
        if self.run.shards == 0 {
            return Err(Error::config("run.shards", "must be positive"));
        }
        let warnings = self.source.validate()?;
        self.memory_models()?;
        self.detectors.signal_794.validate("detectors.signal_794")?;
        self.detectors.idler_1535.validate("detectors.idler_1535")?;
        self.analyzers.signal_794.validate("analyzers.signal_794")?;
        self.analyzers.idler_1535.validate("analyzers.idler_1535")?;
        let t = &self.tdc;
        if t.bin_width_ps <= 0 {
            return Err(Error::config("tdc.bin_width_ps", "must be positive"));
        }
        if t.window_ps < t.bin_width_ps {
            return Err(Error::config("tdc.window_ps", "must be at least one bin wide"));
        }
        if !(t.peak_halfwidth_ps >= 0.0) {
            return Err(Error::config("tdc.peak_halfwidth_ps", "must be ≥ 0"));
        }
        if t.and_width_ps <= 0 || t.and_width_ps > self.source.rep_period_ps {
            return Err(Error::config("tdc.and_width_ps", "must be in (0, rep_period_ps]"));
        }
        if t.g2_n_min > t.g2_n_max || (t.g2_n_min == 0 && t.g2_n_max == 0) {
            return Err(Error::config("tdc.g2_n_min", "reference range must contain n ≠ 0"));
        }
        Ok(warnings)
    }

    pub fn memory_models(&self) -> Result<(Option<MemoryModel>, Option<MemoryModel>)> {
        let signal = self
            .memory_794
            .as_ref()
            .map(|m| MemoryModel::from_config(m, "memory_794"))
            .transpose()?;
        let idler = self
            .memory_1535
            .as_ref()
            .map(|m| MemoryModel::from_config(m, "memory_1535"))
            .transpose()?;
        Ok((signal, idler))
    }

    /// Fraction of wall-clock time during which photons are stored and counted: the
    /// storage period over the longest preparation cycle of the configured memories.
    pub fn duty_fraction(&self) -> f64 {
        let cycles: Vec<_> = [&self.memory_794, &self.memory_1535]
            .into_iter()
            .flatten()
            .filter_map(|m| m.duty_cycle)
            .collect();
        if cycles.is_empty() {
            return 1.0;
        }
        let total = cycles.iter().map(|d| d.total_ms()).fold(0.0, f64::max);
        let storage = cycles.iter().map(|d| d.storage_ms).fold(f64::INFINITY, f64::min);
        storage / total
    }
}

pub fn parse_config(text: &str, origin: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        Error::Parse {
            path: origin.to_string(),
            line,
            msg: e.message().to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, &path.display().to_string())
}

pub fn config_to_toml(cfg: &ExperimentConfig) -> Result<String> {
    toml::to_string_pretty(cfg).map_err(|e| Error::invalid(format!("cannot serialize config: {e}")))
}

pub fn save_config(cfg: &ExperimentConfig, path: &Path) -> Result<()> {
    std::fs::write(path, config_to_toml(cfg)?).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config("[run]\nseed = 7\n[source]\nmean_pairs_per_pulse = 0.016\n", "t").unwrap();
        assert_eq!(cfg.source.rep_period_ps, 12_500);
        assert_eq!(cfg.source.bin_separation_ps, 1_400);
        assert_eq!(cfg.tdc.bin_width_ps, 80);
        assert_eq!(cfg.detectors.signal_794.jitter_fwhm_ps, 250.0);
        assert_eq!(cfg.detectors.idler_1535.efficiency, 0.7);
        assert_eq!(cfg, ExperimentConfig::minimal(7, 0.016));
    }

    #[test]
    fn seed_is_mandatory() {
        let err = parse_config("[run]\ncycles = 5\n[source]\nmean_pairs_per_pulse = 0.016\n", "t").unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = "[run]\nseed = 1\n[source]\nmean_pairs_per_pulse = 0.016\nmean_pair_per_pulse = 1\n";
        let err = parse_config(text, "t").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 5, .. }), "{err:?}");
        let text = "[run]\nseed = 1\n[source]\nmean_pairs_per_pulse = 0.016\n[detectors.signal_794]\neficiency = 0.5\n";
        assert!(parse_config(text, "t").is_err());
    }

    #[test]
    fn overlapping_bins_rejected() {
        let text = "[run]\nseed = 1\n[source]\nmean_pairs_per_pulse = 0.016\nrep_period_ps = 2000\n";
        match parse_config(text, "t").unwrap_err() {
            Error::Config { key, .. } => assert_eq!(key, "source.rep_period_ps"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn analyzer_table_syntax() {
        let text = r#"
[run]
seed = 1
[source]
mean_pairs_per_pulse = 0.016
[analyzers]
signal_794 = { mode = "interferometer", phase = 1.5 }
"#;
        let cfg = parse_config(text, "t").unwrap();
        assert_eq!(cfg.analyzers.signal_794, AnalyzerSetting::Interferometer { phase: 1.5 });
        assert_eq!(cfg.analyzers.idler_1535, AnalyzerSetting::TimeOfArrival);
    }
}
