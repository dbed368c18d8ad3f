//! Parameter sweeps: g² against pair number or pump power, coincidences against the
//! 794 nm analyzer phase.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::simulate::{pair_peak_delay, simulate};
use crate::detection::AnalyzerSetting;
use crate::error::{Error, Result};
use crate::estimation::Estimate;
use crate::linalg::Port;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Mean pair number per pulse μ.
    Mu,
    /// Pump power relative to the configured one; μ scales linearly with it.
    PumpPower,
    /// Phase of the 794 nm interferometer, radians.
    Phase,
}

impl SweepParameter {
    /// Name of the metric column.
    pub fn metric(self) -> &'static str {
        match self {
            SweepParameter::Mu | SweepParameter::PumpPower => "g2",
            SweepParameter::Phase => "coincidences",
        }
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParameter::Mu => "mu",
            SweepParameter::PumpPower => "pump_power",
            SweepParameter::Phase => "phase",
        })
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "mu" => Ok(SweepParameter::Mu),
            "pump_power" => Ok(SweepParameter::PumpPower),
            "phase" => Ok(SweepParameter::Phase),
            other => Err(Error::invalid(format!(
                "unknown sweep parameter `{other}` (expected mu, pump_power or phase)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub metric: Estimate,
    /// Coincidences at the pair peak.
    pub coincidences: u64,
    pub starts: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub parameter: SweepParameter,
    pub metric: String,
    pub delay_ps: i64,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// `value,metric,sigma,coincidences,starts`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("value,metric,sigma,coincidences,starts\n");
        for r in &self.rows {
            out += &format!(
                "{},{},{},{},{}\n",
                r.value, r.metric.value, r.metric.sigma, r.coincidences, r.starts
            );
        }
        out
    }

    /// `(value, metric)` pairs, e.g. for a visibility fit of a phase sweep.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.value, r.metric.value)).collect()
    }
}

/// Reads the CSV written by [`SweepResult::to_csv`].
pub fn parse_sweep_csv(text: &str, origin: &str) -> Result<Vec<SweepRow>> {
    #[derive(Deserialize)]
    struct Record {
        value: f64,
        metric: f64,
        sigma: f64,
        coincidences: u64,
        starts: u64,
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    reader
        .deserialize::<Record>()
        .map(|r| {
            let r = r.map_err(|e| Error::Parse {
                path: origin.to_string(),
                line: e.position().map(|p| p.line() as usize).unwrap_or(0),
                msg: e.to_string(),
            })?;
            Ok(SweepRow {
                value: r.value,
                metric: Estimate::new(r.metric, r.sigma),
                coincidences: r.coincidences,
                starts: r.starts,
            })
        })
        .collect()
}

/// The configuration simulated for one sweep point.
pub fn sweep_point_config(parameter: SweepParameter, value: f64, cfg: &ExperimentConfig) -> ExperimentConfig {
    let mut c = cfg.clone();
    match parameter {
        SweepParameter::Mu => c.source.mean_pairs_per_pulse = value,
        SweepParameter::PumpPower => c.source.mean_pairs_per_pulse = cfg.source.mean_pairs_per_pulse * value,
        SweepParameter::Phase => {
            c.analyzers.signal_794 = AnalyzerSetting::interferometer(value);
            if c.analyzers.idler_1535 == AnalyzerSetting::TimeOfArrival {
                c.analyzers.idler_1535 = AnalyzerSetting::interferometer(0.0);
            }
            c.tdc.herald_port.get_or_insert(Port::Plus);
        }
    }
    c
}

/// Simulates every value with the same seed. g² sweeps read the summed histogram at
/// the pair peak; phase sweeps count coincidences on the `+` port of the 794 nm
/// analyzer (Poisson uncertainty).
pub fn sweep(parameter: SweepParameter, values: &[f64], cfg: &ExperimentConfig) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(Error::EmptyInput("sweep values".into()));
    }
    let mut rows = Vec::with_capacity(values.len());
    let mut delay_ps = 0;
    for &value in values {
        let mut c = sweep_point_config(parameter, value, cfg);
        delay_ps = pair_peak_delay(&c)?;
        c.tdc.g2_delays_ps = Some(vec![delay_ps]);
        let out = simulate(&c)?;
        let name = match parameter {
            SweepParameter::Phase => "port_plus",
            _ => "all",
        };
        let summary = out
            .summary
            .histograms
            .iter()
            .find(|h| h.name == name)
            .ok_or_else(|| Error::invalid(format!("missing histogram {name}")))?;
        let d = &summary.delays[0];
        let metric = match parameter {
            SweepParameter::Phase => Estimate::new(d.coincidences as f64, (d.coincidences as f64).sqrt()),
            _ => d.g2.ok_or_else(|| {
                Error::UndefinedEstimate(format!(
                    "g² at {parameter} = {value}: {}",
                    d.g2_error.clone().unwrap_or_default()
                ))
            })?,
        };
        rows.push(SweepRow {
            value,
            metric,
            coincidences: d.coincidences,
            starts: out.summary.starts,
        });
    }
    Ok(SweepResult {
        parameter,
        metric: parameter.metric().to_string(),
        delay_ps,
        rows,
    })
}
