//! Comb utilities: build a spectrum, fit one, evaluate the efficiency formula and list
//! the echoes of a spectrum.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::{
    device_efficiency, echo_response, echo_response_from_samples, echoes_to_csv, fit_comb, read_comb_csv,
    CombFit, CombParams, CombSpectrum, Echo,
};

/// Where the echoes subcommand takes its spectrum from.
#[derive(Clone, Debug, PartialEq)]
pub enum SpectrumSource {
    Params(CombParams),
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub enum CombCommand {
    Build(CombParams),
    Fit(PathBuf),
    Efficiency { d0: f64, d1: f64, finesse: f64 },
    Echoes { source: SpectrumSource, threshold: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub d0: f64,
    pub d1: f64,
    pub finesse: f64,
    pub device_efficiency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub delta_mhz: f64,
    pub storage_time_ns: f64,
    pub finesse: f64,
    pub d0: f64,
    pub d1: f64,
    pub modulation: f64,
    pub bandwidth_ghz: f64,
    pub samples: usize,
    pub teeth: usize,
    pub mean_optical_depth: f64,
    pub device_efficiency: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CombOutput {
    Spectrum(CombSpectrum),
    Fit(CombFit),
    Efficiency(EfficiencyReport),
    Echoes(Vec<Echo>),
}

impl CombOutput {
    pub fn to_csv(&self) -> String {
        match self {
            CombOutput::Spectrum(s) => s.to_csv(),
            CombOutput::Fit(f) => format!(
                "d0,d1,finesse,delta_mhz,residual_rms\n{},{},{},{},{}\n",
                f.d0, f.d1, f.finesse, f.delta_mhz, f.residual_rms
            ),
            CombOutput::Efficiency(e) => format!(
                "d0,d1,finesse,device_efficiency\n{},{},{},{}\n",
                e.d0, e.d1, e.finesse, e.device_efficiency
            ),
            CombOutput::Echoes(e) => echoes_to_csv(e),
        }
    }

    /// For a spectrum, a summary rather than every sample.
    pub fn to_json(&self) -> serde_json::Value {
        let value = match self {
            CombOutput::Spectrum(s) => serde_json::to_value(SpectrumSummary {
                delta_mhz: s.delta_mhz,
                storage_time_ns: s.storage_time_ns(),
                finesse: s.finesse,
                d0: s.d0,
                d1: s.d1,
                modulation: s.modulation,
                bandwidth_ghz: s.bandwidth_ghz,
                samples: s.detuning_mhz.len(),
                teeth: s.teeth(),
                mean_optical_depth: s.mean_optical_depth(),
                device_efficiency: s.device_efficiency(),
            }),
            CombOutput::Fit(f) => serde_json::to_value(f),
            CombOutput::Efficiency(e) => serde_json::to_value(e),
            CombOutput::Echoes(e) => serde_json::to_value(e),
        };
        value.expect("plain data serializes")
    }
}

pub fn comb_tools(cmd: &CombCommand) -> Result<CombOutput> {
    Ok(match cmd {
        CombCommand::Build(p) => CombOutput::Spectrum(p.build()?),
        CombCommand::Fit(path) => CombOutput::Fit(fit_comb(&read_comb_csv(path)?)?),
        &CombCommand::Efficiency { d0, d1, finesse } => {
            let device_efficiency = device_efficiency(d0, d1, finesse);
            if !device_efficiency.is_finite() || d0 < 0.0 || d1 < 0.0 || finesse <= 0.0 {
                return Err(Error::InvalidArgument(
                    "efficiency needs d0 ≥ 0, d1 ≥ 0 and finesse > 0".into(),
                ));
            }
            CombOutput::Efficiency(EfficiencyReport {
                d0,
                d1,
                finesse,
                device_efficiency,
            })
        }
        CombCommand::Echoes { source, threshold } => CombOutput::Echoes(match source {
            SpectrumSource::Params(p) => echo_response(&p.build()?, *threshold),
            SpectrumSource::File(path) => echo_response_from_samples(&read_comb_csv(path)?, *threshold)?,
        }),
    })
}
