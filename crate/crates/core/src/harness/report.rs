//! Report generation: every analysis of the shipped tables, plus optionally one
//! simulation, written as plot-ready files with a manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::analysis::{analyze_paper_data, metrics_table_csv, AnalysisOptions, MetricsReport, AnalysisInputs, StateMetrics};
use super::config::ExperimentConfig;
use super::simulate::run_simulation;
use super::wavelength::{ProductDiscrepancy, WavelengthEfficiencyTable};
use crate::error::{Error, Result};
use crate::memory::{echo_response, echoes_to_csv, CombParams, ECHO_THRESHOLD};

#[derive(Clone, Debug, Default)]
pub struct ReportOptions {
    pub analysis: AnalysisOptions,
    /// Simulation to include; its outputs go to `simulation/`.
    pub simulation: Option<ExperimentConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub description: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
    pub wavelength_product_discrepancies: Vec<ProductDiscrepancy>,
}

/// Comb used for the example echo spectrum: 32 ns storage with alternate teeth
/// modulated, which also produces echoes at 16 and 64 ns.
pub fn example_echo_comb() -> CombParams {
    CombParams {
        delta_mhz: 31.25,
        finesse: 2.0,
        d0: 0.2,
        d1: 1.0,
        bandwidth_ghz: 4.0,
        grid_step_mhz: 1.953125,
        modulation: 0.3,
    }
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<ManifestEntry>,
}

impl Writer<'_> {
    fn write(&mut self, name: &str, contents: &str, description: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.files.push(ManifestEntry {
            file: name.to_string(),
            description: description.to_string(),
        });
        Ok(path)
    }
}

fn density_csv(m: &StateMetrics) -> String {
    let mut out = String::from("row,col,re,im\n");
    for (i, (re, im)) in m.rho_re.iter().zip(&m.rho_im).enumerate() {
        for (j, (r, c)) in re.iter().zip(im).enumerate() {
            out += &format!("{i},{j},{r},{c}\n");
        }
    }
    out
}

/// Writes the report for the data files in `data_dir` into `out_dir` and returns the
/// metrics together with the manifest (also written as `manifest.json`).
pub fn generate_report(data_dir: &Path, out_dir: &Path, opts: &ReportOptions) -> Result<(MetricsReport, Manifest)> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut w = Writer {
        dir: out_dir,
        files: Vec::new(),
    };
    let metrics = analyze_paper_data(&AnalysisInputs::in_dir(data_dir), &opts.analysis)?;
    let json = serde_json::to_string_pretty(&metrics).expect("report serializes");
    w.write("metrics.json", &(json + "\n"), "state metrics in percent with Monte-Carlo uncertainties, CHSH S per state")?;
    w.write(
        "metrics.csv",
        &metrics_table_csv(&metrics),
        "headline metrics: fidelity, purity, concurrence, EoF, input-output fidelity, S",
    )?;
    for (name, state, label) in [("rho_in.csv", &metrics.input, "before storage"), ("rho_out.csv", &metrics.output, "after storage and recall")] {
        if let Some(m) = state {
            w.write(name, &density_csv(m), &format!("reconstructed density matrix {label} (row, col, re, im; basis ee, el, le, ll)"))?;
        }
    }

    let table = WavelengthEfficiencyTable::read_csv(&data_dir.join("wavelength_efficiency.csv"))?;
    let discrepancies = table.discrepancies(1e-6);
    w.write(
        "wavelength_efficiency.csv",
        &table.to_csv(),
        "memory efficiencies per wavelength pair with product eta_tm*eta_er and the printed product",
    )?;

    let comb = example_echo_comb().build()?;
    w.write("comb_spectrum.csv", &comb.to_csv(), "optical depth of a modulated 32 ns comb versus detuning")?;
    w.write(
        "comb_echoes.csv",
        &echoes_to_csv(&echo_response(&comb, ECHO_THRESHOLD)),
        "echo delays and relative amplitudes from the Fourier transform of the comb transmission",
    )?;

    if let Some(cfg) = &opts.simulation {
        let sim_dir = out_dir.join("simulation");
        let (_, files) = run_simulation(cfg, &sim_dir)?;
        let rel = |p: &Path| format!("simulation/{}", p.file_name().expect("file").to_string_lossy());
        w.files.push(ManifestEntry {
            file: rel(&files.summary),
            description: "simulation summary: counts, peaks, g² and raw and duty-cycle-normalized rates".into(),
        });
        for h in &files.histograms {
            w.files.push(ManifestEntry {
                file: rel(h),
                description: "start-stop coincidence histogram (dt_ps, counts)".into(),
            });
        }
        if let Some(e) = &files.events {
            w.files.push(ManifestEntry {
                file: rel(e),
                description: "time-tagged detections and gated clock starts".into(),
            });
        }
    }

    let mut manifest = Manifest {
        files: w.files,
        wavelength_product_discrepancies: discrepancies,
    };
    manifest.files.push(ManifestEntry {
        file: "manifest.json".into(),
        description: "this index".into(),
    });
    let path = out_dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok((metrics, manifest))
}
