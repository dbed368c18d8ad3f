//! Analysis of measured tomography and CHSH tables.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::chsh::{chsh_s, minus_slot_for, read_chsh_csv, ChshSettings, Slot};
use crate::estimation::montecarlo::{monte_carlo_metrics, monte_carlo_pair, Metric, MetricSummary, MonteCarloOptions};
use crate::estimation::{fidelity, tomography_mle, ChshCorrelations, Estimate, MleOptions, TomographyInput};
use crate::linalg::DensityMatrix;

/// Input files; any subset may be given.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AnalysisInputs {
    /// Tomography of the pair before storage.
    pub tomography_in: Option<PathBuf>,
    /// Tomography after storage and recall.
    pub tomography_out: Option<PathBuf>,
    pub chsh: Option<PathBuf>,
}

impl AnalysisInputs {
    /// The three data files shipped in `dir` under their standard names.
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            tomography_in: Some(dir.join("tomography_in.csv")),
            tomography_out: Some(dir.join("tomography_out.csv")),
            chsh: Some(dir.join("chsh.csv")),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct AnalysisOptions {
    pub mle: MleOptions,
    pub monte_carlo: MonteCarloOptions,
}

/// Metrics of one reconstructed state, in percent. The estimates are Monte-Carlo means
/// and standard deviations; `point` holds the values of the unperturbed reconstruction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateMetrics {
    pub fidelity_with_phi_plus: Estimate,
    pub purity: Estimate,
    pub concurrence: Estimate,
    pub entanglement_of_formation: Estimate,
    pub point: PointMetrics,
    /// Real and imaginary parts of ρ, row-major.
    pub rho_re: Vec<Vec<f64>>,
    pub rho_im: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointMetrics {
    pub fidelity_with_phi_plus: f64,
    pub purity: f64,
    pub concurrence: f64,
    pub entanglement_of_formation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChshReport {
    pub state: String,
    pub correlations: ChshCorrelations,
    pub minus_slot: Slot,
    pub s: Estimate,
    /// `(S − 2)/σ_S`.
    pub violation_sigmas: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<StateMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<StateMetrics>,
    /// Fidelity between the input and output states, percent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_output_fidelity: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_output_fidelity_point: Option<f64>,
    pub chsh: Vec<ChshReport>,
    pub monte_carlo_trials: usize,
}

impl MetricsReport {
    pub fn chsh_for(&self, state: &str) -> Option<&ChshReport> {
        self.chsh.iter().find(|c| c.state == state)
    }
}

fn percent(e: Estimate) -> Estimate {
    Estimate::new(100.0 * e.value, 100.0 * e.sigma)
}

fn matrix_parts(rho: &DensityMatrix) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let m = rho.matrix();
    let n = m.dim();
    let re = (0..n).map(|i| (0..n).map(|j| m[(i, j)].re).collect()).collect();
    let im = (0..n).map(|i| (0..n).map(|j| m[(i, j)].im).collect()).collect();
    (re, im)
}

fn state_metrics(rho: &DensityMatrix, mc: &MetricSummary) -> Result<StateMetrics> {
    let p = |m: Metric| m.evaluate(rho).map(|v| 100.0 * v);
    let (rho_re, rho_im) = matrix_parts(rho);
    Ok(StateMetrics {
        fidelity_with_phi_plus: percent(mc.fidelity_phi_plus),
        purity: percent(mc.purity),
        concurrence: percent(mc.concurrence),
        entanglement_of_formation: percent(mc.entanglement_of_formation),
        point: PointMetrics {
            fidelity_with_phi_plus: p(Metric::FidelityPhiPlus)?,
            purity: p(Metric::Purity)?,
            concurrence: p(Metric::Concurrence)?,
            entanglement_of_formation: p(Metric::EntanglementOfFormation)?,
        },
        rho_re,
        rho_im,
    })
}

/// S for every state in a CHSH table, with the default settings and pump phase 0.
pub fn analyze_chsh(path: &Path) -> Result<Vec<ChshReport>> {
    let minus = minus_slot_for(&ChshSettings::default(), 0.0)?;
    read_chsh_csv(path)?
        .into_iter()
        .map(|(state, correlations)| {
            let s = chsh_s(&correlations, minus);
            Ok(ChshReport {
                state,
                correlations,
                minus_slot: minus,
                violation_sigmas: (s.value - 2.0) / s.sigma,
                s,
            })
        })
        .collect()
}

/// Reconstructs the states, evaluates every metric with Monte-Carlo uncertainties and
/// computes S for each CHSH row.
pub fn analyze_paper_data(inputs: &AnalysisInputs, opts: &AnalysisOptions) -> Result<MetricsReport> {
    if inputs.tomography_in.is_none() && inputs.tomography_out.is_none() && inputs.chsh.is_none() {
        return Err(Error::EmptyInput("analysis inputs (no tomography or CHSH file)".into()));
    }
    let load = |p: &Option<PathBuf>| p.as_deref().map(TomographyInput::read_csv).transpose();
    let data_in = load(&inputs.tomography_in)?;
    let data_out = load(&inputs.tomography_out)?;
    let mut report = MetricsReport {
        input: None,
        output: None,
        input_output_fidelity: None,
        input_output_fidelity_point: None,
        chsh: Vec::new(),
        monte_carlo_trials: opts.monte_carlo.trials,
    };
    match (&data_in, &data_out) {
        (Some(a), Some(b)) => {
            let rho_a = tomography_mle(a, &opts.mle)?.rho;
            let rho_b = tomography_mle(b, &opts.mle)?.rho;
            let mc = monte_carlo_pair(a, b, &opts.mle, &opts.monte_carlo)?;
            report.input = Some(state_metrics(&rho_a, &mc.first)?);
            report.output = Some(state_metrics(&rho_b, &mc.second)?);
            report.input_output_fidelity = Some(percent(mc.mutual_fidelity));
            report.input_output_fidelity_point = Some(100.0 * fidelity(&rho_a, &rho_b)?);
        }
        (Some(data), None) | (None, Some(data)) => {
            let rho = tomography_mle(data, &opts.mle)?.rho;
            let mc = monte_carlo_metrics(data, &opts.mle, &opts.monte_carlo)?;
            let m = Some(state_metrics(&rho, &mc)?);
            if data_in.is_some() {
                report.input = m;
            } else {
                report.output = m;
            }
        }
        (None, None) => {}
    }
    if let Some(path) = &inputs.chsh {
        report.chsh = analyze_chsh(path)?;
    }
    Ok(report)
}

/// The headline numbers as a small CSV table (`quantity,state,value,sigma`).
pub fn metrics_table_csv(report: &MetricsReport) -> String {
    let mut out = String::from("quantity,state,value,sigma\n");
    for (state, m) in [("in", &report.input), ("out", &report.output)] {
        if let Some(m) = m {
            for (name, e) in [
                ("fidelity_with_phi_plus", m.fidelity_with_phi_plus),
                ("purity", m.purity),
                ("concurrence", m.concurrence),
                ("entanglement_of_formation", m.entanglement_of_formation),
            ] {
                out += &format!("{name},{state},{},{}\n", e.value, e.sigma);
            }
        }
    }
    if let Some(f) = report.input_output_fidelity {
        out += &format!("input_output_fidelity,in-out,{},{}\n", f.value, f.sigma);
    }
    for c in &report.chsh {
        out += &format!("chsh_s,{},{},{}\n", c.state, c.s.value, c.s.sigma);
    }
    out
}
