//! Experiment harness: configuration, end-to-end simulation, analysis of measured data,
//! parameter sweeps and report generation.

mod analysis;
mod chsh;
mod comb;
mod config;
mod report;
mod simulate;
mod sweep;
mod wavelength;

pub use analysis::{
    analyze_chsh, analyze_paper_data, metrics_table_csv, AnalysisOptions, ChshReport, MetricsReport, AnalysisInputs,
    PointMetrics, StateMetrics,
};
pub use chsh::{simulate_chsh, ChshSimulation, SlotCounts};
pub use comb::{comb_tools, CombCommand, CombOutput, EfficiencyReport, SpectrumSource, SpectrumSummary};
pub use config::{
    config_to_toml, load_config, parse_config, save_config, AnalyzerPair, DetectorPair, ExperimentConfig,
    RunConfig, TdcConfig,
};
pub use report::{example_echo_comb, generate_report, Manifest, ManifestEntry, ReportOptions};
pub use simulate::{
    and_offset, histogram_file_name, pair_peak_delay, run_simulation, simulate, start_rule, DelaySummary,
    HistogramSummary, NamedHistogram, Rate, SimulationFiles, SimulationOutput, SimulationSummary,
};
pub use sweep::{parse_sweep_csv, sweep, sweep_point_config, SweepParameter, SweepResult, SweepRow};
pub use wavelength::{ProductDiscrepancy, WavelengthEfficiencyTable, WavelengthRow};
