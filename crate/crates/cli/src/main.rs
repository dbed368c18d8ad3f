//! Command-line front end: simulate, analyze, comb, sweep, report.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use afclink::estimation::montecarlo::MonteCarloOptions;
use afclink::estimation::visibility::visibility_fit;
use afclink::harness::{
    analyze_paper_data, comb_tools, generate_report, load_config, metrics_table_csv, run_simulation, simulate, sweep,
    AnalysisOptions, CombCommand, CombOutput, ExperimentConfig, AnalysisInputs, ReportOptions, SimulationSummary,
    SpectrumSource, SweepParameter,
};
use afclink::memory::{CombParams, ECHO_THRESHOLD};

#[derive(Parser, Debug)]
#[command(name = "afclink", version, about = "Entanglement between two AFC quantum memories: simulation and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct Common {
    /// Directory for output files; without it results go to stdout only.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `run.cycles`.
    #[arg(long)]
    cycles: Option<u64>,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = load_config(&self.config)?;
        if let Some(s) = self.seed {
            cfg.run.seed = s;
        }
        if let Some(c) = self.cycles {
            cfg.run.cycles = c;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the end-to-end event simulation.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Also write the event stream.
        #[arg(long)]
        events: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Reconstruct states and evaluate metrics and S from measured tables.
    Analyze {
        /// Directory holding tomography_in.csv, tomography_out.csv and chsh.csv.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        tomography_in: Option<PathBuf>,
        #[arg(long)]
        tomography_out: Option<PathBuf>,
        #[arg(long)]
        chsh: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Monte-Carlo seed.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Comb spectra, fits, efficiency formula and echoes.
    Comb {
        #[command(subcommand)]
        command: CombSub,
        #[command(flatten)]
        common: Common,
    },
    /// Repeat the simulation over a list of parameter values.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// mu, pump_power or phase.
        #[arg(long)]
        parameter: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Write every analysis of the shipped tables (and optionally a simulation) with a manifest.
    Report {
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Simulation to include.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
}

#[derive(Args, Debug, Clone)]
struct CombArgs {
    #[arg(long, default_value_t = 31.25)]
    delta_mhz: f64,
    #[arg(long, default_value_t = 2.0)]
    finesse: f64,
    #[arg(long, default_value_t = 0.0)]
    d0: f64,
    #[arg(long, default_value_t = 1.0)]
    d1: f64,
    #[arg(long, default_value_t = 4.0)]
    bandwidth_ghz: f64,
    #[arg(long, default_value_t = 1.953125)]
    grid_step_mhz: f64,
    #[arg(long, default_value_t = 0.0)]
    modulation: f64,
}

impl From<CombArgs> for CombParams {
    fn from(a: CombArgs) -> Self {
        CombParams {
            delta_mhz: a.delta_mhz,
            finesse: a.finesse,
            d0: a.d0,
            d1: a.d1,
            bandwidth_ghz: a.bandwidth_ghz,
            grid_step_mhz: a.grid_step_mhz,
            modulation: a.modulation,
        }
    }
}

#[derive(Subcommand, Debug)]
enum CombSub {
    /// Optical depth versus detuning.
    Build(CombArgs),
    /// Fit the tooth model to a `detuning_MHz,optical_depth` file.
    Fit {
        #[arg(long)]
        input: PathBuf,
    },
    /// Device efficiency of the primary echo.
    Efficiency {
        #[arg(long, default_value_t = 0.0)]
        d0: f64,
        #[arg(long)]
        d1: f64,
        #[arg(long)]
        finesse: f64,
    },
    /// Echo delays and amplitudes of a spectrum file or of a comb built from parameters.
    Echoes {
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        comb: CombArgs,
        #[arg(long, default_value_t = ECHO_THRESHOLD)]
        threshold: f64,
    },
}

fn emit(common: &Common, name: &str, csv: String, json: serde_json::Value) -> Result<()> {
    let text = match common.format {
        Format::Csv => csv,
        Format::Json => serde_json::to_string_pretty(&json)? + "\n",
    };
    if let Some(dir) = &common.out_dir {
        std::fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
        let ext = if common.format == Format::Csv { "csv" } else { "json" };
        let path = dir.join(format!("{name}.{ext}"));
        std::fs::write(&path, &text).with_context(|| path.display().to_string())?;
    }
    std::io::stdout().write_all(text.as_bytes())?;
    Ok(())
}

fn summary_csv(s: &SimulationSummary) -> String {
    let mut out = String::from("histogram,delay_ps,coincidences,g2,g2_sigma,raw_hz,duty_normalized_hz\n");
    for h in &s.histograms {
        for d in &h.delays {
            let (g, gs) = d.g2.map(|g| (g.value.to_string(), g.sigma.to_string())).unwrap_or_default();
            out += &format!(
                "{},{},{},{},{},{},{}\n",
                h.name, d.delay_ps, d.coincidences, g, gs, d.rate.raw_hz, d.rate.duty_normalized_hz
            );
        }
    }
    out
}

fn analysis_options(trials: usize, seed: Option<u64>) -> AnalysisOptions {
    let mut opts = AnalysisOptions::default();
    opts.monte_carlo = MonteCarloOptions {
        trials,
        seed: seed.unwrap_or(opts.monte_carlo.seed),
    };
    opts
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { run, events, common } => {
            let mut cfg = run.load()?;
            cfg.run.write_events |= events;
            let summary = match &common.out_dir {
                Some(dir) => run_simulation(&cfg, dir)?.0,
                None => simulate(&cfg)?.summary,
            };
            let csv = summary_csv(&summary);
            let text = match common.format {
                Format::Csv => csv,
                Format::Json => serde_json::to_string_pretty(&summary)? + "\n",
            };
            std::io::stdout().write_all(text.as_bytes())?;
        }
        Command::Analyze {
            data_dir,
            tomography_in,
            tomography_out,
            chsh,
            trials,
            seed,
            common,
        } => {
            let mut inputs = data_dir.as_deref().map(AnalysisInputs::in_dir).unwrap_or_default();
            inputs.tomography_in = tomography_in.or(inputs.tomography_in);
            inputs.tomography_out = tomography_out.or(inputs.tomography_out);
            inputs.chsh = chsh.or(inputs.chsh);
            let report = analyze_paper_data(&inputs, &analysis_options(trials, seed))?;
            emit(&common, "metrics", metrics_table_csv(&report), serde_json::to_value(&report)?)?;
        }
        Command::Comb { command, common } => {
            let (name, cmd) = match command {
                CombSub::Build(a) => ("comb_spectrum", CombCommand::Build(a.into())),
                CombSub::Fit { input } => ("comb_fit", CombCommand::Fit(input)),
                CombSub::Efficiency { d0, d1, finesse } => ("comb_efficiency", CombCommand::Efficiency { d0, d1, finesse }),
                CombSub::Echoes { input, comb, threshold } => (
                    "comb_echoes",
                    CombCommand::Echoes {
                        source: match input {
                            Some(p) => SpectrumSource::File(p),
                            None => SpectrumSource::Params(comb.into()),
                        },
                        threshold,
                    },
                ),
            };
            let out: CombOutput = comb_tools(&cmd)?;
            emit(&common, name, out.to_csv(), out.to_json())?;
        }
        Command::Sweep {
            run,
            parameter,
            values,
            common,
        } => {
            let parameter: SweepParameter = parameter.parse()?;
            let cfg = run.load()?;
            let result = sweep(parameter, &values, &cfg)?;
            let mut json = serde_json::to_value(&result)?;
            if parameter == SweepParameter::Phase && values.len() >= 6 {
                if let Ok(fit) = visibility_fit(&result.points()) {
                    json["visibility_fit"] = serde_json::to_value(fit)?;
                }
            }
            emit(&common, "sweep", result.to_csv(), json)?;
        }
        Command::Report {
            data_dir,
            out_dir,
            config,
            seed,
            trials,
        } => {
            let simulation = match config {
                Some(path) => {
                    let mut cfg = load_config(&path)?;
                    if let Some(s) = seed {
                        cfg.run.seed = s;
                    }
                    Some(cfg)
                }
                None => None,
            };
            let opts = ReportOptions {
                analysis: analysis_options(trials, None),
                simulation,
            };
            let (_, manifest) = generate_report(&data_dir, &out_dir, &opts)?;
            println!("{}", serde_json::to_string_pretty(&manifest)?);
        }
    }
    Ok(())
}

fn error_json(err: &anyhow::Error) -> serde_json::Value {
    use afclink::Error as E;
    let kind = err.downcast_ref::<E>().map_or("error", E::kind);
    let message = match err.downcast_ref::<E>() {
        Some(e) => e.to_string(),
        None => format!("{err:#}"),
    };
    let mut v = json!({ "error": kind, "message": message });
    if let Some(E::Config { key, .. }) = err.downcast_ref::<E>() {
        v["key"] = json!(key);
    }
    if let Some(E::Parse { path, line, .. }) = err.downcast_ref::<E>() {
        v["path"] = json!(path);
        v["line"] = json!(line);
    }
    v
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": "usage", "message": e.to_string().trim_end() }));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::FAILURE
        }
    }
}
