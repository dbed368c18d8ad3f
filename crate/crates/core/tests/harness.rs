use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use afclink::detection::{parse_events_csv, AnalyzerSetting, Channel, CoincidenceHistogram, DetectorConfig};
use afclink::estimation::visibility::visibility_fit;
use afclink::harness::*;
use afclink::memory::{parse_comb_csv, parse_echoes_csv};
use afclink::source::PumpMode;
use afclink::Error;

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn config(name: &str) -> ExperimentConfig {
    load_config(&repo().join("configs").join(name)).unwrap()
}

fn ideal(seed: u64, mu: f64, cycles: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::minimal(seed, mu);
    cfg.run.cycles = cycles;
    cfg.source.pump_mode = PumpMode::EarlyOnly;
    cfg.detectors.signal_794 = DetectorConfig::ideal();
    cfg.detectors.idler_1535 = DetectorConfig::ideal();
    cfg
}

#[test]
fn shipped_configs_load_and_round_trip() {
    for name in ["realistic.toml", "boosted.toml", "chsh_boosted.toml", "ideal_early_only.toml", "ideal_entangled.toml"] {
        let cfg = config(name);
        let text = config_to_toml(&cfg).unwrap();
        assert_eq!(parse_config(&text, name).unwrap(), cfg, "{name}");
    }
}

#[test]
fn save_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    let mut cfg = config("boosted.toml");
    cfg.analyzers.signal_794 = AnalyzerSetting::interferometer(0.7);
    cfg.tdc.herald_port = Some(afclink::linalg::Port::Minus);
    save_config(&cfg, &path).unwrap();
    assert_eq!(load_config(&path).unwrap(), cfg);
}

#[test]
fn invalid_memory_key_is_named() {
    let mut text = std::fs::read_to_string(repo().join("configs/boosted.toml")).unwrap();
    text = text.replacen("coupling_efficiency = 1.0", "coupling_efficiency = 1.5", 1);
    match parse_config(&text, "t").unwrap_err() {
        Error::Config { key, .. } => assert!(key.starts_with("memory_794"), "{key}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn identical_config_gives_identical_files() {
    let mut cfg = config("boosted.toml");
    cfg.run.cycles = 400_000;
    cfg.run.write_events = true;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (_, fa) = run_simulation(&cfg, a.path()).unwrap();
    run_simulation(&cfg, b.path()).unwrap();
    let mut names: Vec<PathBuf> = fa.histograms.clone();
    names.push(fa.summary.clone());
    names.push(fa.events.clone().unwrap());
    for p in names {
        let name = p.file_name().unwrap();
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name:?} differs");
    }
}

#[test]
fn outputs_reparse() {
    let mut cfg = config("boosted.toml");
    cfg.run.cycles = 200_000;
    cfg.run.write_events = true;
    cfg.analyzers.signal_794 = AnalyzerSetting::interferometer(0.3);
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(&cfg).unwrap();
    let (summary, files) = run_simulation(&cfg, dir.path()).unwrap();
    assert_eq!(files.histograms.len(), 3);
    for (path, h) in files.histograms.iter().zip(&out.histograms) {
        let text = std::fs::read_to_string(path).unwrap();
        let back = CoincidenceHistogram::parse_csv(&text, "h").unwrap();
        assert_eq!(back.counts(), h.histogram.counts());
    }
    let text = std::fs::read_to_string(files.events.unwrap()).unwrap();
    let events = parse_events_csv(&text, "e").unwrap();
    assert_eq!(events.len(), out.detections.len() + out.starts.len());
    assert_eq!(events.iter().filter(|e| e.channel == Channel::Clock).count() as u64, summary.starts);
    let json: SimulationSummary =
        serde_json::from_str(&std::fs::read_to_string(files.summary).unwrap()).unwrap();
    assert_eq!(json, summary);
}

#[test]
fn zero_efficiency_gives_empty_histogram() {
    let mut cfg = config("boosted.toml");
    cfg.run.cycles = 100_000;
    cfg.detectors.signal_794.efficiency = 0.0;
    cfg.detectors.idler_1535.efficiency = 0.0;
    cfg.detectors.signal_794.dark_rate_hz = 0.0;
    cfg.detectors.idler_1535.dark_rate_hz = 0.0;
    let out = simulate(&cfg).unwrap();
    assert!(out.detections.is_empty());
    assert_eq!(out.summary.starts, 0);
    let h = out.histogram("all").unwrap();
    assert_eq!((h.starts(), h.total()), (0, 0));
    let d = &out.summary.histograms[0].delays[0];
    assert!(d.g2.is_none() && d.g2_error.is_some());
}

#[test]
fn every_surviving_pair_cycle_starts_once() {
    let cfg = ideal(3, 0.05, 200_000);
    let out = simulate(&cfg).unwrap();
    let cycles: BTreeSet<u64> = out
        .detections
        .iter()
        .filter(|e| e.channel == Channel::Idler1535)
        .map(|e| e.cycle)
        .collect();
    assert_eq!(out.summary.idler_detections, out.summary.pairs);
    assert_eq!(out.summary.starts as usize, cycles.len());
    let started: BTreeSet<u64> = out.starts.iter().map(|s| s.cycle).collect();
    assert_eq!(started, cycles);
}

#[test]
fn shard_count_changes_stream_but_not_statistics() {
    let mut a = ideal(5, 0.016, 2_000_000);
    a.run.shards = 4;
    let mut b = a.clone();
    b.run.shards = 16;
    let ga = simulate(&a).unwrap().summary.histograms[0].delays[0].g2.unwrap();
    let gb = simulate(&b).unwrap().summary.histograms[0].delays[0].g2.unwrap();
    let sigma = (ga.sigma.powi(2) + gb.sigma.powi(2)).sqrt();
    assert!((ga.value - gb.value).abs() < 4.0 * sigma, "{ga} vs {gb}");
}

#[test]
fn mu_sweep_decreases() {
    let cfg = ideal(11, 0.016, 1_000_000);
    let r = sweep(SweepParameter::Mu, &[0.004, 0.008, 0.016], &cfg).unwrap();
    assert_eq!(r.rows.len(), 3);
    assert!(r.rows.windows(2).all(|w| w[1].metric.value < w[0].metric.value), "{:?}", r.rows);
    let back = parse_sweep_csv(&r.to_csv(), "s").unwrap();
    assert_eq!(back, r.rows);
}

#[test]
fn pump_power_sweep_scales_mu() {
    let cfg = ideal(11, 0.008, 200_000);
    let a = sweep(SweepParameter::PumpPower, &[2.0], &cfg).unwrap();
    let b = sweep(SweepParameter::Mu, &[0.016], &cfg).unwrap();
    assert_eq!(a.rows[0].metric, b.rows[0].metric);
    assert_eq!(a.rows[0].coincidences, b.rows[0].coincidences);
}

#[test]
fn single_value_sweep_equals_direct_run() {
    let cfg = ideal(12, 0.016, 300_000);
    let r = sweep(SweepParameter::Mu, &[0.016], &cfg).unwrap();
    let direct = simulate(&cfg).unwrap();
    let d = &direct.summary.histograms[0].delays[0];
    assert_eq!(r.rows.len(), 1);
    assert_eq!(r.rows[0].metric, d.g2.unwrap());
    assert_eq!(r.rows[0].coincidences, d.coincidences);
    assert_eq!(r.rows[0].starts, direct.summary.starts);
}

#[test]
fn phase_sweep_is_a_high_visibility_fringe() {
    let mut cfg = config("ideal_entangled.toml");
    cfg.run.cycles = 200_000;
    let phases: Vec<f64> = (0..16).map(|k| k as f64 * std::f64::consts::TAU / 16.0).collect();
    let r = sweep(SweepParameter::Phase, &phases, &cfg).unwrap();
    let fit = visibility_fit(&r.points()).unwrap();
    assert!(fit.visibility.value > 0.9, "{fit:?}");
    let offset = fit.phase_offset.value.rem_euclid(std::f64::consts::TAU);
    let dist = offset.min(std::f64::consts::TAU - offset);
    assert!(dist < 4.0 * fit.phase_offset.sigma + 0.05, "{fit:?}");
}

#[test]
fn unknown_sweep_parameter() {
    let err = "power".parse::<SweepParameter>().unwrap_err();
    assert!(err.to_string().contains("unknown sweep parameter"));
    assert!(sweep(SweepParameter::Mu, &[], &ideal(1, 0.01, 10)).is_err());
}

#[test]
fn analyze_rejects_empty_and_malformed_files() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let inputs = AnalysisInputs {
        chsh: Some(empty.clone()),
        ..Default::default()
    };
    assert!(matches!(analyze_paper_data(&inputs, &Default::default()), Err(Error::EmptyInput(_))));
    let inputs = AnalysisInputs {
        tomography_in: Some(empty),
        ..Default::default()
    };
    assert!(matches!(analyze_paper_data(&inputs, &Default::default()), Err(Error::EmptyInput(_))));
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "setting_a,setting_b,probability,sigma\nZ,Z,0.5,0.01\nZ,Q,0.5,0.01\n").unwrap();
    let inputs = AnalysisInputs {
        tomography_in: Some(bad),
        ..Default::default()
    };
    match analyze_paper_data(&inputs, &Default::default()).unwrap_err() {
        Error::Parse { line, .. } => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    assert!(analyze_paper_data(&AnalysisInputs::default(), &Default::default()).is_err());
}

#[test]
fn comb_tools_outputs_reparse() {
    let params = example_echo_comb();
    let spectrum = comb_tools(&CombCommand::Build(params.clone())).unwrap();
    let samples = parse_comb_csv(&spectrum.to_csv(), "c").unwrap();
    let CombOutput::Spectrum(s) = &spectrum else { panic!() };
    assert_eq!(samples, s.samples());
    let echoes = comb_tools(&CombCommand::Echoes {
        source: SpectrumSource::Params(params),
        threshold: 0.05,
    })
    .unwrap();
    let CombOutput::Echoes(list) = &echoes else { panic!() };
    assert_eq!(&parse_echoes_csv(&echoes.to_csv(), "e").unwrap(), list);
    let eff = comb_tools(&CombCommand::Efficiency {
        d0: 0.0,
        d1: 2.0,
        finesse: 2.0,
    })
    .unwrap();
    assert!((eff.to_json()["device_efficiency"].as_f64().unwrap() - 0.0639).abs() < 5e-5);
    assert!(comb_tools(&CombCommand::Efficiency {
        d0: 0.0,
        d1: 1.0,
        finesse: 0.0
    })
    .is_err());
}

#[test]
fn comb_fit_on_shipped_spectrum() {
    let out = comb_tools(&CombCommand::Fit(repo().join("data/synthetic_comb.csv"))).unwrap();
    let CombOutput::Fit(f) = out else { panic!() };
    assert!((f.delta_mhz - 31.25).abs() < 0.05, "{f:?}");
    assert!((f.finesse - 2.5).abs() < 0.05, "{f:?}");
    assert!((f.d1 - 1.2).abs() < 0.02, "{f:?}");
    assert!((f.d0 - 0.2).abs() < 0.01, "{f:?}");
    assert!(f.residual_rms < 0.012, "{f:?}");
    let echoes = comb_tools(&CombCommand::Echoes {
        source: SpectrumSource::File(repo().join("data/synthetic_comb.csv")),
        threshold: 0.05,
    })
    .unwrap();
    let CombOutput::Echoes(list) = echoes else { panic!() };
    assert!((list[0].delay_ns - 32.0).abs() < 0.5);
}

#[test]
fn wavelength_table_reports_printed_products() {
    let t = WavelengthEfficiencyTable::read_csv(&repo().join("data/wavelength_efficiency.csv")).unwrap();
    assert_eq!(t.rows.len(), 4);
    for r in &t.rows {
        assert!((r.product() - r.eta_tm * r.eta_er).abs() < 1e-12);
    }
    let d = t.discrepancies(1e-6);
    assert_eq!(d.len(), 4);
    assert!(d.iter().all(|x| (x.ratio - 2.0).abs() < 0.1), "{d:?}");
    assert_eq!(WavelengthEfficiencyTable::parse_csv(&t.to_csv(), "w").unwrap(), t);
}

#[test]
fn report_from_shipped_tables() {
    let dir = tempfile::tempdir().unwrap();
    let t = std::time::Instant::now();
    let mut cfg = config("boosted.toml");
    cfg.run.cycles = 100_000;
    let opts = ReportOptions {
        simulation: Some(cfg),
        ..Default::default()
    };
    let (metrics, manifest) = generate_report(&repo().join("data"), dir.path(), &opts).unwrap();
    let elapsed = t.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "{elapsed:?}");
    for entry in &manifest.files {
        assert!(dir.path().join(&entry.file).exists(), "{}", entry.file);
    }
    assert!(metrics.input.is_some() && metrics.output.is_some());
    assert_eq!(metrics.chsh.len(), 2);
    let back: MetricsReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(back.chsh, metrics.chsh);
    let echoes = parse_echoes_csv(&std::fs::read_to_string(dir.path().join("comb_echoes.csv")).unwrap(), "e").unwrap();
    let delays: Vec<f64> = echoes.iter().map(|e| e.delay_ns).collect();
    for target in [16.0, 32.0] {
        assert!(delays.iter().any(|d| (d - target).abs() < 0.5), "{delays:?}");
    }
    let samples = parse_comb_csv(&std::fs::read_to_string(dir.path().join("comb_spectrum.csv")).unwrap(), "c").unwrap();
    assert!(!samples.is_empty());
}
