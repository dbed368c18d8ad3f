use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn afclink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_afclink"))
        .args(args)
        .current_dir(repo())
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn stderr_json(out: &Output) -> serde_json::Value {
    assert!(!out.status.success());
    serde_json::from_slice(&out.stderr).expect("JSON on stderr")
}

#[test]
fn analyze_chsh_table() {
    let v = stdout_json(&afclink(&["analyze", "--chsh", "data/chsh.csv"]));
    let s: Vec<f64> = v["chsh"].as_array().unwrap().iter().map(|c| c["s"]["value"].as_f64().unwrap()).collect();
    assert!((s[0] - 2.5194).abs() < 1e-9 && (s[1] - 2.5911).abs() < 1e-9, "{s:?}");
}

#[test]
fn comb_efficiency_and_echoes() {
    let v = stdout_json(&afclink(&["comb", "efficiency", "--d1", "2", "--finesse", "2"]));
    assert!((v["device_efficiency"].as_f64().unwrap() - 0.0639).abs() < 5e-5);
    let out = afclink(&["comb", "echoes", "--delta-mhz", "31", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("delay_ns,amplitude,magnitude"));
    let first: f64 = lines.next().unwrap().split(',').next().unwrap().parse().unwrap();
    assert!((first - 32.26).abs() < 0.25, "{first}");
}

#[test]
fn simulate_writes_outputs_and_honours_seed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let args = ["simulate", "--config", "configs/boosted.toml", "--cycles", "200000", "--seed", "99", "--out-dir", d, "--events"];
    let v = stdout_json(&afclink(&args));
    assert_eq!(v["seed"], 99);
    for f in ["summary.json", "histogram_all.csv", "events.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let again = stdout_json(&afclink(&args));
    assert_eq!(v, again);
}

#[test]
fn sweep_csv() {
    let out = afclink(&[
        "sweep",
        "--config",
        "configs/ideal_early_only.toml",
        "--parameter",
        "mu",
        "--values",
        "0.004,0.016",
        "--cycles",
        "500000",
        "--format",
        "csv",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let g: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(g.len(), 2);
    assert!(g[0] > g[1]);
}

#[test]
fn errors_are_json_on_stderr() {
    let v = stderr_json(&afclink(&["simulate", "--config", "configs/missing.toml"]));
    assert_eq!(v["error"], "io");
    let v = stderr_json(&afclink(&["sweep", "--config", "configs/ideal_early_only.toml", "--parameter", "power", "--values", "1"]));
    assert_eq!(v["error"], "invalid_argument");
    let v = stderr_json(&afclink(&["frobnicate"]));
    assert_eq!(v["error"], "usage");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[run]\nseed = 1\n[source]\nmean_pairs_per_pulse = 0.01\nrep_period_ps = 1000\n").unwrap();
    let v = stderr_json(&afclink(&["simulate", "--config", bad.to_str().unwrap()]));
    assert_eq!(v["error"], "config");
    assert_eq!(v["key"], "source.rep_period_ps");
    std::fs::write(&bad, "[run]\nseed = 1\n[source]\nmean_pairs_per_pulse = 0.01\nbogus = 2\n").unwrap();
    let v = stderr_json(&afclink(&["simulate", "--config", bad.to_str().unwrap()]));
    assert_eq!(v["error"], "parse");
    assert_eq!(v["line"], 5);
}

#[test]
fn report_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let v = stdout_json(&afclink(&["report", "--out-dir", dir.path().to_str().unwrap(), "--trials", "100"]));
    for entry in v["files"].as_array().unwrap() {
        assert!(dir.path().join(entry["file"].as_str().unwrap()).exists());
    }
    assert_eq!(v["wavelength_product_discrepancies"].as_array().unwrap().len(), 4);
}
