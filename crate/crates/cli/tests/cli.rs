use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use critkill_cli::output::{read_header, read_summary};
use serde_json::Value;

fn critkill(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_critkill"))
        .args(args)
        .env_remove("CRITKILL_GOLDEN_DIR")
        .output()
        .expect("binary runs")
}

fn summary_of(path: &Path) -> serde_json::Map<String, Value> {
    read_summary(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gamma_row_matches_reciprocal() {
    let out = critkill(&["constants", "--family", "gamma", "--alpha", "1.5", "--p", "0.75"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let row = text.lines().nth(2).unwrap();
    let value: f64 = row.split(',').nth(5).unwrap().parse().unwrap();
    assert!((value - 1.0 / 1.5).abs() < 1e-8, "{row}");
}

#[test]
fn zero_amplitude_inverts_to_censored_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inv.json");
    let out = critkill(&["constants", "--invert-boundary", "--d", "2", "--alpha", "1.5", "--C1", "0", "-o", path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = fs::read_to_string(&path).unwrap();
    let row: Value = serde_json::from_str(text.lines().nth(1).unwrap()).unwrap();
    assert_eq!(row["row"]["value"].as_f64().unwrap(), 0.5);
}

#[test]
fn golden_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.csv");
    let run = |golden_value: &str| {
        fs::write(
            dir.path().join("golden_constants.csv"),
            format!("family,d,alpha,p,value,abs_err_bound\nc-origin,2,1.2,0.6,{golden_value},1e-12\n"),
        )
        .unwrap();
        Command::new(env!("CARGO_BIN_EXE_critkill"))
            .args(["constants", "--family", "c-origin", "--d", "2", "--alpha", "1.2", "--p", "0.6", "-o"])
            .arg(&out)
            .env("CRITKILL_GOLDEN_DIR", dir.path())
            .output()
            .unwrap()
    };
    let good = run("1.0982219957718282");
    assert!(good.status.success());
    let s = summary_of(&out);
    assert_eq!(s["golden_compared"], 1);
    assert!(s["golden_source"].as_str().unwrap().ends_with("golden_constants.csv"));
    let bad = run("1.2");
    assert_eq!(bad.status.code(), Some(3));
    assert_eq!(summary_of(&out)["golden_mismatches"], 1);
}

#[test]
fn exit_codes() {
    assert_eq!(critkill(&["survival", "--domain", "nowhere", "--x", "0.5,0"]).status.code(), Some(2));
    assert_eq!(critkill(&["constants", "--wat"]).status.code(), Some(2));
    assert_eq!(critkill(&["constants", "--family", "gamma", "--alpha", "2.5", "--p", "0.5"]).status.code(), Some(2));
    // tail never reaches 1e-30 within five terms
    let out = critkill(&["series", "--n", "20", "--k-max", "5", "--tail-tol", "1e-30"]);
    assert_eq!(out.status.code(), Some(3));
    // far too few paths for a kernel window
    let out = critkill(&["factorize", "--domain", "ball", "--n-paths", "200", "--radii", "0.5,0.9"]);
    assert_eq!(out.status.code(), Some(4));
    let diag: Value = serde_json::from_str(String::from_utf8(out.stderr).unwrap().lines().last().unwrap()).unwrap();
    assert_eq!(diag["error"], "estimator");
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"command":"series","n":20,"alpha":0.9,"t":0.05}"#).unwrap();
    let out = dir.path().join("s.json");
    let run = critkill(&["series", "--config", cfg.to_str().unwrap(), "--t", "0.02", "-o", out.to_str().unwrap()]);
    assert!(run.status.success());
    let h = read_header(fs::File::open(&out).map(std::io::BufReader::new).unwrap()).unwrap();
    assert_eq!(h.command, "series");
    assert_eq!(h.config["n"], 20);
    assert_eq!(h.config["alpha"], 0.9);
    assert_eq!(h.config["t"], 0.02);
    assert!(h.config["c1"].as_f64().unwrap() > 0.0);

    fs::write(&cfg, r#"{"command":"threep"}"#).unwrap();
    assert_eq!(critkill(&["series", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    fs::write(&cfg, r#"{"tee":0.1}"#).unwrap();
    assert_eq!(critkill(&["series", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn replay_reproduces_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let first = critkill(&[
        "survival", "--domain", "ball", "--alpha", "1.5", "--x", "0.9,0", "--n-paths", "4000", "--seed", "7", "--workers", "1",
        "-o", a.to_str().unwrap(),
    ]);
    assert!(first.status.success());
    let again = critkill(&["replay", a.to_str().unwrap(), "--workers", "3", "-o", b.to_str().unwrap()]);
    assert!(again.status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let stderr = String::from_utf8(first.stderr).unwrap();
    assert!(stderr.contains("seed 7") && stderr.contains("n_paths 4000") && stderr.contains('±'));
}

#[test]
fn plot_file_has_three_columns() {
    let dir = tempfile::tempdir().unwrap();
    let plot = dir.path().join("p.dat");
    let out = critkill(&["series", "--n", "16", "--k-max", "30", "--plot", plot.to_str().unwrap()]);
    assert!(out.status.success());
    let text = fs::read_to_string(&plot).unwrap();
    let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(lines.len(), 31);
    for l in lines {
        let cols: Vec<f64> = l.split_whitespace().map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols.len(), 3);
    }
}

#[test]
fn oracle_quick_preset_passes() {
    let out = critkill(&["oracle", "--preset", "quick", "--format", "json"]);
    assert!(out.status.success());
    let s = read_summary(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(s["failures"], 0);
    assert_eq!(s["checks"], 2);
    assert_eq!(critkill(&["oracle", "--preset", "exhaustive"]).status.code(), Some(2));
}

#[test]
fn threep_reports_no_violations() {
    let out = critkill(&["threep", "--samples", "5000", "--d", "3", "--alpha", "0.9"]);
    assert!(out.status.success());
    let s = read_summary(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(s["violations"], 0);
    assert!(s["empirical_c"].as_f64().unwrap().is_finite());
}

#[test]
fn survival_rejects_exponent_below_killed_process() {
    let out = critkill(&["survival", "--domain", "ball", "--alpha", "1.5", "--p", "0.6", "--fit"]);
    assert_eq!(out.status.code(), Some(2));
}
