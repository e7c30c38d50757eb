use std::path::Path;
use std::process::{Command, Output};

use bdre_lab::config::ExperimentConfig;
use bdre_lab::records::{read_csv, write_results, Format, CSV_COLUMNS};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bdre-lab"))
        .args(args)
        .env_remove("BDRE_LAB_SEED")
        .output()
        .expect("spawn bdre-lab")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(lab(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(lab(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_config_value_exits_two() {
    let out = lab(&["estimate", "--set", "model.sigma_e=-1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = lab(&["estimate", "--set", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
    let out = lab(&["estimate", "--config", "/definitely/not/here.conf"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn specfun_psi_prints_record() {
    let out = lab(&["specfun", "--psi", "--a", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_COLUMNS.join(",").as_str()));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "psi@1");
    let v: f64 = row[1].parse().unwrap();
    // e^{-1}/sqrt(2π)
    assert!((v - 0.146_762_663_173_739_9).abs() < 1e-8);
}

#[test]
fn estimate_writes_records_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&[
        "estimate",
        "--set",
        "experiment.n=2000",
        "--set",
        "scheme.horizon=10",
        "--set",
        "experiment.routes=rao-blackwell,closed-form",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let recs = read_csv(&dir.path().join("extinction.csv")).unwrap();
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[1].quantity, "extinction.closed-form");
    assert_eq!(recs[1].value, 0.25);
    let saved = ExperimentConfig::load(&dir.path().join("extinction.conf")).unwrap();
    assert_eq!(saved.hash(), recs[0].config_hash);
}

#[test]
fn seed_env_var_overrides_default() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_bdre-lab"))
        .args(["specfun", "--psi", "--out", path_str(dir.path())])
        .env("BDRE_LAB_SEED", "77")
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[7], "77");
}

#[test]
fn simulate_writes_path_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&[
        "simulate",
        "--paths",
        "3",
        "--set",
        "scheme.horizon=0.1",
        "--set",
        "scheme.dt=0.01",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("paths.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("path,t,z,s"));
    assert_eq!(lines.count(), 3 * 11);
}

#[test]
fn rates_writes_plot_script() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&[
        "rates",
        "--set",
        "model.alpha=2",
        "--set",
        "experiment.n=4000",
        "--set",
        "experiment.t_grid=1,2,3,4",
        "--set",
        "scheme.dt=0.02",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let gp = std::fs::read_to_string(dir.path().join("rates.gp")).unwrap();
    assert!(gp.contains("rates.csv") && gp.contains("logscale"));
    let recs = read_csv(&dir.path().join("rates.csv")).unwrap();
    let rate = recs.iter().find(|r| r.quantity.ends_with(".rate")).unwrap();
    assert_eq!(rate.theoretical, Some(1.5));
}

#[test]
fn quick_verify_reports_and_exits_by_outcome() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&["verify", "--preset", "quick", "--only", "1,6,S3", "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("overall: PASS"));
    assert!(dir.path().join("verify.log").is_file());
    let out = lab(&["verify", "--preset", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_record_set_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_results(&[], dir.path(), "empty", Format::Csv).unwrap();
    assert_eq!(std::fs::read_to_string(&p).unwrap(), format!("{}\n", CSV_COLUMNS.join(",")));
    assert!(read_csv(&p).unwrap().is_empty());
}

#[test]
fn config_round_trips_and_hash_tracks_semantics() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::default();
    c.set("model.alpha", "0.75").unwrap();
    c.set("experiment.lambda_grid", "0.5, 1, inf").unwrap();
    let path = dir.path().join("run.conf");
    c.save(&path).unwrap();
    let back = ExperimentConfig::load(&path).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.hash(), c.hash());

    let mut moved = c.clone();
    moved.output_dir = "elsewhere".into();
    moved.threads = Some(8);
    assert_eq!(moved.hash(), c.hash());
    let mut changed = c.clone();
    changed.set("scheme.dt", "0.002").unwrap();
    assert_ne!(changed.hash(), c.hash());
}
