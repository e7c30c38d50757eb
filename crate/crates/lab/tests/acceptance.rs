//! Acceptance checklist at the standard preset. Each test prints one
//! `criterion N: PASS|FAIL` line. The standard run is shared and takes a
//! few minutes in release-optimized test builds.

use std::io::Write;
use std::path::PathBuf;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Duration;

use bdre_lab::verify::{run_verify, write_outputs, Outcome, Preset, VerifyReport, ANCHORED_OPS};

const SEED: u64 = 2024;

/// Verdict lines go straight to stderr so they show without `--nocapture`.
macro_rules! report {
    ($($arg:tt)*) => {
        let _ = writeln!(std::io::stderr(), $($arg)*);
    };
}

struct Shared {
    report: VerifyReport,
    dir: tempfile::TempDir,
}

fn shared() -> &'static Shared {
    static CELL: OnceLock<Shared> = OnceLock::new();
    CELL.get_or_init(|| {
        let report = run_verify(Preset::Standard, SEED, &[]).expect("standard verify run");
        let dir = tempfile::tempdir().expect("tempdir");
        write_outputs(&report, dir.path()).expect("write verify outputs");
        Shared { report, dir }
    })
}

fn outcome(id: &str) -> &'static Outcome {
    shared().report.outcome(id).unwrap_or_else(|| panic!("no outcome {id}"))
}

/// Prints the verdict line plus failing records and timings, then asserts.
fn judge(label: &str, o: &Outcome, total_budget: Option<Duration>) {
    let total: Duration = o.timings.iter().map(|t| t.elapsed).sum();
    let in_budget = o.timings.iter().all(|t| t.within_budget()) && total_budget.is_none_or(|b| total <= b);
    let ok = o.passed() && in_budget;
    report!("{label}: {} ({}, {:.1}s)", if ok { "PASS" } else { "FAIL" }, o.title, total.as_secs_f64());
    for r in o.failures() {
        report!(
            "    {} = {} (reference {})",
            r.quantity,
            r.value,
            r.theoretical.map_or("-".into(), |t| t.to_string())
        );
    }
    for t in o.timings.iter().filter(|t| !t.within_budget()) {
        report!("    {} took {:.1}s, over budget {:?}", t.label, t.elapsed.as_secs_f64(), t.budget);
    }
    assert!(ok, "{label} failed");
}

fn criterion(n: u32, budget_secs: Option<u64>) {
    judge(&format!("criterion {n}"), outcome(&n.to_string()), budget_secs.map(Duration::from_secs));
}

#[test]
fn criterion_01_harmonicity() {
    criterion(1, Some(1));
}

#[test]
fn criterion_02_extinction_triangle() {
    criterion(2, None);
}

#[test]
fn criterion_03_martingales() {
    criterion(3, Some(300));
}

#[test]
fn criterion_04_extinction_conditioned_law() {
    criterion(4, Some(120));
}

#[test]
fn criterion_05_decay_rates() {
    criterion(5, Some(600));
}

#[test]
fn criterion_06_special_functions() {
    criterion(6, Some(60));
}

#[test]
fn criterion_07_laplace_limit() {
    criterion(7, Some(300));
}

#[test]
fn criterion_08_dufresne_reading() {
    criterion(8, Some(120));
}

#[test]
fn criterion_09_scaling_bridge() {
    criterion(9, Some(300));
}

#[test]
fn criterion_10_reproducible_csv() {
    let first = std::fs::read(shared().dir.path().join("verify.csv")).expect("first csv");
    let out = tempfile::tempdir().expect("tempdir");
    let status = Command::new(env!("CARGO_BIN_EXE_bdre-lab"))
        .args(["verify", "--preset", "standard", "--seed", &SEED.to_string(), "--out"])
        .arg(out.path())
        .env_remove("BDRE_LAB_SEED")
        .output()
        .expect("run bdre-lab verify");
    let second = std::fs::read(out.path().join("verify.csv")).unwrap_or_default();
    let ok = !first.is_empty() && first == second;
    report!(
        "criterion 10: {} (verify --preset standard twice gives identical CSV; {} bytes, exit {:?})",
        if ok { "PASS" } else { "FAIL" },
        first.len(),
        status.status.code()
    );
    assert!(ok, "criterion 10 failed");
    let expected_exit = if shared().report.passed() { 0 } else { 1 };
    assert_eq!(status.status.code(), Some(expected_exit));
}

#[test]
fn supplementary_checks() {
    let mut ok = true;
    for id in ["S1", "S2", "S3", "S4"] {
        let o = outcome(id);
        report!("supplement {id}: {} ({})", if o.passed() { "PASS" } else { "FAIL" }, o.title);
        ok &= o.passed();
    }
    assert!(ok);
}

#[test]
fn standard_run_covers_anchored_operations() {
    let s = shared();
    let ops = s.report.operations();
    let missing: Vec<&&str> = ANCHORED_OPS
        .iter()
        .filter(|op| **op != "write_results" && !ops.contains(op))
        .collect();
    assert!(missing.is_empty(), "not exercised: {missing:?}");
    let written: Vec<PathBuf> = ["verify.csv", "verify.jsonl", "verify.log"]
        .iter()
        .map(|f| s.dir.path().join(f))
        .collect();
    assert!(written.iter().all(|p| p.is_file()));
}
