use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kyfan-tilt")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn path(name: &str) -> String {
    data(name).display().to_string()
}

#[test]
fn identity_hessian_is_stable() {
    let out = run(&["analyze", &path("identity.json")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["verdict"]["status"], "Stable");
    assert_eq!(v["verdict"]["kernel_dim"], 0);
    assert_eq!(v["stationarity"]["member"], true);
}

#[test]
fn degenerate_problem_is_unstable_with_witness() {
    let out = run(&["analyze", &path("degenerate.json")]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["verdict"]["status"], "Unstable");
    let w = &v["verdict"]["witness"];
    assert!(w["hessian_residual"].as_f64().unwrap() <= 1e-8);
    assert!(w["hull_residual"].as_f64().unwrap() <= 1e-8);
    let data: Vec<f64> = serde_json::from_value(w["matrix"]["data"].clone()).unwrap();
    assert!(data[0].abs() > 0.5 && data[1..].iter().all(|x| x.abs() < 1e-8), "{data:?}");
}

#[test]
fn tilt_subcommand_agrees_with_analyze() {
    let out = run(&["tilt", &path("degenerate.json"), "--sequential"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["verdict"]["status"], "Unstable");
}

#[test]
fn malformed_dimensions_exit_3_with_pointer() {
    let out = run(&["analyze", &path("malformed.json")]);
    assert_eq!(out.status.code(), Some(3));
    let v = json(&out);
    assert_eq!(v["error"]["kind"], "schema");
    assert_eq!(v["error"]["pointer"], "/X");
}

#[test]
fn missing_file_and_bad_usage_exit_3() {
    assert_eq!(run(&["analyze", "/nonexistent/problem.json"]).status.code(), Some(3));
    assert_eq!(run(&["analyze"]).status.code(), Some(3));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn d2_of_zero_direction_is_zero() {
    let out = run(&["d2", &path("identity.json"), &path("g_zero.json")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["value"].as_f64(), Some(0.0));
    assert_eq!(v["reason"], "InCone");
}

#[test]
fn d2_outside_cone_is_infinite() {
    let out = run(&["d2", &path("repeated.json"), &path("g_outside.json")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["value"], "+inf");
    assert_eq!(v["reason"], "OutsideCriticalCone");
}

#[test]
fn d2_matches_high_precision_second_difference() {
    let expected: f64 = std::fs::read_to_string(data("g_smooth.expected")).unwrap().trim().parse().unwrap();
    let out = run(&["d2", &path("smooth.json"), &path("g_smooth.json"), "--cross-check"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let got = v["value"].as_f64().unwrap();
    assert!((got - expected).abs() <= 1e-9 * (1.0 + expected.abs()), "{got} vs {expected}");
    let general = v["cross_check"]["general"].as_f64().unwrap();
    assert!((general - expected).abs() <= 1e-9 * (1.0 + expected.abs()));
}

#[test]
fn subgrad_check_reports_membership() {
    let out = run(&["subgrad-check", &path("identity.json")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["member"], true);
    let out = run(&["subgrad-check", &path("repeated.json"), "--gamma", &path("gamma_not_member.json")]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["member"], false);
}

#[test]
fn suite_flag_runs_only_that_suite() {
    let out = run(&["oracle-validate", "--suite", "prox", "--count", "20", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let suites = v["suites"].as_array().unwrap();
    assert_eq!(suites.len(), 1);
    assert_eq!(suites[0]["suite"], "prox");
}

#[test]
fn seeded_validation_is_reproducible() {
    let args = ["oracle-validate", "--seed", "7", "--count", "50"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stdout));
    assert_eq!(a.stdout, b.stdout);
    let table = String::from_utf8_lossy(&a.stdout);
    for name in ["formulas", "subgrad", "prox", "quotient"] {
        assert!(table.lines().any(|l| l.starts_with(name) && l.ends_with("PASS")), "{table}");
    }
}

#[test]
fn sequential_and_parallel_reports_match() {
    let p = path("degenerate.json");
    let a = run(&["analyze", &p, "--seed", "4"]);
    let b = run(&["analyze", &p, "--seed", "4", "--sequential"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn tolerance_overrides_are_accepted_and_echoed() {
    let out = run(&["analyze", &path("identity.json"), "--tol.kernel_floor", "1e-9"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["tolerances"]["kernel_floor"].as_f64(), Some(1e-9));
    let bad = run(&["analyze", &path("identity.json"), "--tol", "no_such_tol=1"]);
    assert_eq!(bad.status.code(), Some(3));
}

#[test]
fn out_flag_and_probe_csv_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let csv = dir.path().join("probe.csv");
    let o = run(&["analyze", &path("identity.json"), "--out", out.to_str().unwrap(), "--probe-csv", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v["oracle"].is_object());
    let rows = std::fs::read_to_string(&csv).unwrap();
    assert!(rows.lines().count() > 1);
}
