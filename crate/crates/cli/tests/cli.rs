use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use slicesim::scenario::{self, RunReport, BUILTINS};

fn slicesim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slicesim")).args(args).output().expect("binary runs")
}

fn scenario_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.json"))
}

fn run_report(name: &str, seed: &str, dir: &Path) -> (Output, RunReport) {
    let out = dir.join(format!("{name}-{seed}.json"));
    let o = slicesim(&["run", scenario_file(name).to_str().unwrap(), "--seed", seed, "--out", out.to_str().unwrap()]);
    let report = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    (o, report)
}

#[test]
fn shipped_scenario_files_match_the_builtins() {
    for name in BUILTINS {
        let text = std::fs::read_to_string(scenario_file(name)).unwrap();
        let doc = scenario::parse_validate(&text).unwrap();
        assert_eq!(doc, scenario::builtin(name).unwrap(), "{name}");
        let o = slicesim(&["builtin", name]);
        assert_eq!(String::from_utf8(o.stdout).unwrap().trim_end(), text.trim_end(), "{name}");
    }
}

#[test]
fn runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (o1, r1) = run_report("fig6", "7", dir.path());
    let (o2, r2) = run_report("fig6", "7", dir.path());
    assert_eq!(o1.status.code(), Some(0));
    assert_eq!(o2.status.code(), Some(0));
    assert_eq!(r1.trace_digest, r2.trace_digest);
    assert_eq!(r1, r2);
    assert!(String::from_utf8_lossy(&o1.stderr).contains(&r1.trace_digest));
    let (_, r3) = run_report("fig6", "8", dir.path());
    assert_ne!(r1.trace_digest, r3.trace_digest);
}

#[test]
fn strict_mode_fails_on_violations() {
    let file = scenario_file("sla-breach");
    let o = slicesim(&["run", file.to_str().unwrap(), "--strict"]);
    assert_eq!(o.status.code(), Some(2));
    let report: RunReport = serde_json::from_slice(&o.stdout).unwrap();
    assert!(!report.violations.performance.is_empty());
    // Without --strict the same run succeeds.
    assert_eq!(slicesim(&["run", file.to_str().unwrap()]).status.code(), Some(0));
    let clean = scenario_file("fig6");
    assert_eq!(slicesim(&["run", clean.to_str().unwrap(), "--strict"]).status.code(), Some(0));
}

#[test]
fn validate_reports_problems() {
    let dir = tempfile::tempdir().unwrap();
    let ok = slicesim(&["validate", scenario_file("fig6").to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0));

    let mut doc = scenario::fig6();
    doc.horizon = 0;
    doc.slices[0].blueprint = "bp-missing".into();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, doc.to_json()).unwrap();
    let o = slicesim(&["validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("horizon") && err.contains("bp-missing"), "{err}");

    let garbage = dir.path().join("garbage.json");
    std::fs::write(&garbage, "not json").unwrap();
    assert_eq!(slicesim(&["validate", garbage.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn explain_shows_one_slice() {
    let dir = tempfile::tempdir().unwrap();
    run_report("fig6", "1", dir.path());
    let report = dir.path().join("fig6-1.json");
    let o = slicesim(&["explain", report.to_str().unwrap(), "--slice", "a1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("slice a1 (tenant tenant-a"));
    assert!(text.contains("Requested -> Creating"));
    assert!(!text.contains("b1"));
    assert_eq!(slicesim(&["explain", report.to_str().unwrap(), "--slice", "zz"]).status.code(), Some(64));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(slicesim(&[]).status.code(), Some(64));
    assert_eq!(slicesim(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(slicesim(&["builtin", "nope"]).status.code(), Some(64));
    assert_eq!(slicesim(&["validate", "/no/such/file.json"]).status.code(), Some(64));
    assert_eq!(slicesim(&["--help"]).status.code(), Some(0));
}

#[test]
fn catalog_lists_blueprints() {
    let o = slicesim(&["catalog", scenario_file("recursion3").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let ids: Vec<&str> = text.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(ids, ["bp-30", "bp-20"]);
}
