//! The `scir` binary: JSON on stdout and exit codes.

use std::process::Command;

use serde_json::Value;

fn scir(args: &[&str]) -> (i32, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_scir")).args(args).output().unwrap();
    let json = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)));
    (out.status.code().unwrap(), json)
}

#[test]
fn lists_builtins() {
    let (code, v) = scir(&["scenario", "--list"]);
    assert_eq!(code, 0);
    let names: Vec<&str> = v["scenarios"].as_array().unwrap().iter().map(|s| s["name"].as_str().unwrap()).collect();
    for expected in ["fig3", "fig5", "fig6", "fig8"] {
        assert!(names.contains(&expected), "{expected} missing from {names:?}");
    }
}

#[test]
fn threshold_command_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (code, v) = scir(&["threshold", "--config", "fig5", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(v["status"], "ok");
    for path in v["outputs"].as_array().unwrap() {
        assert!(std::path::Path::new(path.as_str().unwrap()).exists());
    }
}

#[test]
fn optimize_command_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let (code, v) = scir(&[
        "optimize", "--config", "fig8", "--budget", "1000", "--policy", "degree", "--out-dir", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{v}");
    let csv = std::fs::read_to_string(dir.path().join("fig8_optimize.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.contains(",1000,degree,")), "{csv}");
}

#[test]
fn errors_are_json() {
    let (code, v) = scir(&["scenario", "no-such-scenario"]);
    assert_eq!(code, 1);
    assert_eq!(v["status"], "error");
    assert_eq!(v["kind"], "unknown_scenario");

    let (code, v) = scir(&["frobnicate"]);
    assert_eq!(code, 2);
    assert_eq!(v["kind"], "usage");

    let (code, v) = scir(&["optimize", "--config", "fig8", "--cost", "abc"]);
    assert_eq!(code, 1);
    assert_eq!(v["kind"], "config");
}
