//! End-to-end runs of the `opsk` binary.

use opspace_kit::hsduality::{Channel, Picture};
use serde_json::{json, Value};
use std::process::{Command, Output};

fn opsk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opsk")).args(args).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON report")
}

#[test]
fn switch_demo_reports_obstruction() {
    let out = opsk(&["switch", "demo", "--dim", "3", "--n", "3", "--no-timestamp"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["command"], "switch demo");
    assert_eq!(r["exitCode"], 0);
    assert_eq!(r["result"]["verdict"], "obstructed");
    assert!((r["result"]["mbLower"].as_f64().unwrap() - 3.0).abs() < 1e-12);
    assert!(r.get("timestamp").is_none());
}

#[test]
fn transpose_is_not_completely_positive() {
    let out = opsk(&["channel", "check", "--builtin", "transpose", "--dim", "2", "--max-level", "2", "--no-timestamp"]);
    let r = report(&out);
    // both sides of the equivalence fail, so the equivalence itself holds
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(r["result"]["completelyPositive"]["verdict"], "fails");
    assert_eq!(r["result"]["unital"]["verdict"], "holds");
    assert!((r["result"]["completelyPositive"]["defect"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn output_file_and_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = opsk(&["chu", "interpret", "--formula", "(P:2 * R:2) + N:3~", "--output", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(r["command"], "chu interpret");
    assert!(r["timestamp"].is_u64());
}

#[test]
fn chu_check_reads_a_channel() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("channel.json");
    let input = json!({ "channel": Channel::identity(2, Picture::Schrodinger) });
    std::fs::write(&path, input.to_string()).unwrap();
    let out = opsk(&["chu", "check", "--input", path.to_str().unwrap(), "--max-level", "1", "--restarts", "2", "--no-timestamp"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(report(&out)["verdict"], "holds");
}

#[test]
fn input_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ \"space\": ").unwrap();
    for args in [
        vec!["norm", "--input", bad.to_str().unwrap()],
        vec!["norm"],
        vec!["chu", "interpret", "--formula", "P:2 & R:2"],
        vec!["chu", "interpret", "--formula", "(P:2"],
        vec!["switch", "demo", "--dim", "2", "--n", "5"],
        vec!["switch", "demo", "--dim", "9", "--n", "1"],
    ] {
        let out = opsk(&args);
        assert_eq!(out.status.code(), Some(3), "{args:?}");
        assert!(out.stdout.is_empty());
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("input error:"), "{args:?}");
    }
}

#[test]
fn same_seed_same_bytes() {
    let args = ["cbnorm", "--builtin", "transpose", "--dim", "2", "--max-level", "2", "--restarts", "3", "--seed", "11", "--no-timestamp"];
    assert_eq!(opsk(&args).stdout, opsk(&args).stdout);
}
