//! End-to-end checks of the `juggle` binary: exit codes, config resolution and output files.

use std::path::Path;
use std::process::{Command, Output};

fn juggle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_juggle")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).expect("report written")).expect("valid JSON")
}

#[test]
fn validate_reports_ball_counts_and_failures() {
    let ok = juggle(&["validate", "531", "552", "7"]);
    // 531 contains a 1-throw, which the cone hands cannot make
    assert_eq!(ok.status.code(), Some(1));
    let text = stdout(&ok);
    assert!(text.contains("552: valid, 4 balls"), "{text}");
    assert!(text.contains("7: valid, 7 balls"), "{text}");
    assert!(text.contains("531: invalid"), "{text}");

    let good = juggle(&["validate", "423", "97"]);
    assert_eq!(good.status.code(), Some(0), "{}", stdout(&good));

    let bad = juggle(&["validate", "32"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("average 2.5"));
}

#[test]
fn graph_counts_states_and_edges() {
    let o = juggle(&["graph", "--balls", "3", "--max-height", "4", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["states"], 4);

    let o = juggle(&["graph", "--adjacency"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("126"), "{}", stdout(&o));
}

#[test]
fn plan_reports_entry_and_rejects_ball_count_mismatch() {
    let o = juggle(&["plan", "423"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = juggle(&["plan", "3", "4"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ball"));
}

#[test]
fn invalid_configuration_exits_with_two() {
    assert_eq!(juggle(&["pattern", "3", "--stiffness", "1e9"]).status.code(), Some(2));
    assert_eq!(juggle(&["pattern", "3", "--set", "episode.contact.stifness=1"]).status.code(), Some(2));
    assert_eq!(juggle(&["pattern", "3", "--config", "/nonexistent/juggle.toml"]).status.code(), Some(2));
    assert_eq!(juggle(&["pattern", "3", "--set", "no_equals_sign"]).status.code(), Some(2));
}

#[test]
fn pattern_run_writes_report_with_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "[experiment]\ncatches = 12\n[episode]\ntrace_decimation = 50\n").unwrap();
    let out = dir.path().join("out");
    let o = juggle(&[
        "pattern",
        "423",
        "--config",
        config.to_str().unwrap(),
        "--set",
        "episode.contact.friction=0.4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["config"]["experiment"]["catches"], 12);
    assert_eq!(report["config"]["episode"]["contact"]["friction"], 0.4);
    assert_eq!(report["summary"]["succeeded"], true);
    assert!(report["summary"]["catches"].as_u64().unwrap() >= 12);
    let events = std::fs::read_to_string(out.join("events.csv")).unwrap();
    assert!(events.lines().count() > 12);
    assert!(std::fs::read_to_string(out.join("trace.jsonl")).unwrap().lines().count() > 10);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "[experiment]\ncatches = 50\n").unwrap();
    let o = juggle(&["pattern", "3", "--config", config.to_str().unwrap(), "--catches", "5", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["config"]["experiment"]["catches"], 5);
}

#[test]
fn transition_requires_equal_ball_counts() {
    let o = juggle(&["transition", "3", "4"]);
    assert_eq!(o.status.code(), Some(1));
    let o = juggle(&["transition", "3", "504", "--catches", "20", "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["transitions"].as_u64().unwrap() >= 1);
}

#[test]
fn short_walk_writes_coverage_and_respects_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let run = |workers: &str, name: &str| {
        let out = dir.path().join(name);
        let o = Command::new(env!("CARGO_BIN_EXE_juggle"))
            .args(["walk", "--steps", "60", "--seeds", "2", "--balls", "3", "--out", out.to_str().unwrap()])
            .env("JUGGLE_WORKERS", workers)
            .output()
            .unwrap();
        (o, out)
    };
    let (one, a) = run("1", "a");
    let (two, b) = run("2", "b");
    assert_eq!(one.status.code(), Some(0), "{}", stdout(&one));
    assert_eq!(two.status.code(), Some(0));
    let coverage = std::fs::read_to_string(a.join("coverage.csv")).unwrap();
    assert_eq!(coverage, std::fs::read_to_string(b.join("coverage.csv")).unwrap());
    assert!(a.join("coverage.txt").exists());
    let catches = |dir: &Path| -> Vec<serde_json::Value> {
        read_json(&dir.join("report.json"))["seeds"].as_array().unwrap().iter().map(|s| s["catches"].clone()).collect()
    };
    assert_eq!(catches(&a), catches(&b));

    let (bad, _) = run("zero", "c");
    assert_eq!(bad.status.code(), Some(2));
}
