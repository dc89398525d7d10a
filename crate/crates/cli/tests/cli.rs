use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn topev(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_topev"))
        .args(args)
        .env_remove("TOPO_OUT")
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn verified_fire_run_writes_every_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = topev(&[
        "run",
        "--grid",
        "12x12",
        "--theta",
        "0.5",
        "--seed",
        "7",
        "--intervals",
        "30",
        "--verify",
        "--out",
        out,
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(read(tmp.path(), "metrics.csv").lines().count(), 31);
    assert_eq!(read(tmp.path(), "discrepancies.csv").lines().count(), 1);
    for f in ["trace.csv", "events.csv", "states.csv", "config.json"] {
        assert!(tmp.path().join(f).exists(), "{f} missing");
    }
}

#[test]
fn self_split_scenario_logs_one_type_8() {
    let tmp = tempfile::tempdir().unwrap();
    let o = topev(&[
        "run",
        "--scenario",
        "fig10",
        "--verify",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let events = read(tmp.path(), "events.csv");
    let types: Vec<&str> = events
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap())
        .collect();
    assert_eq!(types, ["8"]);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(topev(&["run"]).status.code(), Some(2));
    assert_eq!(topev(&["run", "--grid", "12"]).status.code(), Some(2));
    assert_eq!(
        topev(&["run", "--scenario", "no-such-scenario"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        topev(&["run", "--grid", "4x4", "--spread", "1.5"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(topev(&["demo", "10"]).status.code(), Some(2));
}

#[test]
fn demos_cover_the_event_types() {
    let o = topev(&["demo", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("hole appearance"));
    assert!(text.contains("oracle change (+0,+1), agrees"));

    let o = topev(&["demo", "all"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    for t in 1..=9 {
        assert!(text.contains(&format!(": type {t} ")), "type {t} missing");
    }
}

#[test]
fn snapshots_render_regions_and_replay_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    assert_eq!(
        topev(&["run", "--scenario", "fig1", "--out", dir])
            .status
            .code(),
        Some(0)
    );
    let a = topev(&["snapshot", dir, "--interval", "0"]);
    assert_eq!(a.status.code(), Some(0));
    let text = String::from_utf8(a.stdout.clone()).unwrap();
    assert_eq!(text.matches(" = region ").count(), 1);
    assert_eq!(text.matches('A').count(), 8 + 1);
    assert_eq!(
        topev(&["snapshot", dir, "--interval", "0"]).stdout,
        a.stdout
    );
    assert_eq!(
        topev(&["snapshot", dir, "--interval", "99"]).status.code(),
        Some(2)
    );

    let empty = tmp.path().join("empty");
    let e = empty.to_str().unwrap();
    let o = topev(&[
        "run",
        "--grid",
        "4x4",
        "--ignite",
        "0",
        "--intervals",
        "1",
        "--out",
        e,
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(topev(&["snapshot", e, "--interval", "0"]).stdout).unwrap();
    let cells: String = text
        .lines()
        .skip(1)
        .collect::<String>()
        .split_whitespace()
        .collect();
    assert_eq!(cells, ".".repeat(16));
}

#[test]
fn saved_config_replays_to_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let second = tmp.path().join("second");
    let o = topev(&[
        "run",
        "--grid",
        "8x8",
        "--seed",
        "3",
        "--intervals",
        "10",
        "--shuffle",
        "5",
        "--out",
        first.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let cfg = first.join("config.json");
    let o = topev(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for f in ["trace.csv", "events.csv", "metrics.csv", "states.csv"] {
        assert_eq!(read(&first, f), read(&second, f), "{f} differs");
    }
}

#[test]
fn seed_ranges_get_one_directory_each() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_topev"))
        .args([
            "run",
            "--grid",
            "6x6",
            "--intervals",
            "5",
            "--seeds",
            "2..5",
            "--verify",
        ])
        .env("TOPO_OUT", tmp.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    for s in 2..5 {
        let dir = tmp.path().join(format!("seed-{s}"));
        assert_eq!(read(&dir, "metrics.csv").lines().count(), 6);
        assert!(read(&dir, "config.json").contains(&format!("\"seed\": {s}")));
    }
}
