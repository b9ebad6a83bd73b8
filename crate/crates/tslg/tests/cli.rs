use std::path::Path;
use std::process::{Command, Output};

fn tslg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tslg"))
        .current_dir(dir)
        .env_remove("TSLG_OUT_DIR")
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&tslg(d, &["gen-ndd", "--case", "nowhere"])), 2);
    assert_eq!(code(&tslg(d, &["gen-ndd", "--case", "cutin", "--n", "0"])), 2);
    assert_eq!(code(&tslg(d, &["build-lib", "--case", "cutin", "--events", "missing.csv"])), 2);
    assert_eq!(code(&tslg(d, &["replay", "--manifest", "missing.manifest.json"])), 2);
    assert_eq!(code(&tslg(d, &["train-rl", "--case", "cutin", "--events", "x.csv"])), 2);
}

#[test]
fn wrong_case_events_are_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(tslg(d, &["gen-ndd", "--case", "cutin", "--n", "1000", "--out", "ev.csv"]).status.success());
    let o = tslg(d, &["train-rl", "--events", "ev.csv"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_tslg"))
        .current_dir(dir.path())
        .env("TSLG_OUT_DIR", "results")
        .args(["gen-ndd", "--case", "cutin", "--n", "500"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("results");
    assert!(out.join("events-cutin.csv").exists());
    assert!(out.join("events-cutin.manifest.json").exists());
}

#[test]
fn campaign_cap_gives_not_converged() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(tslg(d, &["gen-ndd", "--case", "cutin", "--out", "ev.csv"]).status.success());
    let o = tslg(
        d,
        &["evaluate", "--case", "cutin", "--events", "ev.csv", "--baseline", "ndd", "--max-tests", "40"],
    );
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    // the report is still written
    assert!(d.join("baseline-cutin.json").exists());
}

#[test]
fn oracle_refuses_large_grids() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(tslg(d, &["gen-ndd", "--case", "highway_exit", "--n", "20000", "--out", "hw.csv"]).status.success());
    let o = tslg(d, &["evaluate", "--case", "highway_exit", "--events", "hw.csv", "--oracle", "exhaustive"]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn replay_detects_changes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(tslg(d, &["gen-ndd", "--case", "cutin", "--n", "2000", "--out", "ev.csv"]).status.success());
    assert!(tslg(d, &["build-lib", "--case", "cutin", "--events", "ev.csv", "--out", "lib.json"]).status.success());

    let ok = tslg(d, &["replay", "--manifest", "lib.manifest.json"]);
    assert_eq!(code(&ok), 0);
    assert!(String::from_utf8_lossy(&ok.stdout).contains("identical"));

    // a recorded digest that no longer matches the regenerated output
    let path = d.join("lib.manifest.json");
    let mut m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    m["outputs"][0]["sha256"] = "0".repeat(64).into();
    std::fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
    let bad = tslg(d, &["replay", "--manifest", "lib.manifest.json"]);
    assert_eq!(code(&bad), 1);
    assert!(String::from_utf8_lossy(&bad.stdout).contains("DIFFERS"));

    // an input edited after the run
    std::fs::write(d.join("ev.csv"), "range,range_rate\n10,-1\n").unwrap();
    assert_eq!(code(&tslg(d, &["replay", "--manifest", "lib.manifest.json"])), 2);
}

#[test]
fn inspect_prints_library_summary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(tslg(d, &["gen-ndd", "--case", "cutin", "--out", "ev.csv"]).status.success());
    assert!(tslg(d, &["build-lib", "--case", "cutin", "--events", "ev.csv"]).status.success());
    let o = tslg(d, &["inspect", "--lib", "lib-cutin.json"]);
    assert_eq!(code(&o), 0);
    assert!(!o.stdout.is_empty());
}
