use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rvwalk(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rvwalk"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env_remove("RVWALK_SEED")
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn regime_reports_critical_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = rvwalk(&["regime", "--family", "power", "--gamma", "1", "--p", "0.75", "--json"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&read(dir.path(), "regime.json")).unwrap();
    assert_eq!(report["regime"], "CriticalUnboundedV");
    assert_eq!(report["p_c"], 0.75);
    assert_eq!(report["p_hat"], 0.5);
}

#[test]
fn invalid_input_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["regime", "--family", "power", "--p", "0.5"][..],
        &["regime", "--family", "power", "--gamma", "1", "--p", "1.5"][..],
        &["simulate", "--family", "power", "--gamma", "-2", "--p", "0.5", "--n", "10"][..],
        &["verify", "no-such-suite"][..],
    ] {
        assert_eq!(rvwalk(args, dir.path()).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn memory_cap_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = rvwalk(
        &["simulate", "--family", "power", "--gamma", "1", "--p", "0.5", "--n", "1000000", "--replicas", "4", "--sampler", "fenwick", "--memory-cap", "1000"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn simulate_is_reproducible_and_replays() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = [
        "simulate", "--family", "power", "--gamma", "0.5", "--p", "0.6", "--n", "2000", "--replicas", "5", "--seed", "11",
        "--checkpoints", "geometric:4", "--record-martingales",
    ];
    assert_eq!(rvwalk(&args, a.path()).status.code(), Some(0));
    assert_eq!(rvwalk(&args, b.path()).status.code(), Some(0));
    let first = read(a.path(), "trajectories.csv");
    assert_eq!(first, read(b.path(), "trajectories.csv"));
    assert!(first.starts_with("replica,n,S,M,L,N"));

    let replay = Command::new(env!("CARGO_BIN_EXE_rvwalk"))
        .args(["replay", a.path().join("manifest.json").to_str().unwrap(), "--out-dir", c.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(replay.status.code(), Some(0));
    assert_eq!(first, read(c.path(), "trajectories.csv"));

    let manifest: serde_json::Value = serde_json::from_str(&read(a.path(), "manifest.json")).unwrap();
    assert_eq!(manifest["master_seed"], 11);
    assert_eq!(manifest["exit_code"], 0);
}

#[test]
fn seed_comes_from_environment() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let run = |dir: &Path, seed: &str| {
        Command::new(env!("CARGO_BIN_EXE_rvwalk"))
            .args(["simulate", "--family", "power", "--gamma", "0", "--p", "0.5", "--n", "500", "--replicas", "3"])
            .arg("--out-dir")
            .arg(dir)
            .env("RVWALK_SEED", seed)
            .output()
            .unwrap()
    };
    assert!(run(a.path(), "5").status.success());
    assert!(run(b.path(), "6").status.success());
    assert_ne!(read(a.path(), "trajectories.csv"), read(b.path(), "trajectories.csv"));
    let manifest: serde_json::Value = serde_json::from_str(&read(a.path(), "manifest.json")).unwrap();
    assert_eq!(manifest["master_seed"], 5);
}

#[test]
fn binary_output_has_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = rvwalk(&["simulate", "--family", "power", "--gamma", "0", "--p", "0.5", "--n", "100", "--binary"], dir.path());
    assert!(out.status.success());
    let bytes = fs::read(dir.path().join("trajectories.bin")).unwrap();
    assert_eq!(&bytes[..4], rvwalk::walk::BINARY_MAGIC);
}

#[test]
fn tables_with_one_index() {
    let dir = tempfile::tempdir().unwrap();
    let out = rvwalk(&["tables", "--family", "power", "--gamma", "1", "--p", "0.5", "--n", "1", "--moments"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let seq = read(dir.path(), "sequences.csv");
    assert_eq!(seq.lines().count(), 2);
    let moments = read(dir.path(), "moments.csv");
    assert_eq!(moments.lines().count(), 2);
}

#[test]
fn moment_columns_depend_on_innovation() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let base = ["tables", "--family", "power", "--gamma", "0", "--p", "0.9", "--n", "50", "--moments"];
    assert!(rvwalk(&base, a.path()).status.success());
    let mut normal = base.to_vec();
    normal.extend(["--innovation", "normal"]);
    assert!(rvwalk(&normal, b.path()).status.success());
    let header = |d: &Path| read(d, "moments.csv").lines().next().unwrap().to_string();
    assert!(header(a.path()).contains("kurtosis_M"));
    assert!(!header(b.path()).contains("kurtosis_M"));
    assert_eq!(read(a.path(), "moments.csv").lines().count(), 51);
}

#[test]
fn explicit_flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    fs::write(&config, r#"{"spec": {"family": "power_law", "gamma": 1.0}, "p": 0.2, "json": true}"#).unwrap();
    let out = rvwalk(&["regime", "--config", config.to_str().unwrap(), "--p", "0.75"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&read(dir.path(), "regime.json")).unwrap();
    assert_eq!(report["p"], 0.75);
    assert_eq!(report["gamma"], 1.0);
}

#[test]
fn quick_suite_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = rvwalk(&["verify", "phat-branch", "--quick", "--gnuplot"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let report: serde_json::Value = serde_json::from_str(&read(dir.path(), "phat-branch.json")).unwrap();
    assert_eq!(report["verdict"], "pass");
    assert!(read(dir.path(), "phat-branch.txt").contains("phat-branch"));
}
