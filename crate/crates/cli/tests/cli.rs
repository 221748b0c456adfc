use std::fs;
use std::process::Command;

fn fedgps() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fedgps"));
    c.env("RUST_LOG", "error");
    c
}

#[test]
fn invalid_config_exits_with_2() {
    let out = fedgps()
        .args(["run", "--set", "clients=0", "--set", "sample_rate=2.0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("clients") && err.contains("sample_rate"), "{err}");
}

#[test]
fn unknown_key_is_rejected() {
    let out = fedgps().args(["run", "--set", "no_such_key=1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn diagnostics_pass() {
    for args in [
        vec!["diag", "grad-check"],
        vec!["diag", "quadratic-oracle"],
        vec!["diag", "comm-audit", "-m", "1000", "-c", "10", "-d", "512"],
    ] {
        let out = fedgps().args(&args).output().unwrap();
        assert!(out.status.success(), "{args:?}");
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains("[PASS]") && !text.contains("[FAIL]"), "{text}");
    }
}

#[test]
fn run_then_summarize_and_rank() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let status = fedgps()
        .args([
            "run",
            "--set",
            "rounds=3",
            "--set",
            "clients=4",
            "--set",
            "scenario_seeds=[0, 1]",
            "--set",
            r#"algos=["fedavg", "fedprox", "fedgps"]"#,
            "--set",
            "dataset.n_per_class=40",
            "--set",
            "dataset.num_classes=3",
            "--output",
        ])
        .arg(&out_dir)
        .status()
        .unwrap();
    assert!(status.success());
    for f in ["config.toml", "config.sha1", "results.csv", "summary.csv", "summary_final.csv"] {
        assert!(out_dir.join(f).is_file(), "{f}");
    }
    let rounds = fs::read_to_string(out_dir.join("fedgps/scenario_1/seed_0/rounds.jsonl")).unwrap();
    assert_eq!(rounds.lines().count(), 3);
    let first: serde_json::Value = serde_json::from_str(rounds.lines().next().unwrap()).unwrap();
    assert_eq!(first["round"], 1);

    let results = out_dir.join("results.csv");
    let out = fedgps().args(["summarize", "--metric", "final"]).arg(&results).output().unwrap();
    assert!(out.status.success());
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.starts_with("algo (final accuracy %)"), "{table}");
    assert_eq!(table.lines().count(), 4);

    let out = fedgps().arg("nemenyi").arg(&results).output().unwrap();
    assert!(out.status.success());
    let csv = String::from_utf8_lossy(&out.stdout);
    assert!(csv.starts_with("algo,avg_rank,fedavg,fedprox,fedgps"), "{csv}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("CD ="));
}

#[test]
fn missing_results_file_fails() {
    let out = fedgps().args(["summarize", "/nonexistent/results.csv"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}
