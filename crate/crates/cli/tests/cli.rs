//! End-to-end checks of the command-line harness: subcommand routing,
//! deterministic persisted rows, and the documented exit codes.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_agreelab"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("agreelab_cli_{tag}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn tail_risk_prints_rows_and_exits_zero() {
    let dir = temp_dir("tail");
    let config = write_config(
        &dir,
        "tail.json",
        r#"{"kind": {"tail_risk": {"p": "1/10", "tau": "1/5"}}, "seed": 1}"#,
    );
    let output = bin().args(["tail-risk", "--config"]).arg(&config).output().unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("tail_risk: 1 rows"), "stdout: {stdout}");
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = temp_dir("badcfg");
    let config = write_config(
        &dir,
        "bad.json",
        r#"{"kind": {"tail_risk": {"tau": "1/5", "p": "1/10", "bogus": 1}}, "seed": 1}"#,
    );
    let output = bin().args(["tail-risk", "--config"]).arg(&config).output().unwrap();
    assert_eq!(output.status.code(), Some(2));

    // Kind/subcommand mismatch is a config error too.
    let config = write_config(
        &dir,
        "mismatch.json",
        r#"{"kind": {"tail_risk": {"tau": "1/5", "p": "1/10"}}, "seed": 1}"#,
    );
    let output = bin().args(["simulate", "--config"]).arg(&config).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn budget_exhaustion_exits_with_code_three() {
    let dir = temp_dir("budget");
    let config = write_config(
        &dir,
        "bounded.json",
        r#"{
            "kind": {"bounded": {
                "instance": {"family": "random", "agents": 2, "states": 4,
                             "epsilon": "1/2", "delta": "1/2", "partitions": "grid"},
                "branching": 64,
                "alpha": "1/80"
            }},
            "seed": 3,
            "trials": 1
        }"#,
    );
    let output = bin()
        .args(["bounded", "--config"])
        .arg(&config)
        .args(["--budget", "10"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn missing_results_exit_with_code_four() {
    let dir = temp_dir("noresults");
    let output = bin().args(["report", "--results"]).arg(&dir).output().unwrap();
    assert_eq!(output.status.code(), Some(4));
}

#[test]
fn simulate_persists_replay_identical_rows() {
    let dir = temp_dir("replay");
    let config = write_config(
        &dir,
        "sim.json",
        r#"{
            "kind": {"agreement": {
                "instance": {"family": "shared_prior", "agents": 2, "states": 8,
                             "epsilon": "1/10", "delta": "1/10", "partitions": "grid"}
            }},
            "seed": 9,
            "trials": 6
        }"#,
    );
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    for out in [&out_a, &out_b] {
        let output = bin()
            .args(["simulate", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(out)
            .output()
            .unwrap();
        assert!(output.status.success());
    }
    let rows_a = std::fs::read(out_a.join("rows.csv")).unwrap();
    let rows_b = std::fs::read(out_b.join("rows.csv")).unwrap();
    assert_eq!(rows_a, rows_b, "replay must be byte-identical");

    // Report over the stored rows renders a table and a series file.
    let report_out = dir.join("report");
    let output = bin()
        .args(["report", "--results"])
        .arg(&out_a)
        .arg("--out")
        .arg(&report_out)
        .output()
        .unwrap();
    assert!(output.status.success());
    assert!(String::from_utf8_lossy(&output.stdout).contains("agreement"));
    assert!(report_out.join("series.csv").exists());
    // Stored rows are untouched by reporting.
    assert_eq!(std::fs::read(out_a.join("rows.csv")).unwrap(), rows_a);
}

#[test]
fn sweep_runs_cells_and_emits_summary() {
    let dir = temp_dir("sweep");
    let config = write_config(
        &dir,
        "sweep.json",
        r#"{
            "kind": {"sweep": {
                "base": {"instance": {"family": "shared_prior", "agents": 2, "states": 8,
                                       "epsilon": "1/5", "delta": "1/10", "partitions": "grid"}},
                "epsilons": ["1/5", "1/10"]
            }},
            "seed": 4,
            "trials": 5
        }"#,
    );
    let out = dir.join("out");
    let output = bin()
        .args(["sweep", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["cells"].as_array().unwrap().len(), 2);
    assert!(summary["median_rounds_monotone_in_shrinking_epsilon"].as_bool().unwrap());
}
