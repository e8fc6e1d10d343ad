//! End-to-end checks of the command-line interface.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_purdest"))
}

#[test]
fn estimate_writes_single_trial_report() {
    let out = std::env::temp_dir().join("purdest_cli_estimate.json");
    let output = bin()
        .args([
            "estimate", "--d", "8", "--eps", "1.0", "--alpha", "0.3", "--beta", "0.1",
            "--c-scale", "0.0625", "--seed", "1", "--profile", "uniform:0.2", "--out",
        ])
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    let value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(value["trials"].as_array().unwrap().len(), 1);
    assert_eq!(value["config"]["trials"].as_u64().unwrap(), 1);
}

#[test]
fn experiment_csv_has_expected_header() {
    let out = std::env::temp_dir().join("purdest_cli_experiment.csv");
    let output = bin()
        .args([
            "experiment", "--d", "4", "--eps", "1.0", "--alpha", "0.3", "--beta", "0.1",
            "--c-scale", "0.03125", "--seed", "2", "--profile", "powerlaw:1.0,0.4",
            "--trials", "3", "--format", "csv", "--out",
        ])
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "{output:?}");
    let body = std::fs::read_to_string(&out).unwrap();
    let mut lines = body.lines();
    assert_eq!(
        lines.next().unwrap(),
        "trial,seed,tv_exact,tv_upper,success,rounds,truncations,wall_ms"
    );
    assert_eq!(lines.count(), 3);
}

#[test]
fn audit_reports_within_bound() {
    let output = bin()
        .args([
            "audit", "--m", "100", "--dim", "8", "--radius", "2.0", "--pairs", "50",
            "--seed", "3",
        ])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("within bound"), "{stdout}");
}

#[test]
fn metrics_computes_divergences() {
    let output = bin()
        .args(["metrics", "--exact-tv", "0.2,0.3", "0.25,0.3"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("tv_upper = 0.05"), "{stdout}");
    assert!(stdout.contains("tv_exact = 0.05"), "{stdout}");
}

#[test]
fn bad_arguments_fail_cleanly() {
    // Mismatched dimensions in metrics.
    let output = bin().args(["metrics", "0.2,0.3", "0.25"]).output().unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8(output.stderr).unwrap().starts_with("error:"));

    // Unknown learner.
    let out = std::env::temp_dir().join("purdest_cli_bad.json");
    let output = bin()
        .args([
            "estimate", "--d", "4", "--eps", "1.0", "--alpha", "0.3", "--beta", "0.1",
            "--learner", "bogus", "--seed", "0", "--profile", "uniform:0.2", "--out",
        ])
        .arg(&out)
        .output()
        .unwrap();
    assert!(!output.status.success());
}
