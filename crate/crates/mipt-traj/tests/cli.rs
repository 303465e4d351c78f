//! End-to-end checks of the command-line binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mipt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mipt"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

#[test]
fn record_is_deterministic_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "record", "--n", "16", "--layers", "16", "--p", "0.3", "--family", "clifford", "--seed",
        "7", "--out",
    ];
    let a: Vec<&str> = args.iter().copied().chain(["a.traj.json"]).collect();
    let b: Vec<&str> = args.iter().copied().chain(["b.traj.json"]).collect();
    assert_eq!(code(&mipt(dir.path(), &a)), 0);
    assert_eq!(code(&mipt(dir.path(), &b)), 0);
    let bytes_a = fs::read(dir.path().join("a.traj.json")).unwrap();
    let bytes_b = fs::read(dir.path().join("b.traj.json")).unwrap();
    assert_eq!(bytes_a, bytes_b, "same seed must give identical records");

    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("a.traj.json.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "record");
    assert_eq!(manifest["master_seed"], 7);
    assert!(manifest["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn record_without_measurements() {
    let dir = tempfile::tempdir().unwrap();
    let out = mipt(
        dir.path(),
        &[
            "record", "--n", "8", "--layers", "4", "--p", "0", "--seed", "1", "--out",
            "p0.traj.json",
        ],
    );
    assert_eq!(code(&out), 0);
    let record: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("p0.traj.json")).unwrap()).unwrap();
    assert_eq!(record["measurements"].as_array().unwrap().len(), 0);
}

#[test]
fn usage_errors_exit_1_without_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let odd = mipt(
        dir.path(),
        &["record", "--n", "7", "--layers", "4", "--p", "0.1", "--out", "x.json"],
    );
    assert_eq!(code(&odd), 1);
    assert!(!dir.path().join("x.json").exists());

    let bad_flag = mipt(dir.path(), &["record", "--frobnicate"]);
    assert_eq!(code(&bad_flag), 1);

    let bad_grid = mipt(
        dir.path(),
        &["fidelity-sweep", "--beta", "three", "--out", "y.csv"],
    );
    assert_eq!(code(&bad_grid), 1);
    assert!(!dir.path().join("y.csv").exists());

    let zero_p = mipt(dir.path(), &["bounds", "--p", "0"]);
    assert_eq!(code(&zero_p), 1);

    let help = mipt(dir.path(), &["--help"]);
    assert_eq!(code(&help), 0);
}

#[test]
fn bounds_report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = mipt(
        dir.path(),
        &[
            "bounds", "--p", "0.1", "--m", "50", "--epsilon", "0.1", "--n", "64", "--poly",
            "1:1:1", "--out", "b.json",
        ],
    );
    assert_eq!(code(&out), 0);
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("b.json")).unwrap()).unwrap();
    let eps_beta = report["report"]["epsilon_beta"].as_f64().unwrap();
    assert!((eps_beta - 0.001).abs() < 1e-15);
    assert!(report["failure"]["delta"].as_f64().unwrap() > 0.0);
}

#[test]
fn replay_from_stored_learned_unitaries_reproduces_the_state() {
    let dir = tempfile::tempdir().unwrap();
    let rec = mipt(
        dir.path(),
        &[
            "record", "--n", "6", "--layers", "3", "--p", "0.3", "--family", "haar", "--seed",
            "5", "--out", "t.traj.json",
        ],
    );
    assert_eq!(code(&rec), 0);
    let learn = mipt(
        dir.path(),
        &[
            "replay", "--record", "t.traj.json", "--epsilon", "0.2", "--r", "1", "--dtau",
            "0.1", "--out", "r1.json",
        ],
    );
    assert_eq!(code(&learn), 0, "{}", String::from_utf8_lossy(&learn.stderr));
    let stored = mipt(
        dir.path(),
        &[
            "replay", "--record", "t.traj.json", "--epsilon", "0.2", "--r", "1", "--dtau",
            "0.1", "--learned", "r1.json.learned.json", "--out", "r2.json",
        ],
    );
    assert_eq!(code(&stored), 0, "{}", String::from_utf8_lossy(&stored.stderr));
    let f = |name: &str| -> f64 {
        let v: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.path().join(name)).unwrap()).unwrap();
        v["final_fidelity"].as_f64().unwrap()
    };
    assert!(
        (f("r1.json") - f("r2.json")).abs() <= 1e-12,
        "stored replay diverged: {} vs {}",
        f("r1.json"),
        f("r2.json")
    );
}

#[test]
fn amplify_emits_per_step_probabilities() {
    let dir = tempfile::tempdir().unwrap();
    let out = mipt(
        dir.path(),
        &["amplify", "--k-amp", "4", "--m", "6", "--out", "amp.json"],
    );
    assert_eq!(code(&out), 0);
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("amp.json")).unwrap()).unwrap();
    let steps = report["step_probabilities"].as_array().unwrap();
    assert_eq!(steps.len(), 6);
    assert!(steps.iter().all(|p| p.as_f64().unwrap() > 0.5));
}

#[test]
fn mutualinfo_csv_has_the_documented_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = mipt(
        dir.path(),
        &[
            "mutualinfo", "--n", "16", "--layers", "8", "--p", "0.3", "--r", "1", "2", "--traj",
            "10", "--seed", "3", "--out", "mi.csv",
        ],
    );
    assert_eq!(code(&out), 0);
    let csv = fs::read_to_string(dir.path().join("mi.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "n,L,p,r,stat,value,stderr,n_traj");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 8);
    assert_eq!(row[0], "16");
    assert_eq!(row[4], "median");
    // 17 significant digits round-trip exactly
    let value: f64 = row[5].parse().unwrap();
    assert_eq!(format!("{value:.16e}"), row[5]);
}
