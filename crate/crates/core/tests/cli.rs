use std::f64::consts::{LN_2, PI};
use std::process::{Command, Output};

use ftqkd::security::SQRT_PI;

fn ftqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ftqkd"))
        .args(args)
        .output()
        .expect("spawn ftqkd")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8")
}

#[test]
fn default_curve_matches_golden_file() {
    let out = ftqkd(&["qber-curve"]);
    assert!(out.status.success());
    let golden = include_str!("data/qber_curve_default.csv");
    assert_eq!(stdout(&out), golden);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("0.110028"), "{stderr}");
}

#[test]
fn curve_row_at_70_ps_against_direct_evaluation() {
    let out = ftqkd(&["qber-curve", "--jitter-min", "70 ps", "--jitter-max", "80 ps", "--steps", "2"]);
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "jitter_ps,delta_sq,qber,keyrate");
    assert_eq!(lines.len(), 3);
    let cols: Vec<f64> = lines[1].split(',').map(|c| c.parse().unwrap()).collect();
    // π c δt² / (ln2 λ² |D|) with c in vacuum, δt = 70 ps, λ = 1550 nm, D = 7000 ps/nm
    let dsq = PI * 2.997_924_58e8 * 70e-12f64.powi(2) / (LN_2 * 1550e-9f64.powi(2) * 7.0);
    let qber = 2.0 * dsq.sqrt() / PI * (-PI / (4.0 * dsq)).exp();
    assert!((cols[1] / dsq - 1.0).abs() < 1e-9);
    assert!((cols[2] / qber - 1.0).abs() < 1e-9);
    assert!((cols[2] - 0.055).abs() < 0.005);
}

#[test]
fn keyrate_command() {
    let out = ftqkd(&["keyrate", "--qber", "0.05", "--gain", "0.1", "--f", "1.16"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "0.019069");
    assert_eq!(stdout(&ftqkd(&["keyrate", "--qber", "0"])).trim(), "0.500000");
}

#[test]
fn exit_codes() {
    assert_eq!(ftqkd(&["keyrate", "--qber", "0.7"]).status.code(), Some(2));
    assert_eq!(ftqkd(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(ftqkd(&["qber-curve", "--jitter-min", "70 furlongs"]).status.code(), Some(2));
    assert_eq!(
        ftqkd(&["qber-curve", "--out", "/nonexistent-dir/curve.csv"]).status.code(),
        Some(3)
    );
    assert_eq!(
        ftqkd(&["simulate", "epr", "--config", "/nonexistent-dir/cfg.json"]).status.code(),
        Some(3)
    );
}

#[test]
fn bad_config_reports_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"detector_b": {"jitter": "70 ps", "efficiency": 1.5}}"#).unwrap();
    let out = ftqkd(&["simulate", "epr", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("detector_b"), "{stderr}");
}

#[test]
fn spectrometer_refuses_key_distribution_dispersion() {
    let out = ftqkd(&["spectrometer", "--pulses", "100"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("D_B = +D_A"));
}

#[test]
fn spectrometer_histogram_conserves_coincidences() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("spec.json");
    std::fs::write(&cfg, r#"{"dispersive_b": {"dispersion": "7000 ps/nm"}}"#).unwrap();
    let csv = dir.path().join("hist.csv");
    let out = ftqkd(&[
        "spectrometer",
        "--pulses",
        "20000",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stats: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    let total: u64 = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, stats["coincidences"].as_u64().unwrap());
    let bw = stats["recovered_bandwidth_hz"].as_f64().unwrap();
    assert!((bw / 100e9 - 1.0).abs() < 0.05, "{bw}");
}

#[test]
fn print_config_round_trips_through_simulate() {
    let dir = tempfile::tempdir().unwrap();
    for mode in ["pm", "epr", "epr-midpoint"] {
        let out = ftqkd(&["print-config", mode]);
        assert!(out.status.success());
        let path = dir.path().join(format!("{mode}.json"));
        std::fs::write(&path, &out.stdout).unwrap();
        let run = ftqkd(&["simulate", mode, "--config", path.to_str().unwrap(), "--pulses", "2000"]);
        assert!(run.status.success(), "{mode}: {}", String::from_utf8_lossy(&run.stderr));
        let report: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
        let printed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        let mut used = report["config"].clone();
        used["pulses"] = printed["pulses"].clone();
        assert_eq!(used, printed, "{mode}");
    }
}

#[test]
fn transcript_carries_only_public_information() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    let out = ftqkd(&["simulate", "epr", "--pulses", "20000", "--transcript", path.to_str().unwrap()]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let allowed = ["slot_id", "basis_a", "basis_b", "m", "kept"];
    let mut rows = 0u64;
    let mut kept = 0u64;
    for line in text.lines() {
        let row: serde_json::Value = serde_json::from_str(line).unwrap();
        let obj = row.as_object().unwrap();
        assert!(obj.keys().all(|k| allowed.contains(&k.as_str())), "{line}");
        assert_eq!(row["slot_id"].as_u64(), Some(rows));
        if let Some(m) = row["m"].as_f64() {
            assert!((0.0..SQRT_PI).contains(&m));
            assert_eq!(row["basis_a"], row["basis_b"]);
        }
        if row["kept"].as_bool().unwrap() {
            kept += 1;
            assert!(row["m"].is_f64());
        }
        rows += 1;
    }
    assert_eq!(rows, 20000);
    assert_eq!(kept, report["counts"]["kept"].as_u64().unwrap());
}
