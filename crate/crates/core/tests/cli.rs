use std::fs;
use std::path::Path;
use std::process::Command;

use spinread::cli::*;
use spinread::pipeline::ProtocolConfig;
use spinread::wire_fields::{ImperfectionKind, ImperfectionSpec};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_spinread"));
    c.env(THREADS_ENV, "2");
    c
}

fn run_ok(args: &[&str]) {
    let out = bin().args(args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn simulate_is_reproducible_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        run_ok(&["simulate", "--trials", "1", "--seed", "7", "--out", d.to_str().unwrap()]);
    }
    assert_eq!(fs::read(a.join("report.json")).unwrap(), fs::read(b.join("report.json")).unwrap());
    assert_eq!(fs::read(a.join("histogram.csv")).unwrap(), fs::read(b.join("histogram.csv")).unwrap());
    let report = read_json(&a.join("report.json"));
    assert_eq!(report["n_trials"], 1);
    assert_eq!(report["seed"], 7);
    let manifest = read_json(&a.join("manifest.json"));
    assert_eq!(manifest["master_seed"], 7);
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["config"]["n_trials"], 1);
}

#[test]
fn manifest_alone_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    run_ok(&["simulate", "--trials", "3", "--seed", "9", "--spin", "-1", "--out", first.to_str().unwrap()]);
    let manifest = read_json(&first.join("manifest.json"));
    let cfg_path = dir.path().join("replay.json");
    fs::write(&cfg_path, manifest["config"].to_string()).unwrap();
    let second = dir.path().join("second");
    run_ok(&["simulate", "--config", cfg_path.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert_eq!(
        fs::read(first.join("report.json")).unwrap(),
        fs::read(second.join("report.json")).unwrap()
    );
}

#[test]
fn optional_simulate_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    run_ok(&["simulate", "--trials", "2", "--write-trials", "--trajectory", "--out", d.to_str().unwrap()]);
    let trials = fs::read_to_string(d.join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 3);
    let traj = fs::read_to_string(d.join("trajectory.csv")).unwrap();
    assert!(traj.lines().count() > 100);
}

#[test]
fn missing_geometry_field_is_named() {
    let text = r#"{"circuit": {"half_separation": 1e-5, "trap_height": 3.3e-5}}"#;
    match parse_config(text, "cfg.json") {
        Err(CliError::ConfigParse { field, line, path, .. }) => {
            assert!(field.is_some(), "no field named");
            assert_eq!(line, 1);
            assert_eq!(path, "cfg.json");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn unknown_field_is_named() {
    let text = "{\n  \"omega\": 1e9,\n  \"trails\": 4\n}";
    match parse_config(text, "cfg.json") {
        Err(CliError::ConfigParse { field, line, .. }) => {
            assert_eq!(field.as_deref(), Some("trails"));
            assert_eq!(line, 3);
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn unknown_imperfection_kind_lists_the_choices() {
    let text = r#"{"imperfections": [{"kind": "wobble", "magnitude": 1e-7}]}"#;
    let err = parse_config(text, "cfg.json").unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("wobble"), "{msg}");
    assert!(msg.contains("expected one of"), "{msg}");
}

#[test]
fn empty_sweep_writes_only_the_header() {
    let cfg = ProtocolConfig::default();
    let rows = cmd_imperfections(&cfg, &[]).unwrap();
    assert!(rows.is_empty());
    assert_eq!(imperfection_csv(&rows).trim_end(), "kind,magnitude,e_ratio,b_center_uT");

    let dir = tempfile::tempdir().unwrap();
    let sweep = dir.path().join("sweep.json");
    fs::write(&sweep, "[]").unwrap();
    let out = dir.path().join("o");
    run_ok(&["imperfections", "--sweep", sweep.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let csv = fs::read_to_string(out.join("imperfections.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn imperfection_csv_has_one_row_per_case() {
    let cfg = ProtocolConfig::default();
    let sweep: Vec<_> = ImperfectionKind::ALL
        .iter()
        .map(|&k| ImperfectionSpec::new(k, k.default_magnitude()).unwrap())
        .collect();
    let rows = cmd_imperfections(&cfg, &sweep).unwrap();
    assert_eq!(imperfection_csv(&rows).lines().count(), 1 + sweep.len());
}

#[test]
fn field_report_values() {
    let r = cmd_fields(&ProtocolConfig::default()).unwrap();
    assert!((r.analytic_gradient - 160.0).abs() <= 1.0);
    assert!((145.0..=155.0).contains(&r.subdivided_gradient));
    assert!((r.shielded_gradient / 90.0 - 1.0).abs() < 0.05);
    assert!(r.eta < 0.0);
}

#[test]
fn zero_drive_current_zeroes_every_gradient() {
    let mut cfg = ProtocolConfig::default();
    cfg.circuit.drive_current = 0.0;
    let r = cmd_fields(&cfg).unwrap();
    assert_eq!(r.analytic_gradient, 0.0);
    assert_eq!(r.line_gradient, 0.0);
    assert_eq!(r.subdivided_gradient, 0.0);
    assert_eq!(r.shielded_gradient, 0.0);
}

#[test]
fn optimize_zero_target_and_infeasible_target() {
    let mut cfg = ProtocolConfig::default();
    let r = cmd_optimize(&cfg).unwrap();
    assert_eq!(r.solution.voltages.len(), 10);
    assert!(r.max_shift_below_3um < 1e-6);

    cfg.omega = 10.0 * ProtocolConfig::default().omega;
    let err = cmd_optimize(&cfg).unwrap_err();
    let json = err.to_json();
    assert_eq!(json["error"]["kind"], "infeasible");
    assert!(json["error"]["electrode"].as_str().unwrap().starts_with("DC"));
}

#[test]
fn optimize_for_no_confinement_gives_zero_voltages() {
    // A zero target is not a valid protocol omega, so go through the trap model.
    use spinread::trap_model::{optimize_voltages, ElectrodeLayout};
    let sol = optimize_voltages(&ElectrodeLayout::standard(), 0.0, (-10e-6, 10e-6)).unwrap();
    assert!(sol.voltages.iter().all(|v| *v == 0.0));
}

#[test]
fn echo_demo_suppresses() {
    let r = cmd_echo_demo(&ProtocolConfig::default()).unwrap();
    assert!(r.echo.suppression >= 10.0, "{}", r.echo.suppression);
    assert!(r.echo.sufficient);
    let v = serde_json::to_value(&r).unwrap();
    assert!(v["suppression"].is_number() && v["t_drive"].is_number());
}

#[test]
fn binary_reports_errors_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{\"omega\": 1e9,\n \"circuit\": {\"drive_current\": 1}}").unwrap();
    let out = bin()
        .args(["fields", "--config", cfg.to_str().unwrap(), "--out"])
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config_parse");
    assert_eq!(err["error"]["line"], 2);
    assert!(err["error"]["field"].is_string());

    let missing = bin().args(["fields", "--config", "/nonexistent/cfg.json"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&missing.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "io");
}

#[test]
fn binary_rejects_bad_spin() {
    let out = bin().args(["simulate", "--spin", "0"]).output().unwrap();
    assert!(!out.status.success());
}
