use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qetlab(args: &[&str]) -> Output {
    qetlab_env(args, &[])
}

fn qetlab_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qetlab"));
    cmd.args(args).env_remove("QETLAB_MAX_SITES");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    assert_eq!(code(o), 0, "stderr: {}", stderr(o));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn critical_correlator_table() {
    let o = qetlab(&["analytic", "--lambda", "1", "--nmax", "30", "--format", "csv"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.starts_with("# tool: qetlab\n# version: "));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 31);
    assert!(rows[0][1].starts_with("6.36619772367581e-1"));
    let g0: f64 = rows[0][1].parse().unwrap();
    assert!((g0 - 2.0 / std::f64::consts::PI).abs() < 1e-14);
}

#[test]
fn product_limit_has_zero_determinants() {
    let o = qetlab(&["analytic", "--lambda", "0", "--nmax", "5", "--format", "csv"]);
    assert_eq!(code(&o), 0);
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 6);
    for r in &rows[1..] {
        assert_eq!(r[2].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn energy_table_columns() {
    let o = qetlab(&["analytic", "--format", "csv", "--table", "energies", "--distances", "5,10"]);
    let text = stdout(&o);
    assert!(text.contains("\nd,xi,eta,theta,E_B,E_B_asym\n"));
    assert_eq!(csv_rows(&text).len(), 2);
}

#[test]
fn lambda_out_of_range_is_a_usage_error() {
    let o = qetlab(&["analytic", "--lambda", "1.5"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("0 <= lambda <= 1"), "{}", stderr(&o));
    assert_eq!(code(&qetlab(&["qet", "--lambda", "-0.5"])), 2);
    assert_eq!(code(&qetlab(&["qet", "--bogus"])), 2);
}

#[test]
fn qet_report_identity_and_metadata() {
    let v = json(&qetlab(&["qet", "--N", "14", "--lambda", "1", "--d", "5"]));
    assert_eq!(v["tool"], "qetlab");
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["config"]["model"]["sites"], 14);
    let c = &v["report"]["consumers"][0];
    assert!((f(&c["e_m_meas"]) - f(&c["e_m_pred"])).abs() < 1e-9);
    assert_eq!(c["site"], 5);
}

#[test]
fn qed_residual_bookkeeping() {
    let v = json(&qetlab(&["qed", "--N", "14", "--consumers", "-5,5"]));
    let r = &v["report"];
    assert_eq!(r["consumers"].as_array().unwrap().len(), 2);
    let residual = f(&r["residual_total"]);
    assert!((residual - (f(&r["e_s"]) - f(&r["e_c"]))).abs() < 1e-9);
    assert!(residual >= 0.0);
}

#[test]
fn qed_adversary_deposits_energy() {
    let v = json(&qetlab(&["qed", "--N", "16", "--consumers", "5", "--adversary", "11", "--theta-d", "0.3"]));
    let a = &v["report"]["adversary"];
    assert!(f(&a["deposit"]) > 0.0);
    assert_eq!(f(&v["report"]["adversary_deposit"]), f(&a["deposit"]));
}

#[test]
fn placement_and_consumer_count_are_checked() {
    assert_eq!(code(&qetlab(&["qed", "--N", "14", "--consumers", "2"])), 2);
    assert_eq!(code(&qetlab(&["qet", "--consumers", "-5,5"])), 2);
}

#[test]
fn cooling_reaches_residual_energy() {
    let v = json(&qetlab(&["cooling", "--N", "14", "--lambda", "1"]));
    let r = &v["report"];
    assert!((f(&r["e_r"]) / 0.91 - 1.0).abs() < 0.01);
    assert_eq!(r["bound_satisfied"], true);
    assert_eq!(r["bound_satisfied_finite"], true);
    assert!((f(&r["e_c_reference"]) - 3.1387e-5).abs() < 1e-8);
    assert_eq!(r["consumer_sites"], serde_json::json!([5, -5]));
}

#[test]
fn unconverged_cooling_is_flagged_with_exit_3() {
    let o = qetlab(&["cooling", "--N", "10", "--max-iterations", "1"]);
    assert_eq!(code(&o), 3);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["report"]["converged"], false);
}

#[test]
fn outputs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let o = qetlab(&["qed", "--N", "14", "--consumers", "-5,5", "--out", p.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", r#"{"model": {"sites": 12, "lambda": 0.5}, "consumers": [6]}"#);
    let v = json(&qetlab(&["qet", "--config", &cfg, "--lambda", "1"]));
    assert_eq!(v["config"]["model"]["sites"], 12);
    assert_eq!(f(&v["config"]["model"]["lambda"]), 1.0);
    assert_eq!(v["config"]["consumers"], serde_json::json!([6]));
    let bad = write(dir.path(), "bad.json", r#"{"model": {"sitez": 12}}"#);
    assert_eq!(code(&qetlab(&["qet", "--config", &bad])), 2);
}

#[test]
fn coupling_flag_sets_lambda() {
    let v = json(&qetlab(&["qet", "--N", "10", "--h", "2", "--J", "1"]));
    assert_eq!(f(&v["config"]["model"]["lambda"]), 0.5);
}

#[test]
fn capacity_override() {
    let small = qetlab_env(&["qet", "--N", "10"], &[("QETLAB_MAX_SITES", "8")]);
    assert_eq!(code(&small), 2);
    assert!(stderr(&small).contains("capacity"));
    assert_eq!(code(&qetlab_env(&["qet"], &[("QETLAB_MAX_SITES", "x")])), 2);
    assert_eq!(code(&qetlab(&["qet", "--N", "21"])), 2);
}

#[test]
fn validate_subset_by_number_and_group() {
    let o = qetlab(&["validate", "--only", "1,2"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let lines: Vec<String> = stdout(&o).lines().filter(|l| l.starts_with("criterion")).map(String::from).collect();
    assert_eq!(lines.len(), 2);
    assert!(lines.iter().all(|l| l.contains("PASS")));

    let o = qetlab(&["validate", "--only", "ising"]);
    let text = stdout(&o);
    let ids: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("criterion"))
        .map(|l| l.split_whitespace().nth(1).unwrap())
        .collect();
    assert_eq!(ids, ["1", "2", "3", "4"]);
    // the critical-energies criterion carries the unattainable quoted E_C
    assert_eq!(code(&o), 1);
    assert!(text.contains("critical-energies        FAIL"));

    assert_eq!(code(&qetlab(&["validate", "--only", "nope"])), 2);
}

#[test]
fn validate_writes_deterministic_json() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        assert_eq!(code(&qetlab(&["validate", "--only", "1,3", "--out", p.to_str().unwrap()])), 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let v: Value = serde_json::from_slice(&std::fs::read(&a).unwrap()).unwrap();
    assert_eq!(v["report"]["passed"], 2);
}

#[test]
fn corrupted_tolerances_refuse_to_run() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("garbage.json", "{not json"),
        ("negative.json", r#"{"same_chain_abs": -1e-9}"#),
        ("loose.json", r#"{"bookkeeping_abs": 0.5}"#),
        ("unknown.json", r#"{"fudge": 1}"#),
    ] {
        let p = write(dir.path(), name, text);
        let o = qetlab(&["validate", "--only", "1", "--tolerances", &p]);
        assert_eq!(code(&o), 2, "{name}");
        assert!(stderr(&o).contains("refusing to validate"), "{name}: {}", stderr(&o));
        assert!(!stdout(&o).contains("criterion"));
    }
    let tight = write(dir.path(), "tight.json", r#"{"correlator_abs": 1e-12}"#);
    assert_eq!(code(&qetlab(&["validate", "--only", "1", "--tolerances", &tight])), 0);
}

const SCENARIO: &str = r#"{
  "model": {"sites": 16, "lambda": 1.0},
  "nodes": [
    {"id": "S", "role": "supplier", "site": 0, "axis": [0, 1, 0]},
    {"id": "C", "role": "consumer", "site": 5, "axis": [1, 0, 0], "key": 9},
    {"id": "D", "role": "adversary", "site": 11, "axis": [1, 0, 0]}
  ],
  "scenario": "impersonate",
  "seed": 21
}"#;

#[test]
fn netsim_log_replays_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(dir.path(), "s.json", SCENARIO);
    let log = dir.path().join("log.jsonl");
    let o = qetlab(&["netsim", "--scenario", &scenario, "--out", log.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&log).unwrap();
    let records: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records[0]["record"], "header");
    assert_eq!(records.last().unwrap()["record"], "summary");
    assert!(records[1..records.len() - 1].iter().all(|r| r["record"] == "event"));

    let again = qetlab(&["netsim", "--scenario", &scenario]);
    assert_eq!(stdout(&again), text);

    let v = json(&qetlab(&["netsim", "--replay", log.to_str().unwrap()]));
    assert_eq!(v["report"]["ledgers_match"], true);
    assert_eq!(v["report"]["rerun_matches"], true);

    // flip one recorded energy
    let idx = text.find("\"energy\":").unwrap() + "\"energy\":".len();
    let end = idx + text[idx..].find([',', '}']).unwrap();
    let tampered = format!("{}1.0000000000000000e0{}", &text[..idx], &text[end..]);
    let bad = write(dir.path(), "bad.jsonl", &tampered);
    assert_eq!(code(&qetlab(&["netsim", "--replay", &bad])), 1);
}

#[test]
fn netsim_requires_a_scenario() {
    assert_eq!(code(&qetlab(&["netsim"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "s.json", r#"{"nodes": [], "scenario": "teleport"}"#);
    assert_eq!(code(&qetlab(&["netsim", "--scenario", &bad])), 2);
}

#[test]
fn dump_state_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let pure = dir.path().join("g.json");
    assert_eq!(code(&qetlab(&["dump-state", "--N", "6", "--out", pure.to_str().unwrap()])), 0);
    let v: Value = serde_json::from_slice(&std::fs::read(&pure).unwrap()).unwrap();
    assert_eq!(v["report"]["kind"], "pure");
    assert_eq!(v["report"]["entries"].as_array().unwrap().len(), 64);
    let s = json(&qetlab(&["dump-state", "--load", pure.to_str().unwrap()]));
    assert!((f(&s["report"]["trace"]) - 1.0).abs() < 1e-12);

    let mixed = dir.path().join("m.json");
    let o = qetlab(&["dump-state", "--N", "6", "--stage", "measured", "--out", mixed.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let s = json(&qetlab(&["dump-state", "--load", mixed.to_str().unwrap()]));
    assert_eq!(s["report"]["kind"], "density");
    assert!(f(&s["report"]["min_eigenvalue"]) >= -1e-10);
    assert!(f(&s["report"]["purity"]) < 1.0);

    let mut doc: Value = serde_json::from_slice(&std::fs::read(&pure).unwrap()).unwrap();
    doc["report"]["entries"][0] = serde_json::json!([5.0, 0.0]);
    let bad = write(dir.path(), "bad.json", &doc.to_string());
    assert_eq!(code(&qetlab(&["dump-state", "--load", &bad])), 2);
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&qetlab(&["--version"])), 0);
    let o = qetlab(&["--help"]);
    assert_eq!(code(&o), 0);
    for sub in ["analytic", "qet", "qed", "cooling", "netsim", "validate", "dump-state"] {
        assert!(stdout(&o).contains(sub));
    }
}
