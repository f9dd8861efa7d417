use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn rodplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rodplan")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

/// Two areas, one edge node, two periods.
fn tiny_instance(dir: &Path, kind: &str) -> PathBuf {
    let out = dir.join(format!("tiny-{kind}.json"));
    let o = rodplan(&[
        "generate", "--ap", "2", "--en", "1", "--horizon", "2", "--kind", kind, "--gamma", "1", "--history", "200",
        "--seed", "3", "--out", path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn generate_writes_instance_and_history() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("traces.csv");
    let truth = dir.path().join("truth.json");
    let out = dir.path().join("inst.json");
    let o = rodplan(&[
        "generate", "--ap", "3", "--en", "2", "--horizon", "2", "--gamma", "1", "--history", "300", "--seed", "1",
        "--out", path(&out), "--traces-out", path(&traces), "--truth-out", path(&truth),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let inst = read_json(&out);
    assert_eq!(inst["forecast"].as_array().unwrap().len(), 3);
    assert_eq!(std::fs::read_to_string(&traces).unwrap().lines().count(), 301);
    assert!(read_json(&truth)["A"].is_array());

    let again = dir.path().join("again.json");
    let o = rodplan(&[
        "generate", "--ap", "3", "--en", "2", "--horizon", "2", "--gamma", "1", "--history", "300", "--seed", "1",
        "--out", path(&again),
    ]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());

    let fit = dir.path().join("fit.json");
    let o = rodplan(&["fit", "--traces", path(&traces), "--out", path(&fit)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_json(&fit)["A"].as_array().unwrap().len(), 3);
}

#[test]
fn det_without_demand_is_free() {
    let dir = tempfile::tempdir().unwrap();
    let src = tiny_instance(dir.path(), "sus");
    let mut inst = read_json(&src);
    inst["forecast"] = serde_json::json!([[0.0, 0.0], [0.0, 0.0]]);
    let zero = dir.path().join("zero.json");
    std::fs::write(&zero, inst.to_string()).unwrap();
    let out = dir.path().join("det.json");
    let o = rodplan(&["solve", "--instance", path(&zero), "--model", "det", "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&out);
    assert!(r["objective"].as_f64().unwrap().abs() < 1e-9);
    assert!(dir.path().join("det.log.jsonl").exists());
}

#[test]
fn solve_writes_the_iteration_log() {
    let dir = tempfile::tempdir().unwrap();
    let inst = tiny_instance(dir.path(), "dus");
    let out = dir.path().join("rod.json");
    let log = dir.path().join("iters.jsonl");
    let o = rodplan(&["solve", "--instance", path(&inst), "--out", path(&out), "--log", path(&log)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_json(&out)["converged"], true);
    let lines: Vec<Value> =
        std::fs::read_to_string(&log).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(lines.iter().any(|l| l["level"] == "outer"));
    assert!(lines.iter().all(|l| l.get("LB").is_some() && l.get("scenario_digest").is_some()));
}

#[test]
fn oracle_check_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let inst = tiny_instance(dir.path(), "dus");
    let out = dir.path().join("oracle.json");
    let o = rodplan(&["oracle-check", "--instance", path(&inst), "--points", "2", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.exists());
}

#[test]
fn gamma_sweep_is_nondecreasing() {
    let dir = tempfile::tempdir().unwrap();
    let inst = tiny_instance(dir.path(), "sus");
    let out = dir.path().join("report.csv");
    let o = rodplan(&["report", "--instance", path(&inst), "--sweep", "gamma=0,1,2", "--out", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rd = csv::Reader::from_path(&out).unwrap();
    let objs: Vec<f64> = rd.records().map(|r| r.unwrap()[3].parse().unwrap()).collect();
    assert_eq!(objs.len(), 3);
    assert!(objs.windows(2).all(|w| w[1] >= w[0] * (1.0 - 2e-3)), "{objs:?}");
}

#[test]
fn evaluate_writes_samples() {
    let dir = tempfile::tempdir().unwrap();
    let inst = tiny_instance(dir.path(), "sus");
    let out = dir.path().join("eval.json");
    let o = rodplan(&[
        "evaluate", "--instance", path(&inst), "--models", "det,daro-sus", "--trajectories", "3", "--out", path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_json(&out)["policies"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(dir.path().join("eval.samples.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 3);
}

#[test]
fn usage_errors_are_json() {
    let o = rodplan(&["solve", "--gamma", "many"]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "usage");
}

#[test]
fn runtime_errors_carry_a_kind() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let o = rodplan(&["solve", "--instance", path(&missing)]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "io");

    let inst = tiny_instance(dir.path(), "sus");
    let o = rodplan(&["solve", "--instance", path(&inst), "--model", "daro-dus"]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "unsupported");
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let inst = tiny_instance(dir.path(), "sus");
    let out = dir.path().join("det.json");
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, serde_json::json!({"instance": inst, "model": "det", "out": out}).to_string()).unwrap();
    let o = rodplan(&["--config", path(&cfg), "solve"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_json(&out)["model"], "det");
    std::fs::write(&cfg, r#"{"bogus": 1}"#).unwrap();
    assert_eq!(rodplan(&["--config", path(&cfg), "solve"]).status.code(), Some(1));
}
