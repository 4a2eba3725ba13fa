use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use spectrum_bandit::formats::read_trace;

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spectrum-bandit"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn solve_prints_best_configuration() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "inst.json", r#"{"n": 2, "c": 2, "edges": [], "interference": "full"}"#);
    write(dir.path(), "w.csv", "0.9,0.1\n0.2,0.8\n");
    let out = bin(&["solve", "inst.json", "w.csv"], dir.path());
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"], "1-2");
    assert!((v["value"].as_f64().unwrap() - 1.7).abs() < 1e-12);
}

#[test]
fn solve_reports_inactive_links() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "inst.json", r#"{"n": 2, "c": 1, "interference": "full"}"#);
    write(dir.path(), "w.csv", "0.3\n0.7\n");
    let out = bin(&["solve", "inst.json", "w.csv"], dir.path());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["channels"], serde_json::json!([null, 1]));
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "inst.json", r#"{"n": 2, "c": 2, "interference": "full"}"#);
    write(dir.path(), "w.csv", "0.9,0.1,0.3\n0.2,0.8,0.1\n");
    assert_eq!(bin(&["solve", "inst.json", "w.csv"], dir.path()).status.code(), Some(2));
    assert_eq!(bin(&["solve", "missing.json", "w.csv"], dir.path()).status.code(), Some(2));
    assert_eq!(bin(&["frobnicate"], dir.path()).status.code(), Some(2));
}

#[test]
fn project_prints_point_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "inst.json", r#"{"n": 2, "c": 2, "interference": "full"}"#);
    write(dir.path(), "t.csv", "1,1\n1,1\n");
    let out = bin(&["project", "inst.json", "t.csv"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let table = spectrum_bandit::formats::read_table(text.as_bytes()).unwrap();
    assert!(table.as_slice().iter().all(|v| (v - 0.25).abs() < 1e-12));
    assert!(text.contains("# iterations="));
}

#[test]
fn project_budget_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "inst.json", r#"{"n": 2, "c": 2, "interference": "full"}"#);
    write(dir.path(), "t.csv", "5,1\n1,1\n");
    let out = bin(&["project", "inst.json", "t.csv", "--max-iters", "3"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn lower_bound_single_link() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "inst.json", r#"{"n": 1, "c": 2, "interference": "full"}"#);
    write(dir.path(), "theta.csv", "0.5,0.25\n");
    let detailed = bin(&["lower-bound", "inst.json", "theta.csv"], dir.path());
    let aggregate = bin(&["lower-bound", "inst.json", "theta.csv", "--aggregate"], dir.path());
    let d: Value = serde_json::from_slice(&detailed.stdout).unwrap();
    let a: Value = serde_json::from_slice(&aggregate.stdout).unwrap();
    let dv = d["value"].as_f64().unwrap();
    assert!((dv - 1.7729).abs() < 1e-3, "{dv}");
    assert!((a["value"].as_f64().unwrap() - dv).abs() < 1e-9);
    assert_eq!(a["mode"], "aggregate");

    write(dir.path(), "big.json", r#"{"n": 4, "c": 2, "interference": "full"}"#);
    write(dir.path(), "big.csv", "0.5,0.2\n0.5,0.2\n0.5,0.2\n0.5,0.2\n");
    assert_eq!(bin(&["lower-bound", "big.json", "big.csv"], dir.path()).status.code(), Some(2));
}

#[test]
fn simulate_writes_traces_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "inst.json", r#"{"n": 2, "c": 2, "interference": "full"}"#);
    write(dir.path(), "theta.csv", "0.9,0.6\n0.6,0.9\n");
    write(
        dir.path(),
        "cfg.json",
        r#"{"instance": "inst.json", "environment": {"type": "stochastic", "theta": "theta.csv"},
            "policy": "ucb", "alpha": 2.6, "T": 2000, "replications": 3, "seed": 11, "output": "out"}"#,
    );
    let out = bin(&["simulate", "cfg.json"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out_dir = dir.path().join("out");
    for rep in 0..3 {
        let rows = read_trace(std::fs::File::open(out_dir.join(format!("trace_{rep}.csv"))).unwrap()).unwrap();
        assert_eq!(rows.len(), 2000);
        assert_eq!(rows.last().unwrap().t, 2000);
    }
    let s = summary(&out_dir);
    let ts: Vec<u64> = s["checkpoints"].as_array().unwrap().iter().map(|c| c["t"].as_u64().unwrap()).collect();
    assert_eq!(ts, [10, 100, 1000, 2000]);
    assert_eq!(s["completed"], 3);
    assert_eq!(s["flags"]["regret_bound"], true);
    assert_eq!(s["flags"]["precondition"], true);
    assert!((s["bounds"]["delta_min"].as_f64().unwrap() - 0.6).abs() < 1e-12);
    assert!(s["bounds"]["ucb_constant"].as_f64().unwrap() > 277.0);
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"instance": {"n": 3, "c": 3, "interference": "full"},
                  "environment": {"type": "periodic_random", "period": 2, "seed": 1},
                  "policy": "colorband1", "T": 300, "replications": 2, "seed": 4}"#;
    write(dir.path(), "cfg.json", cfg);
    for name in ["a", "b"] {
        let out = bin(&["simulate", "cfg.json", "--out", name], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["trace_0.csv", "trace_1.csv", "summary.json"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
    let t0 = std::fs::read(dir.path().join("a/trace_0.csv")).unwrap();
    let t1 = std::fs::read(dir.path().join("a/trace_1.csv")).unwrap();
    assert_ne!(t0, t1);
    let s = summary(&dir.path().join("a"));
    assert!(s["bounds"]["colorband1_bound"].as_f64().unwrap() > 0.0);
    assert_eq!(s["flags"]["rates_clamped"], false);
}

#[test]
fn failed_replications_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "cfg.json",
        r#"{"instance": {"n": 2, "c": 2, "interference": "full"},
            "environment": {"type": "constant", "table": [[0.5, 0.5], [0.5, 0.5]]},
            "policy": "colorband1", "eta": 4.0, "gamma": 0.1, "T": 10, "replications": 2}"#,
    );
    let out = bin(&["simulate", "cfg.json", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let s = summary(&dir.path().join("o"));
    assert_eq!(s["completed"], 0);
    assert_eq!(s["failures"].as_array().unwrap().len(), 2);
    assert_eq!(s["failures"][1]["rep"], 1);
    assert_eq!(s["flags"]["all_replications_completed"], false);
    assert!(!dir.path().join("o/trace_0.csv").exists());
}

#[test]
fn recorded_environment_replays_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut path = String::from("t,i,j,r\n");
    for t in 1..=20 {
        path.push_str(&format!("{t},1,1,0.25\n{t},1,2,0.75\n"));
    }
    write(dir.path(), "path.csv", &path);
    write(
        dir.path(),
        "cfg.json",
        r#"{"instance": {"n": 1, "c": 2, "interference": "full"},
            "environment": {"type": "recorded", "path": "path.csv"},
            "policy": "colorband1", "T": 20}"#,
    );
    let out = bin(&["simulate", "cfg.json", "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_trace(std::fs::File::open(dir.path().join("o/trace_0.csv")).unwrap()).unwrap();
    let regret = rows.last().unwrap().cum_regret;
    let plays_bad = rows.iter().filter(|r| r.config_id == "1").count() as f64;
    assert!((regret - 0.5 * plays_bad).abs() < 1e-9);

    write(dir.path(), "cfg.json", &std::fs::read_to_string(dir.path().join("cfg.json")).unwrap().replace("\"T\": 20", "\"T\": 21"));
    assert_eq!(bin(&["simulate", "cfg.json"], dir.path()).status.code(), Some(2));
}
