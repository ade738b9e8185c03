use frv::suites::report_schema_version;
use serde_json::Value;
use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

fn frv(args: &[&str], threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frv")).args(args).env("FRV_THREADS", threads).output().expect("frv runs")
}

fn run_in(dir: &Path, extra: &[&str]) -> Output {
    let out = dir.to_str().unwrap();
    let mut args = vec!["run", "--out", out];
    args.extend_from_slice(extra);
    frv(&args, "1")
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, r#"{"draws": 2, "relation_draws": 2, "seed": 11, "grid": [0.1, [0.3, 0.05]]}"#).unwrap();
    path.to_str().unwrap().to_string()
}

fn records(dir: &Path) -> Vec<Value> {
    std::fs::read_to_string(dir.join("reports.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn report_format_matches_the_golden_file() {
    let golden: Value = serde_json::from_str(include_str!("golden/report_format.json")).unwrap();
    assert_eq!(report_schema_version(), golden["schema"]);
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let status = run_in(&out, &["--config", &cfg, "--suite", "calibrate", "--suite", "scan"]);
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
    let allowed: BTreeSet<String> =
        golden["record_keys"].as_array().unwrap().iter().map(|k| k.as_str().unwrap().to_string()).collect();
    for r in records(&out) {
        assert_eq!(r["schema"], golden["schema"]);
        let keys: BTreeSet<String> = r.as_object().unwrap().keys().cloned().collect();
        let mut expected = allowed.clone();
        if !keys.contains("components") {
            expected.remove("components");
        }
        assert_eq!(keys, expected);
        assert!(matches!(r["verdict"].as_str(), Some("pass" | "fail")));
    }
    let first = |name: &str| std::fs::read_to_string(out.join(name)).unwrap().lines().next().unwrap().to_string();
    assert_eq!(first("summary.csv"), golden["summary_header"].as_str().unwrap());
    assert_eq!(first("scan.csv"), golden["scan_header"].as_str().unwrap());
}

#[test]
fn algebra_checks_on_defaults_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["--suite", "algebra-checks"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let recs = records(dir.path());
    assert!(!recs.is_empty());
    assert!(recs.iter().all(|r| r["suite"] == "algebra-checks" && r["verdict"] == "pass"));
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), recs.len() + 1);
}

#[test]
fn relations_on_three_sites() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let status = run_in(&out, &["--config", &cfg, "--suite", "relations", "--L", "3"]);
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
    let recs = records(&out);
    let ids: BTreeSet<&str> = recs.iter().map(|r| r["relation_id"].as_str().unwrap()).collect();
    for id in ["tq", "tq_bar", "tt", "wronskian", "factorization", "tq_general", "shifted_q", "character"] {
        assert!(ids.contains(id), "{id} missing from {ids:?}");
    }
    assert!(recs.iter().filter(|r| r["relation_id"] == "tq").all(|r| r["parameters"]["L"] == 3));
    // indices run in order within the suite
    for (i, r) in recs.iter().enumerate() {
        assert_eq!(r["index"].as_u64(), Some(i as u64));
    }
}

#[test]
fn scan_over_forty_one_points() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, r#"{"dump_operators": true}"#).unwrap();
    let out = dir.path().join("out");
    let status = run_in(&out, &["--config", cfg.to_str().unwrap(), "--suite", "scan", "--grid", "0:2:41"]);
    assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
    let mut rdr = csv::Reader::from_path(out.join("scan.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    // three operators with four eigenvalues each at every point
    assert_eq!(rows.len(), 41 * 3 * 4);
    let us: BTreeSet<String> = rows.iter().map(|r| r[2].to_string()).collect();
    assert_eq!(us.len(), 41);
    assert_eq!(records(&out).len(), 2 * 41);
    let dumped = std::fs::read_dir(out.join("operators")).unwrap().count();
    assert_eq!(dumped, 3 * 41);
    let t1: Value = serde_json::from_str(&std::fs::read_to_string(out.join("operators/T1_L2_007.json")).unwrap()).unwrap();
    let rows = t1.as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.as_array().unwrap().len() == 4));
}

#[test]
fn failing_verdicts_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let status = run_in(&out, &["--config", &cfg, "--suite", "relations", "--tol", "1e-300"]);
    assert_eq!(status.status.code(), Some(1));
    assert!(records(&out).iter().any(|r| r["verdict"] == "fail"));
}

#[test]
fn invalid_configurations_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"hbar_re": 0.0, "hbar_im": 0.0}"#).unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    for args in [
        vec!["run", "--suite", "everything", "--out", out],
        vec!["run", "--grid", "0:1", "--out", out],
        vec!["run", "--L", "9", "--out", out],
        vec!["run", "--n-max", "1", "--out", out],
        vec!["run", "--config", missing.to_str().unwrap(), "--out", out],
        vec!["run", "--config", bad.to_str().unwrap(), "--out", out],
        vec!["run", "--bogus"],
        vec![],
    ] {
        let status = frv(&args, "1");
        assert_eq!(status.status.code(), Some(2), "{args:?}");
    }
    assert!(!Path::new(out).exists());
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let suites = ["--suite", "rmatrix", "--suite", "traces", "--suite", "calibrate", "--suite", "relations"];
    let mut outputs = Vec::new();
    for (k, threads) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("out{k}"));
        let mut args = vec!["run", "--config", &cfg, "--out", out.to_str().unwrap()];
        args.extend_from_slice(&suites);
        let status = frv(&args, threads);
        assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
        outputs.push(out);
    }
    for name in ["reports.jsonl", "summary.csv"] {
        let a = std::fs::read(outputs[0].join(name)).unwrap();
        let b = std::fs::read(outputs[1].join(name)).unwrap();
        assert!(a == b, "{name} differs");
    }
    let recs = records(&outputs[0]);
    let suites_in_order: Vec<&str> = recs.iter().map(|r| r["suite"].as_str().unwrap()).collect();
    let mut dedup = suites_in_order.clone();
    dedup.dedup();
    assert_eq!(dedup, ["rmatrix", "traces", "calibrate", "relations"]);
}
