use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crownwave")).args(args).output().expect("binary runs")
}

fn run_env(args: &[&str], key: &str, val: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crownwave"))
        .args(args)
        .env(key, val)
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("bad json ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("crownwave-cli-{name}-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn hyp_eval_identity_case() {
    let out = run(&["hyp", "eval", "--n", "3", "--lambda", "0.5", "--z", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["command"], "hyp eval");
    assert_eq!(r["results"]["method"], "series");
    let v = &r["results"]["value"];
    assert!((v["re"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-14);
    assert_eq!(v["im"].as_f64().unwrap(), 0.0);
    for c in r["checks"].as_array().unwrap() {
        assert!(c["tolerance"].is_number());
    }
}

#[test]
fn config_echo_round_trips() {
    let out = run(&["hyp", "boundary", "--n", "4", "--lambda", "0+1.2i", "--x", "1.5", "--side", "minus"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let echoed = r["config"]["lambda"].as_str().unwrap().to_string();
    let again = run(&["hyp", "boundary", "--n", "4", "--lambda", &echoed, "--x", "1.5", "--side", "minus"]);
    assert_eq!(report(&again)["config"], r["config"]);
    assert_eq!(report(&again)["results"], r["results"]);
}

#[test]
fn flow_strip_has_constant_covector() {
    let out = run(&["wf", "flow", "--xi", "1,-1", "--T", "2", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), ["t", "v_0", "v_1", "xi_0", "xi_1"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert!(rows.len() > 2);
    for r in &rows {
        assert_eq!(r[3].parse::<f64>().unwrap(), 1.0);
        assert_eq!(r[4].parse::<f64>().unwrap(), -1.0);
    }
    assert_eq!(rows.last().unwrap()[0].parse::<f64>().unwrap(), 2.0);
}

#[test]
fn csv_schemas() {
    let out = run(&["kernel", "gram", "--n", "3", "--lambda", "0.5", "--count", "6", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("index,eigenvalue\n"));
    assert_eq!(text.lines().count(), 7);

    let out = run(&["wf", "predict", "--n", "2", "--kind", "psi", "--count", "5", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("base_0,base_1,xi_0,xi_1,kind\n"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",psi")));
}

#[test]
fn reports_are_deterministic() {
    let args = [
        "kernel",
        "gram",
        "--n",
        "2",
        "--lambda",
        "0.3i",
        "--count",
        "8",
        "--seed",
        "7",
        "--no-timing",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(report(&a)["wall_time_s"].is_null());
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["hyp", "eval", "--n", "3", "--lambda", "2.5", "--z", "0.5"]).status.code(), Some(2));
    assert_eq!(run(&["dist", "pair", "--dist", "nonsense"]).status.code(), Some(2));
    assert_eq!(run(&["hyp", "eval", "--z", "0.5", "--format", "csv"]).status.code(), Some(2));
    let missing = run_env(&["verify", "all", "--only", "12"], "CROWNWAVE_FIXTURES", "/nonexistent/crownwave");
    assert_eq!(missing.status.code(), Some(3));
    let bad_out = run(&["hyp", "eval", "--z", "0.5", "--out", "/nonexistent/dir/report.json"]);
    assert_eq!(bad_out.status.code(), Some(3));
}

#[test]
fn verify_refuses_tampered_fixtures() {
    let src = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/fixtures.json");
    let mut set: Value = serde_json::from_str(&std::fs::read_to_string(src).unwrap()).unwrap();
    set["records"][0]["provenance"] = Value::String(String::new());
    let dir = scratch("tampered");
    std::fs::write(dir.join("fixtures.json"), serde_json::to_string(&set).unwrap()).unwrap();
    let out = run_env(&["verify", "all", "--only", "12"], "CROWNWAVE_FIXTURES", dir.to_str().unwrap());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&out)["results"]["refused"], "fixture integrity failure");
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn verify_all_single_set_passes() {
    let out = run(&["verify", "all", "--n", "3", "--lambda", "0.5"]);
    let r = report(&out);
    let failed: Vec<&Value> = r["checks"].as_array().unwrap().iter().filter(|c| c["pass"] != true).collect();
    assert!(failed.is_empty(), "{failed:#?}");
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(r["results"].as_array().unwrap().len(), 12);
}

#[test]
fn fixtures_generate_writes_tagged_records() {
    let dir = scratch("generate");
    let out = run(&["fixtures", "generate", "--dir", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    assert_eq!(r["results"]["kinds"]["hyp2f1_oracle"], 800);
    let text = std::fs::read_to_string(dir.join("fixtures.json")).unwrap();
    let shipped = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/fixtures.json")).unwrap();
    assert_eq!(text, shipped);
    std::fs::remove_dir_all(dir).ok();
}
