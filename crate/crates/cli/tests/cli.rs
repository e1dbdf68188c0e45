use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hermtheta"))
        .args(args)
        .env_remove("HERM_THREADS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn vd_prints_canonical_data() {
    let out = run(&["vd", "--m", "5", "--d", "2"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!((v["alpha"].as_i64(), v["beta"].as_i64()), (Some(8), Some(1)));
    assert_eq!((v["gamma"].as_i64(), v["delta"].as_i64()), (Some(1), Some(1)));
    let one = json(&run(&["vd", "--m", "5", "--d", "1"]));
    assert_eq!(one["beta"].as_i64(), Some(0));
    assert!(!run(&["vd", "--m", "5", "--d", "3"]).status.success());
}

#[test]
fn degree_one_counts() {
    let v = json(&run(&["theta", "--m", "5", "--degree", "1", "--trace-bound", "2"]));
    assert_eq!(v["counts"], serde_json::json!([1, 240, 2160]));
}

#[test]
fn trace_bound_zero_has_one_entry() {
    let v = json(&run(&["theta", "--m", "6", "--trace-bound", "0"]));
    assert_eq!(v["entries"].as_array().unwrap().len(), 1);
}

#[test]
fn scaled_theta_tables_differ_for_a_bad_field() {
    let a = run(&["theta", "--m", "30", "--trace-bound", "2"]);
    let b = run(&["theta", "--m", "30", "--trace-bound", "2", "--ideal-d", "5"]);
    assert!(a.status.success() && b.status.success());
    assert_ne!(a.stdout, b.stdout);
    assert!(!run(&["theta", "--m", "30", "--trace-bound", "1", "--ideal-d", "7"]).status.success());
}

#[test]
fn classify_single_fields_and_cache_reuse() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let csv = dir.path().join("out.csv");
    let first = run(&["classify", "--m", "30", "--cache-dir", path(&cache), "--csv", path(&csv)]);
    assert!(first.status.success());
    let v = json(&first);
    assert_eq!(v["bad"], serde_json::json!([30]));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("m,d,isometric\n"));
    assert!(text.contains("30,5,false"));
    assert!(fs::read_dir(&cache).unwrap().count() >= 8);
    let second = run(&["classify", "--m", "30", "--cache-dir", path(&cache), "--jobs", "1"]);
    assert_eq!(first.stdout, second.stdout);
    let good = json(&run(&["classify", "--m", "5", "--no-cache"]));
    assert_eq!(good["good"], serde_json::json!([5]));
    assert!(!run(&["classify", "--m", "4", "--no-cache"]).status.success());
}

#[test]
fn isometry_reports_none_for_a_bad_divisor() {
    let v = json(&run(&["isometry", "--m", "30", "--d", "5"]));
    assert_eq!(v["witness"], "none");
    assert_eq!(v["isometric"], false);
    let v = json(&run(&["isometry", "--m", "5", "--d", "1"]));
    assert_eq!(v["isometric"], true);
}

#[test]
fn maass_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("krieg.json");
    let gen = run(&[
        "gen-krieg", "--m", "6", "--weight", "4", "--constant", "2/3", "--detd-bound", "30", "--trace-cap", "4",
        "--out", path(&table),
    ]);
    assert!(gen.status.success());
    assert_eq!(run(&["maass", "--table", path(&table)]).status.code(), Some(0));

    let mut doc: Value = serde_json::from_str(&fs::read_to_string(&table).unwrap()).unwrap();
    let entries = doc["entries"].as_array_mut().unwrap();
    let even = |v: &Value| v.as_i64().unwrap() % 2 == 0;
    let e = entries
        .iter_mut()
        .find(|e| e["k"].as_i64() > Some(0) && even(&e["k"]) && even(&e["l"]) && even(&e["tau"][0]) && even(&e["tau"][1]))
        .unwrap();
    e["value"] = Value::String("5".into());
    let bad = dir.path().join("bad.json");
    fs::write(&bad, serde_json::to_string(&doc).unwrap()).unwrap();
    let out = run(&["maass", "--table", path(&bad), "--checks", "sugano,krieg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!json(&out)["witnesses"].as_array().unwrap().is_empty());

    let theta = dir.path().join("theta.json");
    assert!(run(&["theta", "--m", "7", "--trace-bound", "4", "--out", path(&theta)]).status.success());
    let out = run(&["maass", "--table", path(&theta), "--checks", "sugano"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!json(&out)["sugano_unresolved"].as_array().unwrap().is_empty());
    let out = run(&["maass", "--table", path(&theta), "--checks", "sugano", "--theta-oracle"]);
    assert_eq!(out.status.code(), Some(0));

    let junk = dir.path().join("junk.json");
    fs::write(&junk, "{ not json").unwrap();
    assert_eq!(run(&["maass", "--table", path(&junk)]).status.code(), Some(1));
}
