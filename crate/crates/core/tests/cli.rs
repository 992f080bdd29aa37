mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::corpus;
use serde_json::Value;

fn hobn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hobn")).args(args).env_remove("HOBN_FUEL").output().expect("binary runs")
}

fn file(name: &str) -> String {
    corpus(name).to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(o: &Output) -> Value {
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("valid json")
}

#[test]
fn posterior_of_the_sprinkler() {
    let v = json(&hobn(&["infer", &file("sprinkler.hobn"), "--posterior", "--json"]));
    assert!((v["evidence"].as_f64().unwrap() - 0.69).abs() <= 5e-3);
    let table: Vec<f64> = v["posterior"]["table"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(table.iter().any(|p| (p - 0.48).abs() <= 5e-3));
    let text = stdout(&hobn(&["infer", &file("sprinkler.hobn"), "--posterior"]));
    assert!(text.contains("evidence: 0.687000"));
}

#[test]
fn cost_report_counts_multiplications() {
    let o = hobn(&["cost", &file("chain_t1.hobn")]);
    assert!(stdout(&o).contains("multiplications: 12"));
    let v = json(&hobn(&["cost", &file("chain_t2.hobn"), "--json"]));
    assert_eq!(v["multiplications"], 8);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.hobn");
    std::fs::write(&bad, "let x = in x").unwrap();
    let cases: [(Vec<String>, i32); 5] = [
        (vec!["parse".into(), bad.to_string_lossy().into()], 2),
        (vec!["type".into(), file("boolean.hobn")], 3),
        (vec!["reduce".into(), file("loop.hobn"), "--fuel".into(), "10".into()], 4),
        (vec!["infer".into(), file("impossible.hobn"), "--posterior".into()], 5),
        (vec!["parse".into(), dir.path().join("missing.hobn").to_string_lossy().into()], 1),
    ];
    for (args, code) in cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = hobn(&args);
        assert_eq!(o.status.code(), Some(code), "{args:?}");
        assert_eq!(String::from_utf8_lossy(&o.stderr).trim().lines().count(), 1, "{args:?}");
    }
}

#[test]
fn fuel_can_come_from_the_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_hobn")).args(["reduce", &file("loop.hobn")]).env("HOBN_FUEL", "10").output().unwrap();
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn zero_fuel_is_a_usage_error() {
    let o = hobn(&["reduce", &file("two_coins.hobn"), "--fuel", "0"]);
    assert_eq!(o.status.code(), Some(64));
}

#[test]
fn reduction_trace_ends_in_normal_form() {
    let text = stdout(&hobn(&["reduce", &file("two_coins.hobn"), "--trace"]));
    assert_eq!(text.matches("-->").count(), 3);
    assert!(text.trim_end().ends_with("steps: 3"));
}

#[test]
fn json_outputs_parse() {
    let t = json(&hobn(&["type", &file("rain_wet.hobn"), "--json"]));
    assert!(t.is_object());
    let g = json(&hobn(&["graph", &file("program1.hobn"), "--flow", "--json"]));
    assert!(g["edges"].is_array());
    let b = json(&hobn(&["graph", &file("program1.hobn"), "--bn", "--json"]));
    assert_eq!(b["nodes"].as_array().unwrap().len(), 4);
    let i = json(&hobn(&["infer", &file("coin_learning.hobn"), "--posterior", "--cost", "--json"]));
    assert!((i["evidence"].as_f64().unwrap() - 0.325).abs() <= 1e-12);
}

#[test]
fn derivation_json_is_accepted_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = hobn(&["type", &file("two_coins.hobn"), "--json"]);
    let v = json(&out);
    let derivation = v.get("derivation").cloned().unwrap_or(v);
    let path = dir.path().join("two_coins.json");
    std::fs::write(&path, serde_json::to_string(&derivation).unwrap()).unwrap();
    let o = hobn(&["type", &path.to_string_lossy()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let clash = hobn(&["type", &file("clashing_names.json")]);
    assert_eq!(clash.status.code(), Some(3));
}

#[test]
fn dot_export() {
    let text = stdout(&hobn(&["graph", &file("program1.hobn"), "--bn", "--dot", "-"]));
    assert!(text.starts_with("digraph"));
    assert_eq!(text.matches("->").count(), 4);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("flow.dot");
    let o = hobn(&["graph", &file("program1.hobn"), "--flow", "--dot", &out.to_string_lossy()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(std::fs::read_to_string(&out).unwrap().starts_with("digraph"));
}

fn suite(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["check", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    hobn(&args)
}

#[test]
fn empty_corpus_passes() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&suite(dir.path(), &["--random", "0", "--json"]));
    assert_eq!(v["programs"].as_array().unwrap().len(), 0);
}

#[test]
fn shipped_corpus_passes_and_is_deterministic() {
    let root = corpus("");
    let a = suite(&root, &["--random", "5", "--seed", "3", "--json"]);
    let b = suite(&root, &["--random", "5", "--seed", "3", "--json"]);
    let v = json(&a);
    assert_eq!(a.stdout, b.stdout);
    let clash = v["programs"].as_array().unwrap().iter().find(|p| p["name"] == "clashing_names.json").expect("fixture listed");
    assert!(clash["findings"].as_array().unwrap().iter().all(|f| f["ok"] == true));
}

#[test]
fn failing_program_fails_the_suite() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("wrong.hobn"), "# expect: type-error\nsample bern(0.5)\n").unwrap();
    let o = suite(dir.path(), &["--random", "0"]);
    assert_eq!(o.status.code(), Some(1));
}
