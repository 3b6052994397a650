use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_minimax-cert")).args(args).output().expect("spawn minimax-cert")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn stationary_point_exits_zero() {
    let out = run(&["verify", "--problem", "quadratic-5xy", "--point", "0,0", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(report["verb"], "verify");
    assert_eq!(report["passed"], true);
}

#[test]
fn failing_condition_exits_one() {
    let out = run(&["verify", "--problem", "xy-cos", "--point", "0,3.14159265", "--order", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("gs2-1"), "{text}");
}

#[test]
fn bad_input_exits_two() {
    assert_eq!(run(&["verify", "--problem", "no-such-example", "--point", "0,0"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--problem", "quadratic-5xy", "--point", "3,0"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--problem", "quadratic-5xy", "--point", "0"]).status.code(), Some(2));
    assert_eq!(run(&["gan-certify", "--instance", "/nonexistent/instance.bin", "--solve"]).status.code(), Some(2));
}

#[test]
fn examples_are_listed() {
    let out = run(&["examples", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let ids: Vec<String> =
        json(&out).as_array().unwrap().iter().map(|e| e["id"].as_str().unwrap().to_string()).collect();
    assert_eq!(ids.len(), 6);
    for id in ["quadratic-5xy", "xy-cos", "relu-net-F", "nonsmooth-935", "quartic-4x2y2", "gan-saa"] {
        assert!(ids.iter().any(|i| i == id), "missing {id}");
    }
}

#[test]
fn gap_report_matches_closed_form() {
    let out = run(&["gap", "--problem", "quadratic-5xy", "--delta", "0.5", "--json"]);
    let gap = json(&out)["gap"].as_f64().unwrap();
    assert!((gap + 0.25).abs() <= 1e-3, "{gap}");
}

#[test]
fn classify_reports_labels() {
    let out = run(&["classify", "--problem", "xy-cos", "--point", "0,3.14159265", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let labels = json(&out)["classification"]["labels"].clone();
    assert!(labels.as_array().unwrap().iter().any(|l| l == "global-minimax"), "{labels}");
}

#[test]
fn custom_box_sets_are_accepted() {
    let out = run(&[
        "verify", "--problem", "quadratic-5xy", "--x-set", "-2,2", "--y-set", "-2,2", "--point", "1.5,0", "--json",
    ]);
    assert_ne!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn repeated_runs_are_identical() {
    let args = ["verify", "--problem", "nonsmooth-935", "--point", "0,0", "--seed", "11", "--json"];
    assert_eq!(run(&args).stdout, run(&args).stdout);
}
