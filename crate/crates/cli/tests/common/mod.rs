#![allow(dead_code)]

use infbend_cli::{run, Outcome};
use serde_json::Value;

/// Every catalog scene with the bendings that apply to it.
pub const CATALOG: &[(&str, &[&str])] = &[
    ("plane", &["zero", "killing:rot", "killing:v=1;2;3"]),
    ("cylinder", &["zero", "killing:rot", "killing:gen=0.3;-1;0.5", "circle_fourier:2", "circle_fourier:3"]),
    ("cylinder_r4", &["killing:rot", "normal_field", "normal_field:profile=wave", "circle_fourier:2"]),
    ("torus", &["killing:rot", "killing:gen=1;0.3;0;0.5;-1;0.7", "circle_fourier:2", "circle_fourier:2+circle_fourier:3,axis=1,offset=2"]),
    ("sphere", &["killing:rot", "killing:gen=0.2;1;-0.4"]),
    ("graph", &["killing:gen=0.3;-1;0.5,v=1;0;2"]),
    ("complex_graph", &["killing:gen=1;0.3;0;0.5;-1;0.7"]),
];

/// Scenes whose first normal spaces are not full everywhere.
pub const DEGENERATE_NORMAL: &[&str] = &["plane", "cylinder_r4"];

pub fn cli(args: &[&str]) -> Outcome {
    run(args.iter().copied())
}

pub fn json(args: &[&str]) -> (i32, Value) {
    let mut all = vec!["--json"];
    all.extend_from_slice(args);
    let out = cli(&all);
    assert!(out.code != 2, "{args:?}: {}", out.stderr);
    (out.code, serde_json::from_str(&out.stdout).unwrap())
}

/// Value of the named check in a JSON report.
pub fn check_value(report: &Value, name: &str) -> f64 {
    report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == name)
        .unwrap_or_else(|| panic!("no check {name} in {report}"))["value"]
        .as_f64()
        .unwrap()
}
