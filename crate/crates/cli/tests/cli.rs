use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn model(name: &str) -> String {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models");
    root.join(name).to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ckstab")).args(args).output().expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

#[test]
fn explosive_model_exits_two() {
    let o = run(&["analyze", "--model", &model("example3.json")]);
    assert_eq!(o.status.code(), Some(2));
    let v = stdout_json(&o);
    assert_eq!(v["schema"], 1);
    assert_eq!(v["verdict"]["status"], "explosive_evidence");
    let lower = v["methods"]["jsr"]["lower"].as_f64().unwrap();
    assert!(lower > 1.0);
    assert!(v["methods"]["jsr"]["witness"]["lower"].is_array());
}

#[test]
fn stable_linear_model_exits_zero() {
    let o = run(&["analyze", "--model", &model("linear_stable.json"), "--method", "jsr"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert!(v["methods"]["jsr"]["upper_certified"].as_f64().unwrap() < 1.0);
    assert!(v["methods"].get("cjsr").is_none());
}

#[test]
fn csv_output_has_one_row_per_method() {
    let o = run(&["analyze", "--model", &model("table2_row5.json"), "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("method,lower,upper_norm,upper_certified,depth,degree,verdict"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn bad_inputs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{").unwrap();
    let o = run(&["analyze", "--model", broken.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    let text = std::fs::read_to_string(model("linear_stable.json")).unwrap();
    let mut v: Value = serde_json::from_str(&text).unwrap();
    v.as_object_mut().unwrap().remove("sigma");
    let missing = dir.path().join("missing.json");
    std::fs::write(&missing, v.to_string()).unwrap();
    let o = run(&["analyze", "--model", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sigma"));

    assert_eq!(run(&["analyze", "--model", &model("example3.json"), "--degree", "3"]).status.code(), Some(1));
    assert_eq!(run(&["analyze", "--model", &model("example3.json"), "--tol", "0"]).status.code(), Some(1));
    assert_eq!(run(&["simulate", "--model", &model("example3.json"), "--horizon", "10"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn canonical_model_maps_to_itself() {
    let o = run(&["canonicalize", "--model", &model("example3.json")]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    for (key, n) in [("P", 4), ("Q", 3)] {
        let m = v[key].as_array().unwrap();
        assert_eq!(m.len(), n);
        for (i, row) in m.iter().enumerate() {
            for (j, x) in row.as_array().unwrap().iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((x.as_f64().unwrap() - want).abs() < 1e-12, "{key}[{i}][{j}]");
            }
        }
    }
}

#[test]
fn simulation_writes_the_requested_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("path.csv");
    let o = run(&[
        "simulate", "--model", &model("example3.json"), "--horizon", "400", "--seed", "1", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let mut r = csv::Reader::from_path(&out).unwrap();
    let header = r.headers().unwrap().clone();
    assert_eq!(&header[0], "t");
    assert_eq!(&header[1], "y");
    let ys: Vec<f64> = r.records().map(|rec| rec.unwrap()[1].parse().unwrap()).collect();
    assert_eq!(ys.len(), 400);
    let flips = ys.windows(2).filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0)).count();
    assert!(flips > 100, "{flips}");

    let again = run(&["simulate", "--model", &model("example3.json"), "--horizon", "400", "--seed", "1"]);
    assert_eq!(again.stdout, std::fs::read(&out).unwrap());
}

#[test]
fn skeleton_scan_reports_contraction() {
    let o = run(&[
        "skeleton", "--model", &model("table2_row5.json"), "--seed", "3", "--grid", "300", "--steps", "80",
        "--ratio", "0.99",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert_eq!(v["scan"]["verdict"], "contracting");
}

#[test]
fn skeleton_path_from_initial_lags() {
    let o = run(&[
        "skeleton", "--model", &model("example3.json"), "--seed", "1", "--init", "1,1,1", "--horizon", "50",
        "--format", "csv",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 51);
    let o = run(&["skeleton", "--model", &model("example3.json"), "--seed", "1", "--init", "1,1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reproduction_is_deterministic() {
    let a = run(&["reproduce", "table1"]);
    let b = run(&["reproduce", "table1"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("chi,theta,psi,paper_value,computed,match"));
    assert!(text.trim_end().ends_with("9/9"));
}
