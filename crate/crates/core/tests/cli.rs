use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ate_match(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ate-match"))
        .args(args)
        .env("ATE_MATCH_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn write_toy(dir: &Path) -> String {
    let path = dir.join("toy.csv");
    std::fs::write(&path, "x1,d,y\n0.1,1,1\n0.2,0,0\n0.4,1,2\n0.9,0,1\n").unwrap();
    path.to_string_lossy().into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr_error(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str::<Value>(text.trim()).expect("error object on stderr")["error"].clone()
}

#[test]
fn estimate_toy_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_toy(dir.path());
    let out_path = dir.path().join("r.json");
    let out = ate_match(&[
        "estimate", "--input", &input, "--matches", "1", "--method", "covariate",
        "--regressor", "knn", "--output", out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&out_path);
    assert_eq!(report["result"]["estimate"]["tau_hat"], 1.25);
    assert_eq!(report["config"]["matches"], 1);
    assert!(report["meta"]["version"].is_string());
}

#[test]
fn missing_input_names_the_flag() {
    let out = ate_match(&["estimate", "--matches", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_error(&out)["flag"], "--input");
}

#[test]
fn domain_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_toy(dir.path());
    let out = ate_match(&["estimate", "--input", &input, "--matches", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_error(&out);
    assert_eq!(err["kind"], "insufficient_units");
    assert_eq!(err["flag"], "--matches");

    let out = ate_match(&["estimate", "--input", &input, "--matches", "1", "--regressor", "oracle"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_error(&out)["flag"], "--dgp");

    let out = ate_match(&["bounds", "--n", "100", "--matches", "2", "--dim", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_error(&out)["flag"], "--eta");
}

#[test]
fn simplified_bound_report() {
    let out = ate_match(&[
        "bounds", "--n", "10000", "--matches", "8", "--eta", "0.45", "--p", "1", "--dim", "1",
        "--mode", "covariate-simplified",
    ]);
    assert!(out.status.success());
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let terms = report["result"]["bounds"]["b_terms"].as_array().unwrap();
    let b1 = terms.iter().find(|t| t["name"] == "B1'").unwrap()["value"].as_f64().unwrap();
    let want = 8f64.powf(40.0 / 9.0) / 100.0;
    assert!((b1 - want).abs() < 1e-12 * want);
}

fn strip_meta(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("meta");
    v
}

#[test]
fn reruns_are_bit_identical_apart_from_meta() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sample.csv");
    let dgp = ate_match_core::simlab::Dgp::linear_1d();
    ate_match_core::simlab::generate(&dgp, 150, 4).unwrap().write_csv(&csv).unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = ate_match(&[
            "bootstrap", "--input", csv.to_str().unwrap(), "--matches", "2", "--replicates", "500",
            "--seed", "9", "--output", path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let mut v = read_json(&path);
        v["config"].as_object_mut().unwrap().remove("output");
        strip_meta(v)
    };
    assert_eq!(run("a.json"), run("b.json"));

    let sim = || {
        let out = ate_match(&[
            "simulate", "--experiment", "kolmogorov", "--dgp", "homogeneous", "--n", "100,200",
            "--matches", "n^0.25", "--reps", "100", "--seed", "3",
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        strip_meta(serde_json::from_slice(&out.stdout).unwrap())
    };
    let a = sim();
    assert_eq!(a, sim());
    assert_eq!(a["result"]["values"].as_array().unwrap().len(), 2);
}

#[test]
fn rank_method_runs_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("q.csv");
    let dgp = ate_match_core::simlab::Dgp::quadratic_2d();
    ate_match_core::simlab::generate(&dgp, 120, 1).unwrap().write_csv(&csv).unwrap();
    let out = ate_match(&["estimate", "--input", csv.to_str().unwrap(), "--matches", "2", "--method", "rank"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["result"]["estimate"]["method"], "rank");
}
