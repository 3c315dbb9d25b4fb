use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use knn_opinion::harness::{run_scenario, ScenarioSpec};
use serde_json::Value;
use tempfile::TempDir;

fn knnop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_knnop"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const SPEC: &str = r#"{
  "name": "small run",
  "backend": "float",
  "model": {"knn": {"k": 3}},
  "initial": {"uniform_random": {"lo": 0, "hi": 1, "n": 8, "seed": 4}},
  "schedule": {"uniform_random": {"seed": 5}},
  "events": [{"step": 3, "add": {"value": 0.5}}]
}"#;

#[test]
fn simulate_writes_the_library_csv_and_sidecars() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "spec.json", SPEC);
    let prefix = dir.path().join("out/run");
    let out = knnop(&[
        "simulate",
        "--spec",
        &spec,
        "--out",
        prefix.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("out/run.csv")).unwrap();
    let expected = run_scenario(&ScenarioSpec::from_json(SPEC).unwrap()).unwrap();
    assert_eq!(csv, expected.trajectory.to_csv());
    let meta: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/run.json")).unwrap())
            .unwrap();
    assert_eq!(
        meta["csv_columns"],
        serde_json::json!(["step", "agent_id", "opinion"])
    );
    let svg = fs::read_to_string(dir.path().join("out/run.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 9);
    assert_eq!(stdout_json(&out)["steps"], meta["summary"]["steps"]);
}

#[test]
fn simulate_is_byte_reproducible_and_seed_sensitive() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "spec.json", SPEC);
    let run = |name: &str, seed: &str| {
        let prefix = dir.path().join(name);
        let out = knnop(&[
            "simulate",
            "--spec",
            &spec,
            "--out",
            prefix.to_str().unwrap(),
            "--seed",
            seed,
        ]);
        assert!(out.status.success());
        fs::read(dir.path().join(format!("{name}.csv"))).unwrap()
    };
    assert_eq!(run("a", "11"), run("b", "11"));
    assert_ne!(run("a", "11"), run("c", "12"));
}

#[test]
fn invalid_spec_exits_two_and_names_the_field() {
    let dir = TempDir::new().unwrap();
    let bad = SPEC.replace(r#""k": 3"#, r#""k": 30"#);
    let spec = write(dir.path(), "bad.json", &bad);
    let out = knnop(&["simulate", "--spec", &spec, "--out", "unused"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.knn.k"));

    let typo = SPEC.replace("\"schedule\"", "\"schedul\"");
    let spec = write(dir.path(), "typo.json", &typo);
    let out = knnop(&["simulate", "--spec", &spec, "--out", "unused"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schedul"));
}

#[test]
fn override_conflicting_with_the_model_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let spec = write(dir.path(), "spec.json", SPEC);
    let out = knnop(&["simulate", "--spec", &spec, "--out", "unused", "--d", "0.2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_exits_three() {
    let out = knnop(&["simulate", "--spec", "/nonexistent/spec.json", "--out", "x"]);
    assert_eq!(out.status.code(), Some(3));
    let out = knnop(&["classify", "--config", "/nonexistent/x.json", "--k", "2"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unknown_subcommand_exits_two() {
    assert_eq!(knnop(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn classify_reports_exact_non_clustered_equilibria() {
    let dir = TempDir::new().unwrap();
    let tie = write(dir.path(), "tie.json", r#"[0, 1, 0, 1, 0, 1, "1/2"]"#);
    let out = knnop(&["classify", "--config", &tie, "--k", "3", "--exact"]);
    assert!(out.status.success());
    let r = stdout_json(&out);
    assert_eq!(r["is_equilibrium"], true);
    assert_eq!(r["is_clustered"], false);
    assert_eq!(r["numerical"], false);

    let mut values = vec!["0"; 11];
    values.extend(["2/5"; 2]);
    values.extend(["3/5"; 2]);
    values.extend(["1"; 5]);
    let example = write(
        dir.path(),
        "example.json",
        &serde_json::to_string(&values).unwrap(),
    );
    let report_path = dir.path().join("report.json");
    let out = knnop(&[
        "classify",
        "--config",
        &example,
        "--k",
        "5",
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let r: Value = serde_json::from_str(&fs::read_to_string(report_path).unwrap()).unwrap();
    assert_eq!(r["is_equilibrium"], true);
    assert_eq!(r["is_clustered"], false);
    assert_eq!(r["cluster_sizes"], serde_json::json!([11, 2, 2, 5]));
}

#[test]
fn classify_snaps_float_input() {
    let dir = TempDir::new().unwrap();
    let x = write(
        dir.path(),
        "x.json",
        "[0.1, 0.1000000000001, 0.1, 0.7, 0.7, 0.7]",
    );
    let out = knnop(&["classify", "--config", &x, "--k", "3"]);
    assert!(out.status.success());
    let r = stdout_json(&out);
    assert_eq!(r["numerical"], true);
    assert_eq!(r["is_clustered"], true);
}

#[test]
fn verify_lemmas_passes_and_is_deterministic() {
    let a = knnop(&["verify-lemmas", "--seed", "3", "--trials", "2"]);
    let b = knnop(&["verify-lemmas", "--seed", "3", "--trials", "2"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let r = stdout_json(&a);
    assert_eq!(r["all_passed"], true);
    assert_eq!(r["checks"].as_array().unwrap().len(), 8);
    assert_eq!(
        knnop(&["verify-lemmas", "--trials", "0"]).status.code(),
        Some(2)
    );
}

#[test]
fn robustness_add_and_remove() {
    let dir = TempDir::new().unwrap();
    let add = write(
        dir.path(),
        "add.json",
        r#"{
          "k": 5,
          "base": {"clusters": [{"opinion": 0.4, "size": 10}]},
          "additions": [
            {"step": 2, "opinion": {"uniform": {"lo": 0, "hi": 1}}},
            {"step": 3, "opinion": {"uniform": {"lo": 0, "hi": 1}}}
          ],
          "event_seed": 1,
          "schedule_seed": 2,
          "abc_d": 0.25
        }"#,
    );
    let out = knnop(&["robustness", "add", "--spec", &add]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = stdout_json(&out);
    assert_eq!(r["knn"]["originals_untouched"], true);
    assert!(r["abc"].is_object());

    let remove = write(
        dir.path(),
        "remove.json",
        r#"{
          "backend": "exact",
          "k": 5,
          "base": {"clusters": [{"opinion": 0, "size": 6}, {"opinion": 1, "size": 5}]},
          "remove": 2
        }"#,
    );
    let out = knnop(&["robustness", "remove", "--spec", &remove]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = stdout_json(&out);
    assert_eq!(r["still_equilibrium"], true);
    assert_eq!(r["expected_equilibrium"], true);

    let not_clustered = write(
        dir.path(),
        "bad.json",
        r#"{"k": 5, "base": {"clusters": [{"opinion": 0, "size": 4}, {"opinion": 1, "size": 6}]}, "remove": 1}"#,
    );
    let out = knnop(&["robustness", "remove", "--spec", &not_clustered]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_counts_outcomes_independently_of_jobs() {
    let dir = TempDir::new().unwrap();
    let grid = write(
        dir.path(),
        "grid.json",
        r#"{
          "template": {
            "backend": "float",
            "model": {"knn": {"k": 4}},
            "initial": {"uniform_random": {"lo": 0, "hi": 1, "n": 7, "seed": 1}},
            "schedule": {"uniform_random": {"seed": 1}},
            "record": {"snapshot_every": 0}
          },
          "replicates": 6
        }"#,
    );
    let one = knnop(&["sweep", "--grid", &grid, "--jobs", "1"]);
    let two = knnop(&["sweep", "--grid", &grid, "--jobs", "2"]);
    assert!(
        one.status.success(),
        "{}",
        String::from_utf8_lossy(&one.stderr)
    );
    assert_eq!(one.stdout, two.stdout);
    let r = stdout_json(&one);
    assert_eq!(r["scenarios"], 6);
    assert_eq!(r["counts"]["consensus"], 6);
}

#[test]
fn figures_are_written() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("figs");
    let out = knnop(&["figures", "--out", out_dir.to_str().unwrap()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for id in ["fig1", "fig2", "fig3_knn", "fig3_abc"] {
        for ext in ["csv", "json", "svg"] {
            assert!(out_dir.join(format!("{id}.{ext}")).is_file(), "{id}.{ext}");
        }
    }
    let r = stdout_json(&out);
    assert_eq!(r["fig3_knn_originals_constant"], true);
    assert_eq!(r["fig3_abc_originals_changed"], true);
    assert_eq!(r["runs"][1]["limit"], "non_clustered");
    assert!(out_dir.join("figures.json").is_file());
}
