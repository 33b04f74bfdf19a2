use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mnl-bandit"));
    cmd.env("RUST_LOG", "warn");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn simple_config(out: &Path) -> String {
    format!(
        r#"{{
    "instance": {{"generator": {{"family": "uniform", "n": 5, "k": 2, "seed": 1}}}},
    "policies": [{{"name": "at_ducb"}}],
    "horizons": [2000],
    "seeds": [7],
    "output_dir": {:?}
}}"#,
        out
    )
}

#[test]
fn simulate_writes_one_trace_and_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), &simple_config(&out));
    let res = run(&["simulate", "--config", &config]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));

    let traces: Vec<_> = fs::read_dir(out.join("traces")).unwrap().collect();
    assert_eq!(traces.len(), 1);
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["groups"].as_array().unwrap().len(), 1);
    assert_eq!(summary["groups"][0]["runs"].as_array().unwrap().len(), 1);
    assert!(summary["provenance"]["config_hash"].is_string());
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), &simple_config(&out));
    assert!(run(&["simulate", "--config", &config]).status.success());
    let first = fs::read(out.join("summary.json")).unwrap();
    let res = bin()
        .env("MNL_BANDIT_WORKERS", "2")
        .args(["simulate", "--config", &config])
        .output()
        .unwrap();
    assert!(res.status.success());
    assert_eq!(first, fs::read(out.join("summary.json")).unwrap());
}

#[test]
fn config_errors_exit_with_two_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"instance": {"generator": {"family": "uniform", "n": 5, "k": 2}},
            "policies": [{"name": "at_ducb"}], "horizons": [], "seeds": [1]}"#,
    );
    let res = run(&["simulate", "--config", &config]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("horizons"));

    let missing = dir.path().join("nope.json");
    let res = run(&["sweep", "--config", missing.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));

    let bad_json = write_config(dir.path(), "{ not json");
    assert_eq!(run(&["simulate", "--config", &bad_json]).status.code(), Some(2));
}

#[test]
fn failing_run_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // ESUCB's default confidence 1/T is invalid at T = 1.
    let config = write_config(
        dir.path(),
        r#"{"instance": {"generator": {"family": "uniform", "n": 3, "k": 1, "seed": 0}},
            "policies": [{"name": "esucb"}, {"name": "at_ducb"}], "horizons": [1], "seeds": [0]}"#,
    );
    let res = run(&["simulate", "--config", &config]);
    assert_eq!(res.status.code(), Some(1));
    // Without an output directory the summary JSON goes to stdout ahead of the table.
    let stdout = String::from_utf8_lossy(&res.stdout);
    let json_end = stdout.find("\n}\n").expect("pretty-printed summary") + 2;
    let summary: Value = serde_json::from_str(&stdout[..json_end]).unwrap();
    assert_eq!(summary["failures"].as_array().unwrap().len(), 1);
}

#[test]
fn sweep_fits_scaling_per_policy() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(
        dir.path(),
        &format!(
            r#"{{"instance": {{"generator": {{"family": "uniform", "n": 4, "k": 2}}}},
                "policies": [{{"name": "at_ducb"}}],
                "horizons": [1024, 2048, 4096, 8192],
                "seeds": {{"base": 0, "count": 2}},
                "n_grid": [4, 6],
                "trace_mode": "summary",
                "output_dir": {:?}}}"#,
            out
        ),
    );
    let res = run(&["sweep", "--config", &config]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["groups"].as_array().unwrap().len(), 8);
    assert!(!summary["fits"].as_array().unwrap().is_empty());
}

#[test]
fn verify_passes_and_negative_control_fails() {
    let ok = run(&["verify"]);
    assert_eq!(ok.status.code(), Some(0));
    let text = String::from_utf8_lossy(&ok.stdout);
    assert_eq!(text.lines().filter(|l| l.contains("PASS")).count(), 4, "{text}");

    let bad = run(&["verify", "--corrupt-tie-break"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("optimizer_oracle     FAIL"));
}

#[test]
fn instance_gen_families() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lb.json");
    let res = run(&[
        "instance", "gen", "lb-perturbed", "--n", "24", "--k-item", "3", "--t1", "1", "--out",
        path.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let inst: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(inst["weights"][2], 0.5625);
    assert_eq!(inst["capacity"], 1);

    let res = run(&["instance", "gen", "uniform", "--n", "4", "--k", "2", "--seed", "9"]);
    let inst: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(inst["rewards"].as_array().unwrap().len(), 4);

    let res = run(&["instance", "gen", "lb-base", "--n", "3", "--capacity", "2"]);
    let inst: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(inst["weights"], serde_json::json!([0.5, 0.5, 0.5]));
    assert_eq!(inst["capacity"], 2);

    assert_eq!(run(&["instance", "gen", "lb-perturbed", "--n", "4"]).status.code(), Some(2));
    assert_eq!(run(&["instance", "gen", "uniform", "--n", "3", "--k", "5"]).status.code(), Some(2));
}
