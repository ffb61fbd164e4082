use std::path::Path;
use std::process::{Command, Output};

use social_inverse::forward::SimulationTrace;
use social_inverse::graph::CombinationMatrix;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_social-inverse"))
        .args(args)
        .env_remove("SOCIAL_INVERSE_OUT")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write_config(dir: &Path, value: serde_json::Value) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, value.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

fn small_config(iterations: usize) -> serde_json::Value {
    serde_json::json!({
        "graph": {"n": 4, "p": 1.0, "seed": 0},
        "models": {"shared": {"family": "categorical", "pmfs": [[0.8, 0.2], [0.2, 0.8]]}, "n_agents": 4},
        "truths": {"majority": {"state": 0, "malicious": [3]}},
        "iterations": iterations,
        "inverse": {"step_mu": 0.02, "batch_m": 50},
        "trials": 4,
        "root_seed": 3
    })
}

#[test]
fn generate_graph_writes_left_stochastic_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let report = stdout_json(&cli(&[
        "generate-graph",
        "--n",
        "10",
        "--p",
        "0.2",
        "--seed",
        "1",
        "--out",
        out,
    ]));
    assert_eq!(report["strongly_connected"], true);
    for file in ["combination_matrix.csv", "combination_matrix.json"] {
        let a = CombinationMatrix::load(&dir.path().join(file)).unwrap();
        assert_eq!(a.n_agents(), 10);
        for col in a.weights().column_iter() {
            assert!((col.sum() - 1.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn two_agent_complete_graph_is_the_half_matrix() {
    let dir = tempfile::tempdir().unwrap();
    stdout_json(&cli(&[
        "generate-graph",
        "--n",
        "2",
        "--p",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]));
    let a = CombinationMatrix::load(&dir.path().join("combination_matrix.csv")).unwrap();
    assert!(a.weights().iter().all(|&x| x == 0.5));
}

#[test]
fn empty_graph_is_a_generation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&[
        "generate-graph",
        "--n",
        "5",
        "--p",
        "0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("strongly connected"));
}

#[test]
fn zero_iterations_give_an_empty_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), small_config(100));
    let out = dir.path().join("sim");
    let summary = stdout_json(&cli(&[
        "simulate",
        "--config",
        &cfg,
        "--iterations",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]));
    assert_eq!(summary["iterations"], 0);
    assert!(summary["learning_accuracy"].is_null());
    let trace = SimulationTrace::load(&out.join("trace.json")).unwrap();
    assert!(trace.is_empty());
    assert!(SimulationTrace::load(&out.join("trace.csv"))
        .unwrap()
        .is_empty());
}

#[test]
fn simulation_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), small_config(150));
    let mut payloads = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        stdout_json(&cli(&[
            "simulate",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
        ]));
        payloads.push((
            std::fs::read(out.join("trace.csv")).unwrap(),
            std::fs::read(out.join("trace.json")).unwrap(),
        ));
    }
    assert_eq!(payloads[0], payloads[1]);
    let text = String::from_utf8(payloads[0].0.clone()).unwrap();
    assert!(text.contains("# config_hash=") && text.contains("# seed=3"));
}

#[test]
fn seed_override_changes_the_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), small_config(50));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    stdout_json(&cli(&[
        "simulate",
        "--config",
        &cfg,
        "--out",
        a.to_str().unwrap(),
    ]));
    stdout_json(&cli(&[
        "simulate",
        "--config",
        &cfg,
        "--seed",
        "4",
        "--out",
        b.to_str().unwrap(),
    ]));
    assert_ne!(
        std::fs::read(a.join("trace.json")).unwrap(),
        std::fs::read(b.join("trace.json")).unwrap()
    );
}

#[test]
fn invert_reports_sets_and_needs_enough_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), small_config(1500));
    let sim = dir.path().join("sim");
    stdout_json(&cli(&[
        "simulate",
        "--config",
        &cfg,
        "--out",
        sim.to_str().unwrap(),
    ]));
    let trace = sim.join("trace.csv");
    let inv = dir.path().join("inv");
    let summary = stdout_json(&cli(&[
        "invert",
        "--trace",
        trace.to_str().unwrap(),
        "--config",
        &cfg,
        "--out",
        inv.to_str().unwrap(),
    ]));
    assert_eq!(summary["updates"], 1500 - 51);
    assert!(summary["a_error"].is_number());
    for f in [
        "estimates.json",
        "a_est.csv",
        "l_est.csv",
        "hypotheses.json",
        "diagnostics.csv",
    ] {
        assert!(inv.join(f).exists(), "{f} missing");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(inv.join("hypotheses.json")).unwrap())
            .unwrap();
    let agent = &report["agents"][0];
    for key in ["agent", "theta_set", "malicious_flag", "positive_counts"] {
        assert!(!agent[key].is_null(), "{key} missing");
    }

    let out = cli(&[
        "invert",
        "--trace",
        trace.to_str().unwrap(),
        "--batch-M",
        "5000",
        "--out",
        inv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("M+2"));
}

#[test]
fn experiment_reruns_are_identical_and_carry_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), small_config(400));
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let summary = stdout_json(&cli(&[
            "experiment",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
        ]));
        assert_eq!(summary["trials_succeeded"], 4);
        files.push((
            std::fs::read(out.join("metrics.json")).unwrap(),
            std::fs::read(out.join("trials.csv")).unwrap(),
        ));
    }
    assert_eq!(files[0], files[1]);
    assert!(String::from_utf8_lossy(&files[0].1).starts_with("# config_hash="));
}

#[test]
fn output_directory_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_social-inverse"))
        .args(["generate-graph", "--n", "3", "--p", "1"])
        .env("SOCIAL_INVERSE_OUT", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("combination_matrix.csv").exists());
}

#[test]
fn bound_sweep_scales_and_degenerate_models_have_no_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), small_config(100));
    let out = dir.path().join("b");
    let report = stdout_json(&cli(&[
        "bound",
        "--config",
        &cfg,
        "--sweep-M",
        "50,200,800",
        "--out",
        out.to_str().unwrap(),
    ]));
    let rows = report["rows"].as_array().unwrap();
    let b = |m: u64| {
        rows.iter()
            .find(|r| r["agent"] == 0 && r["batch_m"] == m)
            .unwrap()["bound"]
            .as_f64()
            .unwrap()
    };
    assert_eq!(b(50), 4.0 * b(200));
    assert_eq!(b(50), 16.0 * b(800));

    let mut degenerate = small_config(100);
    degenerate["models"] = serde_json::json!({
        "shared": {"family": "categorical", "pmfs": [[1.0], [1.0]]}, "n_agents": 4
    });
    degenerate["truths"] = serde_json::json!({"per_agent": [0, 0, 0, 0]});
    let cfg = write_config(dir.path(), degenerate);
    let report = stdout_json(&cli(&[
        "bound",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]));
    assert_eq!(report["trace_r"], 0.0);
    // identical hypotheses leave no wrong hypothesis to bound
    assert!(report["rows"].as_array().unwrap().is_empty());
    assert_eq!(report["skipped"].as_array().unwrap().len(), 8);
}

#[test]
fn invalid_config_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut bad = small_config(100);
    bad["delta"] = serde_json::json!(2.0);
    let cfg = write_config(dir.path(), bad);
    let out = cli(&[
        "experiment",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let missing = cli(&["simulate", "--config", "/nonexistent/config.json"]);
    assert_eq!(missing.status.code(), Some(2));
}
