//! File-producing operations behind each CLI subcommand.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::digest::config_hash;
use crate::error::{Error, Result};
use crate::forward::{read_public_stream, run_simulation, RecordOptions, SimulationTrace};
use crate::graph::{generate_erdos_renyi, is_strongly_connected, perron_vector};
use crate::inverse::{
    cosmetic_left_stochastic, estimate_trace_r, expected_log_ratio, run_inverse,
    wrong_hypothesis_bound, GroundTruth, InverseConfig, InverseOutcome, RunOptions,
    RESIDUAL_ORDERS,
};
use crate::rows::to_rows;

use super::{run_experiment, Experiment, MetricsReport};

const PERRON_TOL: f64 = 1e-13;

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Config(format!("cannot create output dir {}: {e}", dir.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn write_matrix_csv(path: &Path, hash: &str, seed: u64, m: &nalgebra::DMatrix<f64>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# config_hash={hash}")?;
    writeln!(out, "# seed={seed}")?;
    let mut w = csv::Writer::from_writer(out);
    for row in m.row_iter() {
        w.write_record(row.iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphReport {
    pub config_hash: String,
    pub seed: u64,
    pub n: usize,
    pub p: f64,
    pub strongly_connected: bool,
    pub self_loops: bool,
    pub perron: Vec<f64>,
    /// `‖A u − u‖_∞`.
    pub perron_residual: f64,
    pub most_central: usize,
}

/// Writes `combination_matrix.csv`, `combination_matrix.json` and `graph_report.json`.
pub fn cmd_generate_graph(n: usize, p: f64, seed: u64, out: &Path) -> Result<GraphReport> {
    let a = generate_erdos_renyi(n, p, seed)?;
    let u = perron_vector(&a, PERRON_TOL)?;
    let residual = (a.weights() * u.entries() - u.entries()).amax();
    let hash = config_hash(&serde_json::json!({"n": n, "p": p, "seed": seed}));
    create_dir(out)?;
    let mut csv_out =
        std::io::BufWriter::new(std::fs::File::create(out.join("combination_matrix.csv"))?);
    a.write_csv(&mut csv_out)?;
    csv_out.flush()?;
    write_json(&out.join("combination_matrix.json"), &a.to_json())?;
    let report = GraphReport {
        config_hash: hash,
        seed,
        n,
        p,
        strongly_connected: is_strongly_connected(&a),
        self_loops: (0..n).all(|k| a.weights()[(k, k)] > 0.0),
        perron: u.as_slice().to_vec(),
        perron_residual: residual,
        most_central: a.most_central(),
    };
    write_json(&out.join("graph_report.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub config_hash: String,
    pub root_seed: u64,
    pub simulation_seed: u64,
    pub delta: f64,
    pub iterations: usize,
    pub truths: Vec<usize>,
    pub reference: Vec<usize>,
    pub malicious: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub iterations: usize,
    pub final_argmax: Vec<usize>,
    pub final_tie: Vec<bool>,
    /// Over the trailing accuracy window; absent for an empty run.
    pub learning_accuracy: Option<f64>,
}

/// Simulates the first trial of `exp`. Writes `trace.csv`, `trace.json`,
/// `combination_matrix.csv` and `run.json`; the trace metadata carries the experiment
/// hash and root seed.
pub fn cmd_simulate(exp: &Experiment, out: &Path) -> Result<SimulateSummary> {
    let cfg = &exp.config;
    let setup = exp.trial_setup(0)?;
    let mut trace = run_simulation(
        &setup.graph,
        &exp.models,
        &setup.truths,
        cfg.delta,
        cfg.iterations,
        setup.simulation_seed,
        RecordOptions::default(),
    )?;
    trace.metadata.config_hash = exp.config_hash.clone();
    trace.metadata.seed = cfg.root_seed;
    create_dir(out)?;
    trace.save(&out.join("trace.csv"))?;
    trace.save(&out.join("trace.json"))?;
    let mut m = std::io::BufWriter::new(std::fs::File::create(out.join("combination_matrix.csv"))?);
    setup.graph.write_csv(&mut m)?;
    m.flush()?;
    write_json(
        &out.join("run.json"),
        &RunInfo {
            config_hash: exp.config_hash.clone(),
            root_seed: cfg.root_seed,
            simulation_seed: setup.simulation_seed,
            delta: cfg.delta,
            iterations: cfg.iterations,
            truths: setup.truths.clone(),
            reference: setup.reference.clone(),
            malicious: setup.malicious.clone(),
        },
    )?;
    let last = trace.steps.last();
    let window = &trace.steps[trace.len().saturating_sub(cfg.accuracy_window)..];
    let learning_accuracy = (!window.is_empty()).then(|| {
        let hits: usize = window
            .iter()
            .map(|s| {
                s.estimates
                    .iter()
                    .zip(&setup.agent_truths)
                    .filter(|(e, t)| t.optimal_set.contains(&e.index))
                    .count()
            })
            .sum();
        hits as f64 / (window.len() * exp.n_agents()) as f64
    });
    Ok(SimulateSummary {
        iterations: trace.len(),
        final_argmax: last.map_or_else(Vec::new, |s| s.estimates.iter().map(|e| e.index).collect()),
        final_tie: last.map_or_else(Vec::new, |s| s.estimates.iter().map(|e| e.tie).collect()),
        learning_accuracy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentReport {
    pub agent: usize,
    pub theta_set: Vec<usize>,
    pub malicious_flag: bool,
    pub positive_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub config_hash: String,
    pub seed: u64,
    pub reference: Vec<usize>,
    pub agents: Vec<AgentReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatesFile {
    pub config_hash: String,
    pub seed: u64,
    pub delta: f64,
    pub a_est: Vec<Vec<f64>>,
    /// Clipped to `[0, 1]` with renormalized columns; for display only.
    pub a_est_cosmetic: Vec<Vec<f64>>,
    pub l_est: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertSummary {
    pub iterations_consumed: usize,
    pub updates: usize,
    pub converged: bool,
    pub flagged: Vec<usize>,
    pub sets: Vec<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_error: Option<f64>,
}

pub struct InvertArgs<'a> {
    /// `.csv` or `.json` trace, or `.jsonl` stream of public beliefs.
    pub input: PathBuf,
    pub inverse: InverseConfig,
    /// Required for streams, which carry no metadata.
    pub delta: Option<f64>,
    /// Ground truth and reference states come from this experiment's first trial.
    pub experiment: Option<&'a Experiment>,
    pub out: PathBuf,
}

/// Writes `estimates.json`, `a_est.csv`, `l_est.csv`, `hypotheses.json` and
/// `diagnostics.csv`.
pub fn cmd_invert(args: &InvertArgs) -> Result<InvertSummary> {
    let is_stream = args.input.extension().and_then(|e| e.to_str()) == Some("jsonl");
    let (trace, metadata_delta) = if is_stream {
        (None, None)
    } else {
        let trace = SimulationTrace::load(&args.input)?;
        let d = trace.metadata.delta;
        (Some(trace), Some(d))
    };
    let delta = args
        .delta
        .or(metadata_delta)
        .ok_or_else(|| Error::Config("a belief stream carries no metadata; pass --delta".into()))?;
    let config = InverseConfig {
        delta,
        ..args.inverse.clone()
    };
    let mut options = RunOptions::default();
    if let Some(exp) = args.experiment {
        let setup = exp.trial_setup(0)?;
        options.ground_truth = Some(GroundTruth {
            a: setup.graph.weights().clone(),
            expected: expected_log_ratio(&exp.models, &setup.truths)?,
        });
        options.reference_states = Some(setup.reference);
    }
    let (outcome, source_hash, seed): (InverseOutcome, String, u64) = match trace {
        Some(t) => (
            run_inverse(t.public_beliefs()?, &config, &options)?,
            t.metadata.config_hash.clone(),
            t.metadata.seed,
        ),
        None => {
            let file = std::fs::File::open(&args.input)?;
            let reader = std::io::BufReader::new(file);
            let beliefs = read_public_stream(reader).collect::<Result<Vec<_>>>()?;
            (run_inverse(beliefs, &config, &options)?, String::new(), 0)
        }
    };
    let hash = config_hash(&(source_hash, &config));
    create_dir(&args.out)?;
    write_json(
        &args.out.join("estimates.json"),
        &EstimatesFile {
            config_hash: hash.clone(),
            seed,
            delta,
            a_est: to_rows(&outcome.a_est),
            a_est_cosmetic: to_rows(&cosmetic_left_stochastic(&outcome.a_est)),
            l_est: to_rows(&outcome.l_est),
        },
    )?;
    write_matrix_csv(&args.out.join("a_est.csv"), &hash, seed, &outcome.a_est)?;
    write_matrix_csv(&args.out.join("l_est.csv"), &hash, seed, &outcome.l_est)?;
    let est = &outcome.hypotheses;
    write_json(
        &args.out.join("hypotheses.json"),
        &HypothesisReport {
            config_hash: hash.clone(),
            seed,
            reference: est.reference.clone(),
            agents: (0..est.sets.len())
                .map(|k| AgentReport {
                    agent: k,
                    theta_set: est.sets[k].clone(),
                    malicious_flag: est.malicious[k],
                    positive_counts: est.positive_counts[k].clone(),
                })
                .collect(),
        },
    )?;
    let diag = &outcome.diagnostics;
    let mut out = std::io::BufWriter::new(std::fs::File::create(args.out.join("diagnostics.csv"))?);
    writeln!(out, "# config_hash={hash}")?;
    writeln!(out, "# seed={seed}")?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["update", "a_change"];
    if diag.a_error.is_some() {
        header.extend(["a_error", "l_error"]);
    }
    w.write_record(&header)?;
    for (u, change) in diag.a_change.iter().enumerate() {
        let mut rec = vec![(u + 1).to_string(), change.to_string()];
        if let (Some(ae), Some(le)) = (&diag.a_error, &diag.l_error) {
            rec.push(ae[u].to_string());
            rec.push(le[u].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(InvertSummary {
        iterations_consumed: diag.iterations_consumed,
        updates: diag.a_change.len(),
        converged: diag.converged,
        flagged: (0..est.sets.len()).filter(|&k| est.malicious[k]).collect(),
        sets: est.sets.clone(),
        a_error: diag.a_error.as_ref().and_then(|v| v.last().copied()),
        l_error: diag.l_error.as_ref().and_then(|v| v.last().copied()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub agent: usize,
    pub wrong_hypothesis: usize,
    pub batch_m: usize,
    pub bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical_frequency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPair {
    pub agent: usize,
    pub hypothesis: usize,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub config_hash: String,
    pub root_seed: u64,
    pub trace_r: f64,
    pub residual_orders: String,
    pub rows: Vec<BoundRow>,
    pub skipped: Vec<SkippedPair>,
}

pub struct BoundArgs<'a> {
    pub experiment: &'a Experiment,
    pub batch_ms: Vec<usize>,
    /// Metrics from `experiment`; its frequencies are attached to rows with the same `M`.
    pub metrics: Option<PathBuf>,
    pub out: PathBuf,
}

/// Writes `bounds.json` and `bounds.csv`.
pub fn cmd_bound(args: &BoundArgs) -> Result<BoundReport> {
    let exp = args.experiment;
    let setup = exp.trial_setup(0)?;
    let trace_r = estimate_trace_r(
        &exp.models,
        &setup.truths,
        exp.config.trace_r_samples,
        exp.config.root_seed,
    )?;
    let metrics: Option<MetricsReport> = match &args.metrics {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            Some(serde_json::from_str(&text)?)
        }
        None => None,
    };
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (k, (model, &t)) in exp.models.iter().zip(&setup.truths).enumerate() {
        for j in 0..model.n_hypotheses() {
            for &m in &args.batch_ms {
                match wrong_hypothesis_bound(model, t, j, m, trace_r) {
                    Ok(b) => rows.push(BoundRow {
                        agent: k,
                        wrong_hypothesis: j,
                        batch_m: m,
                        bound: b.leading_term,
                        empirical_frequency: metrics.as_ref().and_then(|r| {
                            (r.bounds.first().is_none_or(|b| b.batch_m == m))
                                .then(|| {
                                    r.wrong_inclusion
                                        .iter()
                                        .find(|e| e.agent == k && e.hypothesis == j)
                                        .map(|e| e.frequency)
                                })
                                .flatten()
                        }),
                    }),
                    Err(Error::Domain(note)) => {
                        if m == args.batch_ms[0] {
                            skipped.push(SkippedPair {
                                agent: k,
                                hypothesis: j,
                                note,
                            });
                        }
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    let report = BoundReport {
        config_hash: exp.config_hash.clone(),
        root_seed: exp.config.root_seed,
        trace_r,
        residual_orders: RESIDUAL_ORDERS.to_string(),
        rows,
        skipped,
    };
    create_dir(&args.out)?;
    write_json(&args.out.join("bounds.json"), &report)?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(args.out.join("bounds.csv"))?);
    writeln!(out, "# config_hash={}", report.config_hash)?;
    writeln!(out, "# root_seed={}", report.root_seed)?;
    writeln!(out, "# trace_r={}", report.trace_r)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "agent",
        "wrong_hypothesis",
        "batch_m",
        "bound",
        "empirical_frequency",
    ])?;
    for r in &report.rows {
        w.write_record([
            r.agent.to_string(),
            r.wrong_hypothesis.to_string(),
            r.batch_m.to_string(),
            r.bound.to_string(),
            r.empirical_frequency
                .map_or_else(String::new, |f| f.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(report)
}

/// Runs all trials and writes the metrics files.
pub fn cmd_experiment(exp: &Experiment, out: &Path) -> Result<MetricsReport> {
    create_dir(out)?;
    let report = run_experiment(exp)?;
    report.write_all(out)?;
    Ok(report)
}
