//! Experiment orchestration: configuration, Monte-Carlo trials, metrics and the
//! subcommand implementations behind the CLI.

pub mod commands;
pub mod config;
pub mod metrics;

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::error::Result;
use crate::forward::{BeliefInit, Simulation};
use crate::inverse::{
    all_bounds, estimate_trace_r, expected_log_ratio, run_inverse_on_lambdas, GroundTruth,
    InverseOutcome, RunOptions,
};

pub use config::{
    Experiment, ExperimentConfig, GraphSpec, InverseSettings, MaliciousKeyword, MaliciousSpec,
    ModelsSource, TrialSetup, TruthSpec,
};
pub use metrics::{MetricsReport, Summary, TrialFailure, TrialOutcome, WrongInclusion};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "SOCIAL_INVERSE_OUT";

/// Argmax bookkeeping over the trailing accuracy window.
struct ArgmaxWindow {
    capacity: usize,
    /// Per iteration: agents whose argmax is in their optimal set, and malicious agents
    /// whose argmax is in the majority set.
    entries: VecDeque<(usize, usize)>,
}

impl ArgmaxWindow {
    fn push(&mut self, entry: (usize, usize)) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
    }
}

/// Simulates one trial and runs the inverse estimator on its public beliefs as they
/// are produced.
pub fn run_trial(exp: &Experiment, setup: &TrialSetup) -> Result<TrialOutcome> {
    let cfg = &exp.config;
    let n = exp.n_agents();
    let mut sim = Simulation::new(
        &setup.graph,
        &exp.models,
        &setup.truths,
        cfg.delta,
        setup.simulation_seed,
        BeliefInit::Uniform,
    )?;
    let expected = expected_log_ratio(&exp.models, &setup.truths)?;
    let options = RunOptions {
        ground_truth: Some(GroundTruth {
            a: setup.graph.weights().clone(),
            expected: expected.clone(),
        }),
        reference_states: Some(setup.reference.clone()),
    };
    let malicious_agents: Vec<usize> = (0..n).filter(|&k| setup.malicious[k]).collect();
    let mut window = ArgmaxWindow {
        capacity: cfg.accuracy_window,
        entries: VecDeque::with_capacity(cfg.accuracy_window),
    };
    let outcome: InverseOutcome = {
        let window = &mut window;
        let lambdas = (0..cfg.iterations).map(|_| {
            let step = sim.step()?;
            let correct = step
                .estimates
                .iter()
                .zip(&setup.agent_truths)
                .filter(|(e, t)| t.optimal_set.contains(&e.index))
                .count();
            let fooled = malicious_agents
                .iter()
                .filter(|&&k| setup.reference.contains(&step.estimates[k].index))
                .count();
            window.push((correct, fooled));
            Ok(step.lambda.entries)
        });
        run_inverse_on_lambdas(lambdas, &exp.inverse_config(), &options)?
    };
    let rows = window.entries.len() as f64;
    let learning_accuracy =
        window.entries.iter().map(|e| e.0).sum::<usize>() as f64 / (rows * n as f64);
    let malicious_argmax_on_majority = (!malicious_agents.is_empty()).then(|| {
        window.entries.iter().map(|e| e.1).sum::<usize>() as f64
            / (rows * malicious_agents.len() as f64)
    });
    let est = &outcome.hypotheses;
    let agent_correct: Vec<bool> = (0..n)
        .map(|k| {
            est.sets[k] == setup.agent_truths[k].optimal_set
                && est.malicious[k] == setup.malicious[k]
        })
        .collect();
    let h = exp.hypotheses.len();
    let wrong_hypotheses: Vec<Vec<usize>> = setup
        .agent_truths
        .iter()
        .map(|t| (0..h).filter(|j| !t.optimal_set.contains(j)).collect())
        .collect();
    let wrong_inclusions = wrong_hypotheses
        .iter()
        .enumerate()
        .flat_map(|(k, wrong)| {
            wrong
                .iter()
                .filter(move |j| est.sets[k].contains(j))
                .map(move |&j| (k, j))
        })
        .collect();
    Ok(TrialOutcome {
        trial: setup.trial,
        seed: setup.seed,
        graph_seed: setup.graph_seed,
        truths: setup.truths.clone(),
        malicious_agents,
        estimated_sets: est.sets.clone(),
        malicious_flags: est.malicious.clone(),
        learning_accuracy,
        detection_accuracy: agent_correct.iter().filter(|&&c| c).count() as f64 / n as f64,
        all_agents_correct: agent_correct.iter().all(|&c| c),
        a_error: (&outcome.a_est - setup.graph.weights()).norm(),
        l_error_sq: (&outcome.l_est - &expected.entries).norm_squared(),
        malicious_argmax_on_majority,
        wrong_hypotheses,
        wrong_inclusions,
        iterations_consumed: outcome.diagnostics.iterations_consumed,
        converged: outcome.diagnostics.converged,
    })
}

/// Runs every trial in parallel and aggregates. Trial failures are recorded, not
/// propagated; setup errors of the experiment itself are.
pub fn run_experiment(exp: &Experiment) -> Result<MetricsReport> {
    let cfg = &exp.config;
    let setups: Vec<TrialSetup> = (0..cfg.trials)
        .map(|t| exp.trial_setup(t))
        .collect::<Result<_>>()?;
    let results: Vec<_> = setups
        .par_iter()
        .map(|s| {
            run_trial(exp, s).map_err(|e| TrialFailure {
                trial: s.trial,
                seed: s.seed,
                error: e.to_string(),
            })
        })
        .collect();
    for f in results.iter().filter_map(|r| r.as_ref().err()) {
        log::warn!("trial {} (seed {}) failed: {}", f.trial, f.seed, f.error);
    }
    let shared_truths = setups.windows(2).all(|w| w[0].truths == w[1].truths);
    let bounds = if shared_truths {
        let truths = &setups[0].truths;
        let trace_r = estimate_trace_r(&exp.models, truths, cfg.trace_r_samples, cfg.root_seed)?;
        Some((
            trace_r,
            all_bounds(&exp.models, truths, cfg.inverse.batch_m, trace_r)?,
        ))
    } else {
        None
    };
    Ok(MetricsReport::aggregate(
        exp.config_hash.clone(),
        cfg.root_seed,
        results,
        exp.n_agents(),
        exp.hypotheses.len(),
        bounds,
    ))
}
