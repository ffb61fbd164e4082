//! Per-trial scores and their aggregation.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::inverse::ErrorBound;

/// Mean with standard error over trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(count)`; zero for a single value.
    pub std_error: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        // clamp so rounding never puts the mean outside [min, max]
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Self {
            mean: mean.clamp(min, max),
            std_error: (var / n).sqrt(),
            min,
            max,
            count: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph_seed: Option<u64>,
    pub truths: Vec<usize>,
    pub malicious_agents: Vec<usize>,
    pub estimated_sets: Vec<Vec<usize>>,
    pub malicious_flags: Vec<bool>,
    /// Fraction of agent-iterations in the trailing window whose argmax lies in the
    /// agent's optimal set.
    pub learning_accuracy: f64,
    /// Fraction of agents whose estimated set equals the optimal set and whose flag is
    /// correct.
    pub detection_accuracy: f64,
    pub all_agents_correct: bool,
    /// `‖Â − A‖_F`.
    pub a_error: f64,
    /// `‖𝓛̂ − 𝓛̄‖_F²`.
    pub l_error_sq: f64,
    /// Over malicious agents and the trailing window: fraction of iterations whose
    /// argmax sits in the majority set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub malicious_argmax_on_majority: Option<f64>,
    /// Per agent, the hypotheses outside its optimal set.
    pub wrong_hypotheses: Vec<Vec<usize>>,
    /// `(agent, θ)` pairs with `θ ∉ Θ_k★` that made it into `Θ̂_k`.
    pub wrong_inclusions: Vec<(usize, usize)>,
    pub iterations_consumed: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub seed: u64,
    pub error: String,
}

/// Empirical inclusion frequency of a wrong hypothesis against its bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrongInclusion {
    pub agent: usize,
    pub hypothesis: usize,
    pub frequency: f64,
    /// Successful trials in which the hypothesis was wrong for the agent.
    pub trials: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config_hash: String,
    pub root_seed: u64,
    pub trials_requested: usize,
    pub trials_succeeded: usize,
    pub failures: Vec<TrialFailure>,
    pub learning_accuracy: Option<Summary>,
    pub detection_accuracy: Option<Summary>,
    /// Fraction of trials with every agent correct, as a summary of 0/1 values.
    pub all_agents_correct: Option<Summary>,
    pub a_error: Option<Summary>,
    pub l_error_sq: Option<Summary>,
    pub malicious_argmax_on_majority: Option<Summary>,
    pub wrong_inclusion: Vec<WrongInclusion>,
    /// Present when every trial used the same true states.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_r: Option<f64>,
    pub bounds: Vec<ErrorBound>,
    pub trials: Vec<TrialOutcome>,
}

impl MetricsReport {
    pub fn aggregate(
        config_hash: String,
        root_seed: u64,
        results: Vec<std::result::Result<TrialOutcome, TrialFailure>>,
        n_agents: usize,
        n_hypotheses: usize,
        bounds: Option<(f64, Vec<ErrorBound>)>,
    ) -> Self {
        let trials_requested = results.len();
        let mut trials = Vec::new();
        let mut failures = Vec::new();
        for r in results {
            match r {
                Ok(t) => trials.push(t),
                Err(f) => failures.push(f),
            }
        }
        let col = |f: &dyn Fn(&TrialOutcome) -> Option<f64>| {
            Summary::of(&trials.iter().filter_map(f).collect::<Vec<_>>())
        };
        let mut wrong_inclusion = Vec::new();
        for k in 0..n_agents {
            for j in 0..n_hypotheses {
                let eligible: Vec<&TrialOutcome> = trials
                    .iter()
                    .filter(|t| t.wrong_hypotheses.get(k).is_some_and(|w| w.contains(&j)))
                    .collect();
                if eligible.is_empty() {
                    continue;
                }
                let hits = eligible
                    .iter()
                    .filter(|t| t.wrong_inclusions.contains(&(k, j)))
                    .count();
                let bound = bounds.as_ref().and_then(|(_, b)| {
                    b.iter()
                        .find(|e| e.agent == k && e.wrong_hypothesis == j)
                        .map(|e| e.leading_term)
                });
                if bounds.is_some() && bound.is_none() {
                    continue;
                }
                wrong_inclusion.push(WrongInclusion {
                    agent: k,
                    hypothesis: j,
                    frequency: hits as f64 / eligible.len() as f64,
                    trials: eligible.len(),
                    bound,
                });
            }
        }
        let (trace_r, bounds) = match bounds {
            Some((t, b)) => (Some(t), b),
            None => (None, Vec::new()),
        };
        Self {
            config_hash,
            root_seed,
            trials_requested,
            trials_succeeded: trials.len(),
            failures,
            learning_accuracy: col(&|t| Some(t.learning_accuracy)),
            detection_accuracy: col(&|t| Some(t.detection_accuracy)),
            all_agents_correct: col(&|t| Some(f64::from(u8::from(t.all_agents_correct)))),
            a_error: col(&|t| Some(t.a_error)),
            l_error_sq: col(&|t| Some(t.l_error_sq)),
            malicious_argmax_on_majority: col(&|t| t.malicious_argmax_on_majority),
            wrong_inclusion,
            trace_r,
            bounds,
            trials,
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    fn header<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "# config_hash={}", self.config_hash)?;
        writeln!(out, "# root_seed={}", self.root_seed)?;
        Ok(())
    }

    pub fn write_trials_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.header(&mut out)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "trial",
            "seed",
            "learning_accuracy",
            "detection_accuracy",
            "all_agents_correct",
            "a_error",
            "l_error_sq",
            "malicious_argmax_on_majority",
            "iterations_consumed",
            "converged",
        ])?;
        for t in &self.trials {
            w.write_record([
                t.trial.to_string(),
                t.seed.to_string(),
                t.learning_accuracy.to_string(),
                t.detection_accuracy.to_string(),
                t.all_agents_correct.to_string(),
                t.a_error.to_string(),
                t.l_error_sq.to_string(),
                t.malicious_argmax_on_majority
                    .map_or_else(String::new, |v| v.to_string()),
                t.iterations_consumed.to_string(),
                t.converged.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_wrong_inclusion_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.header(&mut out)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["agent", "hypothesis", "frequency", "trials", "bound"])?;
        for e in &self.wrong_inclusion {
            w.write_record([
                e.agent.to_string(),
                e.hypothesis.to_string(),
                e.frequency.to_string(),
                e.trials.to_string(),
                e.bound.map_or_else(String::new, |b| b.to_string()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `metrics.json`, `trials.csv` and `wrong_inclusion.csv` under `dir`.
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_json(&dir.join("metrics.json"))?;
        self.write_trials_csv(&dir.join("trials.csv"))?;
        self.write_wrong_inclusion_csv(&dir.join("wrong_inclusion.csv"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(trial: usize, acc: f64) -> TrialOutcome {
        TrialOutcome {
            trial,
            seed: trial as u64,
            graph_seed: None,
            truths: vec![0, 1],
            malicious_agents: vec![1],
            estimated_sets: vec![vec![0], vec![1]],
            malicious_flags: vec![false, true],
            learning_accuracy: acc,
            detection_accuracy: 1.0,
            all_agents_correct: true,
            a_error: 0.1,
            l_error_sq: 0.01,
            malicious_argmax_on_majority: Some(1.0),
            wrong_inclusions: if trial == 0 { vec![(0, 1)] } else { vec![] },
            wrong_hypotheses: vec![vec![1], vec![0]],
            iterations_consumed: 10,
            converged: false,
        }
    }

    #[test]
    fn single_trial_has_zero_standard_error() {
        let s = Summary::of(&[0.7]).unwrap();
        assert_eq!((s.mean, s.std_error, s.min, s.max), (0.7, 0.0, 0.7, 0.7));
        assert!(Summary::of(&[]).is_none());
    }

    #[test]
    fn aggregate_counts_failures_and_frequencies() {
        let results = vec![
            Ok(outcome(0, 0.9)),
            Err(TrialFailure {
                trial: 1,
                seed: 1,
                error: "boom".into(),
            }),
            Ok(outcome(2, 0.7)),
        ];
        let r = MetricsReport::aggregate("h".into(), 0, results, 2, 2, None);
        assert_eq!((r.trials_requested, r.trials_succeeded), (3, 2));
        let la = r.learning_accuracy.unwrap();
        assert!((la.mean - 0.8).abs() < 1e-15);
        assert!((la.std_error - 0.1).abs() < 1e-12);
        let e = r
            .wrong_inclusion
            .iter()
            .find(|e| (e.agent, e.hypothesis) == (0, 1))
            .unwrap();
        assert_eq!((e.frequency, e.trials), (0.5, 2));
        assert_eq!(r.wrong_inclusion.len(), 2);
    }

    #[test]
    fn report_files_carry_hash_and_seed() {
        let r = MetricsReport::aggregate("abc".into(), 42, vec![Ok(outcome(0, 1.0))], 2, 2, None);
        let dir = tempfile::tempdir().unwrap();
        r.write_all(dir.path()).unwrap();
        for f in ["trials.csv", "wrong_inclusion.csv"] {
            let text = std::fs::read_to_string(dir.path().join(f)).unwrap();
            assert!(text.starts_with("# config_hash=abc\n# root_seed=42\n"));
        }
        let back: MetricsReport = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("metrics.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(back, r);
    }
}
