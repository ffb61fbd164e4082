//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::digest::config_hash;
use crate::error::{Error, Result};
use crate::graph::{generate_erdos_renyi, CombinationMatrix};
use crate::inverse::InverseConfig;
use crate::models::{
    check_bounded_likelihoods, validate_truths, AgentTruth, HypothesisSpace, LikelihoodFamily,
    LikelihoodModel, ModelSpec,
};

/// Either a random graph or a matrix file (CSV or JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSpec {
    File {
        matrix_path: PathBuf,
    },
    /// Without `seed` each trial draws its own graph.
    Random {
        n: usize,
        p: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelsSource {
    Path(PathBuf),
    Inline(ModelSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaliciousKeyword {
    /// The highest-degree agent of each trial's graph.
    Central,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaliciousSpec {
    Agents(Vec<usize>),
    Keyword(MaliciousKeyword),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthSpec {
    PerAgent(Vec<usize>),
    Majority {
        state: usize,
        #[serde(default = "no_malicious")]
        malicious: MaliciousSpec,
        /// Defaults to `(state + 1) mod H`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        malicious_state: Option<usize>,
    },
}

fn no_malicious() -> MaliciousSpec {
    MaliciousSpec::Agents(Vec::new())
}

/// Estimator settings of an experiment; δ comes from the experiment itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InverseSettings {
    pub step_mu: f64,
    pub batch_m: usize,
    pub tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
}

impl Default for InverseSettings {
    fn default() -> Self {
        let d = InverseConfig::default();
        Self {
            step_mu: d.step_mu,
            batch_m: d.batch_m,
            tol: d.tol,
            max_iter: d.max_iter,
        }
    }
}

impl InverseSettings {
    pub fn with_delta(&self, delta: f64) -> InverseConfig {
        InverseConfig {
            step_mu: self.step_mu,
            delta,
            batch_m: self.batch_m,
            tol: self.tol,
            max_iter: self.max_iter,
            ..InverseConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub graph: GraphSpec,
    pub models: ModelsSource,
    /// Falls back to the true states in the model spec.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truths: Option<TruthSpec>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default)]
    pub inverse: InverseSettings,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub root_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Trailing iterations over which learning accuracy is averaged.
    #[serde(default = "default_window")]
    pub accuracy_window: usize,
    /// Monte-Carlo samples for Tr(R) when some agent is not categorical.
    #[serde(default = "default_trace_samples")]
    pub trace_r_samples: usize,
}

fn default_delta() -> f64 {
    0.1
}
fn default_iterations() -> usize {
    5000
}
fn default_trials() -> usize {
    1
}
fn default_window() -> usize {
    100
}
fn default_trace_samples() -> usize {
    100_000
}

impl ExperimentConfig {
    /// Reads a config; relative paths inside it are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let GraphSpec::File { matrix_path } = &mut cfg.graph {
            rebase(matrix_path);
        }
        if let ModelsSource::Path(p) = &mut cfg.models {
            rebase(p);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!(
                "delta {} is outside (0, 1)",
                self.delta
            )));
        }
        if self.trials == 0 {
            return Err(Error::Config("trial count must be at least 1".into()));
        }
        if self.accuracy_window == 0 {
            return Err(Error::Config("accuracy window must be at least 1".into()));
        }
        if self.trace_r_samples == 0 {
            return Err(Error::Config("trace_r_samples must be at least 1".into()));
        }
        self.inverse.with_delta(self.delta).validate()
    }

    /// Loads referenced files and checks everything that does not depend on a trial.
    pub fn resolve(&self) -> Result<Experiment> {
        self.validate()?;
        let spec = match &self.models {
            ModelsSource::Path(p) => ModelSpec::load(p).map_err(|e| {
                Error::Config(format!("cannot load model spec {}: {e}", p.display()))
            })?,
            ModelsSource::Inline(s) => s.clone(),
        };
        let resolved = spec.resolve()?;
        check_bounded_likelihoods(&resolved.models)?;
        let n = resolved.models.len();
        let fixed_graph = match &self.graph {
            GraphSpec::File { matrix_path } => {
                Some(CombinationMatrix::load(matrix_path).map_err(|e| {
                    Error::Config(format!("cannot load matrix {}: {e}", matrix_path.display()))
                })?)
            }
            GraphSpec::Random { n: gn, seed, p } => {
                if *gn != n {
                    return Err(Error::Config(format!(
                        "graph has {gn} agents but the model spec has {n}"
                    )));
                }
                match seed {
                    Some(s) => Some(generate_erdos_renyi(*gn, *p, *s)?),
                    None => {
                        if !(0.0..=1.0).contains(p) {
                            return Err(Error::Config(format!(
                                "edge probability {p} outside [0, 1]"
                            )));
                        }
                        None
                    }
                }
            }
        };
        if let Some(g) = &fixed_graph {
            if g.n_agents() != n {
                return Err(Error::Config(format!(
                    "matrix has {} agents but the model spec has {n}",
                    g.n_agents()
                )));
            }
        }
        let truth_spec = match (&self.truths, &resolved.true_states) {
            (Some(t), _) => t.clone(),
            (None, Some(ts)) => TruthSpec::PerAgent(ts.clone()),
            (None, None) => {
                return Err(Error::Config(
                    "no true states: set `truths` or give them in the model spec".into(),
                ))
            }
        };
        let h = resolved.hypotheses.len();
        match &truth_spec {
            TruthSpec::PerAgent(ts) => validate_truths(ts, n, h)?,
            TruthSpec::Majority {
                state,
                malicious,
                malicious_state,
            } => {
                validate_truths(&[*state], 1, h)?;
                if let Some(m) = malicious_state {
                    validate_truths(&[*m], 1, h)?;
                }
                if let MaliciousSpec::Agents(list) = malicious {
                    if let Some(k) = list.iter().find(|&&k| k >= n) {
                        return Err(Error::Config(format!("malicious agent {k} out of range")));
                    }
                }
            }
        }
        let families: Vec<&LikelihoodFamily> = resolved.models.iter().map(|m| m.family()).collect();
        let hash = config_hash(&(self, &families, fixed_graph.as_ref().map(|g| g.rows())));
        Ok(Experiment {
            config: self.clone(),
            hypotheses: resolved.hypotheses,
            models: resolved.models,
            fixed_graph,
            truth_spec,
            config_hash: hash,
        })
    }
}

/// A validated configuration with its files loaded.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub hypotheses: HypothesisSpace,
    pub models: Vec<LikelihoodModel>,
    pub fixed_graph: Option<CombinationMatrix>,
    pub truth_spec: TruthSpec,
    pub config_hash: String,
}

/// Everything a single trial needs.
#[derive(Debug, Clone)]
pub struct TrialSetup {
    pub trial: usize,
    /// `root_seed + trial` (wrapping).
    pub seed: u64,
    pub graph_seed: Option<u64>,
    pub simulation_seed: u64,
    pub graph: CombinationMatrix,
    pub truths: Vec<usize>,
    /// Network-majority state set used for malicious flags.
    pub reference: Vec<usize>,
    /// Per agent: its optimal set misses the reference.
    pub malicious: Vec<bool>,
    pub agent_truths: Vec<AgentTruth>,
}

impl Experiment {
    pub fn n_agents(&self) -> usize {
        self.models.len()
    }

    pub fn inverse_config(&self) -> InverseConfig {
        self.config.inverse.with_delta(self.config.delta)
    }

    /// Trial seed `s = root_seed + trial`. A ChaCha8 stream seeded with `s` yields the
    /// graph seed (first draw) and the simulation seed (second draw).
    pub fn trial_setup(&self, trial: usize) -> Result<TrialSetup> {
        let seed = self.config.root_seed.wrapping_add(trial as u64);
        let mut splitter = ChaCha8Rng::seed_from_u64(seed);
        let graph_draw = splitter.next_u64();
        let simulation_seed = splitter.next_u64();
        let (graph, graph_seed) = match (&self.fixed_graph, &self.config.graph) {
            (Some(g), GraphSpec::Random { seed, .. }) => (g.clone(), *seed),
            (Some(g), _) => (g.clone(), None),
            (None, GraphSpec::Random { n, p, .. }) => {
                (generate_erdos_renyi(*n, *p, graph_draw)?, Some(graph_draw))
            }
            (None, GraphSpec::File { .. }) => unreachable!("file graphs are loaded on resolve"),
        };
        let h = self.hypotheses.len();
        let truths = match &self.truth_spec {
            TruthSpec::PerAgent(ts) => ts.clone(),
            TruthSpec::Majority {
                state,
                malicious,
                malicious_state,
            } => {
                let bad_state = malicious_state.unwrap_or((state + 1) % h);
                let mut ts = vec![*state; self.n_agents()];
                let agents = match malicious {
                    MaliciousSpec::Agents(list) => list.clone(),
                    MaliciousSpec::Keyword(MaliciousKeyword::Central) => vec![graph.most_central()],
                };
                for k in agents {
                    ts[k] = bad_state;
                }
                ts
            }
        };
        let reference = match &self.truth_spec {
            TruthSpec::Majority { state, .. } => vec![*state],
            TruthSpec::PerAgent(ts) => vec![plurality(ts, h)],
        };
        let agent_truths = self
            .models
            .iter()
            .zip(&truths)
            .map(|(m, &t)| AgentTruth::derive(m, t))
            .collect::<Result<Vec<_>>>()?;
        let malicious = agent_truths
            .iter()
            .map(|t| !t.optimal_set.iter().any(|j| reference.contains(j)))
            .collect();
        Ok(TrialSetup {
            trial,
            seed,
            graph_seed,
            simulation_seed,
            graph,
            truths,
            reference,
            malicious,
            agent_truths,
        })
    }
}

/// Most frequent value, ties to the lowest.
fn plurality(values: &[usize], h: usize) -> usize {
    let mut counts = vec![0usize; h];
    for &v in values {
        counts[v] += 1;
    }
    let top = counts.iter().copied().max().unwrap_or(0);
    counts.iter().position(|&c| c == top).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> serde_json::Value {
        serde_json::json!({
            "graph": {"n": 4, "p": 0.8, "seed": 3},
            "models": {"shared": {"family": "categorical", "pmfs": [[0.8, 0.2], [0.2, 0.8]]}, "n_agents": 4},
            "truths": {"majority": {"state": 0, "malicious": "central"}},
            "iterations": 300,
            "inverse": {"batch_m": 20}
        })
    }

    #[test]
    fn parses_and_resolves_central_malicious() {
        let cfg: ExperimentConfig = serde_json::from_value(base()).unwrap();
        assert_eq!(cfg.delta, 0.1);
        assert_eq!(cfg.inverse.step_mu, 1e-3);
        let exp = cfg.resolve().unwrap();
        let setup = exp.trial_setup(0).unwrap();
        let central = setup.graph.most_central();
        assert_eq!(setup.truths[central], 1);
        assert_eq!(setup.truths.iter().filter(|&&t| t == 1).count(), 1);
        assert_eq!(setup.reference, vec![0]);
        assert!(setup.malicious[central]);
        assert_eq!(setup.graph_seed, Some(3));
    }

    #[test]
    fn trial_seeds_are_split_deterministically() {
        let mut v = base();
        v["graph"] = serde_json::json!({"n": 4, "p": 0.8});
        v["root_seed"] = serde_json::json!(10);
        let exp: Experiment = serde_json::from_value::<ExperimentConfig>(v)
            .unwrap()
            .resolve()
            .unwrap();
        let a = exp.trial_setup(2).unwrap();
        let b = exp.trial_setup(2).unwrap();
        assert_eq!(a.seed, 12);
        assert_eq!(a.simulation_seed, b.simulation_seed);
        assert_eq!(a.graph, b.graph);
        assert_ne!(
            a.simulation_seed,
            exp.trial_setup(3).unwrap().simulation_seed
        );
    }

    #[test]
    fn per_agent_truths_use_plurality_reference() {
        let mut v = base();
        v["truths"] = serde_json::json!({"per_agent": [1, 1, 0, 1]});
        let exp = serde_json::from_value::<ExperimentConfig>(v)
            .unwrap()
            .resolve()
            .unwrap();
        let s = exp.trial_setup(0).unwrap();
        assert_eq!(s.reference, vec![1]);
        assert_eq!(s.malicious, vec![false, false, true, false]);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut v = base();
        v["delta"] = serde_json::json!(1.5);
        let cfg: ExperimentConfig = serde_json::from_value(v).unwrap();
        assert!(matches!(cfg.resolve(), Err(Error::Config(_))));
        let mut v = base();
        v["trials"] = serde_json::json!(0);
        assert!(serde_json::from_value::<ExperimentConfig>(v)
            .unwrap()
            .resolve()
            .is_err());
        let mut v = base();
        v["graph"] = serde_json::json!({"n": 5, "p": 0.8, "seed": 1});
        assert!(serde_json::from_value::<ExperimentConfig>(v)
            .unwrap()
            .resolve()
            .is_err());
        let mut v = base();
        v.as_object_mut().unwrap().remove("truths");
        assert!(serde_json::from_value::<ExperimentConfig>(v)
            .unwrap()
            .resolve()
            .is_err());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let spec = serde_json::json!({
            "shared": {"family": "gaussian", "means": [0.0, 1.0], "variance": 1.0},
            "n_agents": 2, "true_states": [0, 0]
        });
        std::fs::write(dir.path().join("models.json"), spec.to_string()).unwrap();
        let cfg =
            serde_json::json!({"graph": {"n": 2, "p": 1.0, "seed": 0}, "models": "models.json"});
        std::fs::write(dir.path().join("exp.json"), cfg.to_string()).unwrap();
        let cfg = ExperimentConfig::load(&dir.path().join("exp.json")).unwrap();
        let exp = cfg.resolve().unwrap();
        assert_eq!(exp.trial_setup(0).unwrap().truths, vec![0, 0]);
    }
}
