//! Hypothesis spaces and per-agent likelihood families.
//!
//! Two families are supported: categorical over a finite alphabet, and scalar
//! Gaussian with per-hypothesis means and a shared variance. Both have closed-form
//! KL divergences. Only the categorical family can satisfy the bounded-likelihood
//! assumption; Gaussian models are admitted with a warning.

use std::collections::BTreeSet;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor applied to probabilities before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// Tolerance on categorical row sums.
pub const PMF_SUM_TOL: f64 = 1e-12;

/// KL divergence below which two hypotheses count as the same distribution.
pub const INDISTINGUISHABLE_KL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisSpace {
    labels: Vec<String>,
}

impl HypothesisSpace {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::Contract(format!(
                "need at least 2 hypotheses, got {}",
                labels.len()
            )));
        }
        let distinct: BTreeSet<&String> = labels.iter().collect();
        if distinct.len() != labels.len() {
            return Err(Error::Contract("hypothesis labels must be distinct".into()));
        }
        Ok(Self { labels })
    }

    /// `theta_0 … theta_{h-1}`.
    pub fn indexed(h: usize) -> Result<Self> {
        Self::new((0..h).map(|j| format!("theta_{j}")).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Index 0 is the reference hypothesis in every log-ratio.
    pub fn reference(&self) -> &str {
        &self.labels[0]
    }
}

/// A single private observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Observation {
    Symbol(usize),
    Real(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LikelihoodFamily {
    /// One pmf over the alphabet per hypothesis.
    Categorical { pmfs: Vec<Vec<f64>> },
    /// `N(means[θ], variance)`.
    Gaussian { means: Vec<f64>, variance: f64 },
}

impl LikelihoodFamily {
    pub fn n_hypotheses(&self) -> usize {
        match self {
            LikelihoodFamily::Categorical { pmfs } => pmfs.len(),
            LikelihoodFamily::Gaussian { means, .. } => means.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        let h = self.n_hypotheses();
        if h < 2 {
            return Err(Error::Contract(format!(
                "need at least 2 hypotheses, got {h}"
            )));
        }
        match self {
            LikelihoodFamily::Categorical { pmfs } => {
                let alphabet = pmfs[0].len();
                if alphabet == 0 {
                    return Err(Error::Contract("categorical alphabet is empty".into()));
                }
                for (j, row) in pmfs.iter().enumerate() {
                    if row.len() != alphabet {
                        return Err(Error::Contract(format!(
                            "pmf for hypothesis {j} has {} symbols, expected {alphabet}",
                            row.len()
                        )));
                    }
                    if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                        return Err(Error::Contract(format!(
                            "pmf for hypothesis {j} has a negative or non-finite entry"
                        )));
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > PMF_SUM_TOL {
                        return Err(Error::Contract(format!(
                            "pmf for hypothesis {j} sums to {sum}"
                        )));
                    }
                }
            }
            LikelihoodFamily::Gaussian { means, variance } => {
                if !(*variance > 0.0) || !variance.is_finite() {
                    return Err(Error::Contract(format!(
                        "Gaussian variance must be positive, got {variance}"
                    )));
                }
                if means.iter().any(|m| !m.is_finite()) {
                    return Err(Error::Contract("Gaussian means must be finite".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Sampler {
    Categorical(Vec<WeightedIndex<f64>>),
    Gaussian(Vec<Normal<f64>>),
}

/// Likelihood model `L_k(ζ|θ)` of one agent.
#[derive(Debug, Clone)]
pub struct LikelihoodModel {
    agent_id: usize,
    family: LikelihoodFamily,
    sampler: Sampler,
}

impl PartialEq for LikelihoodModel {
    fn eq(&self, other: &Self) -> bool {
        self.agent_id == other.agent_id && self.family == other.family
    }
}

impl LikelihoodModel {
    pub fn new(agent_id: usize, family: LikelihoodFamily) -> Result<Self> {
        family.validate()?;
        let sampler = match &family {
            LikelihoodFamily::Categorical { pmfs } => Sampler::Categorical(
                pmfs.iter()
                    .map(|row| {
                        WeightedIndex::new(row.iter().copied()).map_err(|e| {
                            Error::Contract(format!("cannot sample from pmf {row:?}: {e}"))
                        })
                    })
                    .collect::<Result<_>>()?,
            ),
            LikelihoodFamily::Gaussian { means, variance } => Sampler::Gaussian(
                means
                    .iter()
                    .map(|&m| {
                        Normal::new(m, variance.sqrt())
                            .map_err(|e| Error::Contract(format!("bad Gaussian: {e}")))
                    })
                    .collect::<Result<_>>()?,
            ),
        };
        Ok(Self {
            agent_id,
            family,
            sampler,
        })
    }

    pub fn categorical(agent_id: usize, pmfs: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(agent_id, LikelihoodFamily::Categorical { pmfs })
    }

    pub fn gaussian(agent_id: usize, means: Vec<f64>, variance: f64) -> Result<Self> {
        Self::new(agent_id, LikelihoodFamily::Gaussian { means, variance })
    }

    pub fn agent_id(&self) -> usize {
        self.agent_id
    }

    pub fn family(&self) -> &LikelihoodFamily {
        &self.family
    }

    pub fn n_hypotheses(&self) -> usize {
        self.family.n_hypotheses()
    }

    fn check_index(&self, theta: usize) -> Result<()> {
        if theta >= self.n_hypotheses() {
            return Err(Error::Contract(format!(
                "hypothesis index {theta} out of range for agent {} (H={})",
                self.agent_id,
                self.n_hypotheses()
            )));
        }
        Ok(())
    }

    /// Draws one observation from `L_k(·|θ_state)`.
    pub fn sample<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> Result<Observation> {
        self.check_index(state)?;
        Ok(match &self.sampler {
            Sampler::Categorical(dists) => Observation::Symbol(dists[state].sample(rng)),
            Sampler::Gaussian(dists) => Observation::Real(dists[state].sample(rng)),
        })
    }

    /// `log L_k(obs|θ)`, with probabilities floored at [`PROB_FLOOR`].
    pub fn log_density(&self, obs: Observation, theta: usize) -> Result<f64> {
        self.check_index(theta)?;
        let value = match (&self.family, obs) {
            (LikelihoodFamily::Categorical { pmfs }, Observation::Symbol(s)) => {
                let p = *pmfs[theta].get(s).ok_or_else(|| {
                    Error::Contract(format!(
                        "symbol {s} outside the alphabet of agent {}",
                        self.agent_id
                    ))
                })?;
                p.max(PROB_FLOOR).ln()
            }
            (LikelihoodFamily::Gaussian { means, variance }, Observation::Real(x)) => {
                let d = x - means[theta];
                -d * d / (2.0 * variance) - 0.5 * (2.0 * std::f64::consts::PI * variance).ln()
            }
            (_, obs) => {
                return Err(Error::Contract(format!(
                    "observation {obs:?} does not match the family of agent {}",
                    self.agent_id
                )))
            }
        };
        if !value.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite log-likelihood for agent {} at hypothesis {theta}",
                self.agent_id
            )));
        }
        Ok(value)
    }

    /// `log L_k(obs|θ_a) − log L_k(obs|θ_b)`.
    pub fn log_likelihood_ratio(&self, obs: Observation, a: usize, b: usize) -> Result<f64> {
        let ratio = match (&self.family, obs) {
            // the normalizing constants cancel; keep the midpoint case exact
            (LikelihoodFamily::Gaussian { means, variance }, Observation::Real(x)) => {
                self.check_index(a)?;
                self.check_index(b)?;
                let da = x - means[a];
                let db = x - means[b];
                (db * db - da * da) / (2.0 * variance)
            }
            _ => self.log_density(obs, a)? - self.log_density(obs, b)?,
        };
        if !ratio.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite log-likelihood ratio for agent {} ({a} vs {b})",
                self.agent_id
            )));
        }
        Ok(ratio)
    }

    /// `D_KL(L_k(θ_a) ‖ L_k(θ_b))`.
    pub fn kl_divergence(&self, a: usize, b: usize) -> Result<f64> {
        self.check_index(a)?;
        self.check_index(b)?;
        if a == b {
            return Ok(0.0);
        }
        let kl = match &self.family {
            LikelihoodFamily::Categorical { pmfs } => pmfs[a]
                .iter()
                .zip(&pmfs[b])
                .filter(|(&pa, _)| pa > 0.0)
                .map(|(&pa, &pb)| pa * (pa.ln() - pb.max(PROB_FLOOR).ln()))
                .sum::<f64>(),
            LikelihoodFamily::Gaussian { means, variance } => {
                let d = means[a] - means[b];
                d * d / (2.0 * variance)
            }
        };
        Ok(kl.max(0.0))
    }

    /// Hypotheses whose distribution equals that of `true_state` (KL below 1e-12).
    pub fn optimal_set(&self, true_state: usize) -> Result<Vec<usize>> {
        self.check_index(true_state)?;
        let mut set = Vec::new();
        for theta in 0..self.n_hypotheses() {
            if self.kl_divergence(true_state, theta)? < INDISTINGUISHABLE_KL {
                set.push(theta);
            }
        }
        Ok(set)
    }
}

/// True state and the derived optimal hypothesis set of one agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentTruth {
    pub true_state: usize,
    pub optimal_set: Vec<usize>,
}

impl AgentTruth {
    pub fn derive(model: &LikelihoodModel, true_state: usize) -> Result<Self> {
        Ok(Self {
            true_state,
            optimal_set: model.optimal_set(true_state)?,
        })
    }
}

/// Bound `b` on absolute log-likelihood ratios over the support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstant {
    /// `f64::INFINITY` when some model has unbounded support.
    pub b: f64,
    /// Set when a Gaussian model made the bound infinite.
    pub unbounded_warning: bool,
}

impl BoundConstant {
    pub fn is_finite(&self) -> bool {
        self.b.is_finite()
    }
}

/// Largest `|log L_k(ζ|θ)/L_k(ζ|θ')|` over all agents, symbols and hypothesis pairs.
pub fn check_bounded_likelihoods(models: &[LikelihoodModel]) -> Result<BoundConstant> {
    let mut bound = BoundConstant {
        b: 0.0,
        unbounded_warning: false,
    };
    let mut unbounded = Vec::new();
    for model in models {
        match model.family() {
            LikelihoodFamily::Categorical { pmfs } => {
                let alphabet = pmfs[0].len();
                for s in 0..alphabet {
                    let column: Vec<f64> = pmfs.iter().map(|row| row[s]).collect();
                    if column.iter().all(|&p| p == 0.0) {
                        continue; // symbol outside every hypothesis' support
                    }
                    if let Some(j) = column.iter().position(|&p| p == 0.0) {
                        return Err(Error::AssumptionViolation(format!(
                            "agent {}: symbol {s} has zero probability under hypothesis {j} \
                             but positive probability under another hypothesis",
                            model.agent_id()
                        )));
                    }
                    let max = column.iter().copied().fold(f64::MIN, f64::max).ln();
                    let min = column.iter().copied().fold(f64::MAX, f64::min).ln();
                    bound.b = bound.b.max(max - min);
                }
            }
            LikelihoodFamily::Gaussian { means, .. } => {
                let distinct = means.iter().any(|&m| m != means[0]);
                if distinct {
                    unbounded.push(model.agent_id());
                }
            }
        }
    }
    if !unbounded.is_empty() {
        log::warn!(
            "agents {unbounded:?}: Gaussian likelihoods have unbounded log-ratios; \
             the bounded-likelihood assumption does not hold"
        );
        bound.b = f64::INFINITY;
        bound.unbounded_warning = true;
    }
    Ok(bound)
}

/// One agent entry of a model specification file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    #[serde(flatten)]
    pub family: LikelihoodFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_state: Option<usize>,
}

/// JSON model specification.
///
/// Either list every agent under `agents`, or give one `shared` family together with
/// `n_agents`. True states may be given per agent (`agents[k].true_state`) or as a
/// `true_states` array; an experiment configuration can override them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hypotheses: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agents: Option<Vec<AgentSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shared: Option<LikelihoodFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_agents: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_states: Option<Vec<usize>>,
}

/// Models, hypothesis labels and (if fully specified) true states.
#[derive(Debug, Clone)]
pub struct ResolvedModels {
    pub hypotheses: HypothesisSpace,
    pub models: Vec<LikelihoodModel>,
    pub true_states: Option<Vec<usize>>,
}

impl ModelSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }

    pub fn shared(family: LikelihoodFamily, n_agents: usize) -> Self {
        Self {
            shared: Some(family),
            n_agents: Some(n_agents),
            ..Self::default()
        }
    }

    pub fn resolve(&self) -> Result<ResolvedModels> {
        let (models, per_agent_truths): (Vec<LikelihoodModel>, Vec<Option<usize>>) =
            match (&self.agents, &self.shared) {
                (Some(agents), None) => {
                    let mut models = Vec::with_capacity(agents.len());
                    let mut truths = Vec::with_capacity(agents.len());
                    for (k, a) in agents.iter().enumerate() {
                        models.push(LikelihoodModel::new(k, a.family.clone())?);
                        truths.push(a.true_state);
                    }
                    (models, truths)
                }
                (None, Some(family)) => {
                    let n = self
                        .n_agents
                        .ok_or_else(|| Error::Config("`shared` models need `n_agents`".into()))?;
                    let models = (0..n)
                        .map(|k| LikelihoodModel::new(k, family.clone()))
                        .collect::<Result<Vec<_>>>()?;
                    (models, vec![None; n])
                }
                _ => {
                    return Err(Error::Config(
                        "model spec needs exactly one of `agents` or `shared`".into(),
                    ))
                }
            };
        if models.is_empty() {
            return Err(Error::Config("model spec has no agents".into()));
        }
        let h = models[0].n_hypotheses();
        if models.iter().any(|m| m.n_hypotheses() != h) {
            return Err(Error::Config(
                "all agents must share the same number of hypotheses".into(),
            ));
        }
        let hypotheses = match &self.hypotheses {
            Some(labels) => {
                if labels.len() != h {
                    return Err(Error::Config(format!(
                        "{} hypothesis labels given for H={h}",
                        labels.len()
                    )));
                }
                HypothesisSpace::new(labels.clone())?
            }
            None => HypothesisSpace::indexed(h)?,
        };
        let true_states = match &self.true_states {
            Some(ts) => Some(ts.clone()),
            None => per_agent_truths.iter().copied().collect::<Option<Vec<_>>>(),
        };
        if let Some(ts) = &true_states {
            validate_truths(ts, models.len(), h)?;
        }
        Ok(ResolvedModels {
            hypotheses,
            models,
            true_states,
        })
    }
}

pub(crate) fn validate_truths(truths: &[usize], n: usize, h: usize) -> Result<()> {
    if truths.len() != n {
        return Err(Error::Config(format!(
            "{} true states given for {n} agents",
            truths.len()
        )));
    }
    if let Some(t) = truths.iter().find(|&&t| t >= h) {
        return Err(Error::Config(format!(
            "true state {t} out of range for H={h}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn binary() -> LikelihoodModel {
        LikelihoodModel::categorical(0, vec![vec![0.8, 0.2], vec![0.2, 0.8]]).unwrap()
    }

    #[test]
    fn degenerate_pmf_always_yields_symbol_zero() {
        let m = LikelihoodModel::categorical(0, vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.5, 0.5]])
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(m.sample(0, &mut rng).unwrap(), Observation::Symbol(0));
        }
    }

    #[test]
    fn gaussian_sample_mean_is_close_to_zero() {
        let m = LikelihoodModel::gaussian(0, vec![0.0, 1.0], 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            match m.sample(0, &mut rng).unwrap() {
                Observation::Real(x) => sum += x,
                other => panic!("unexpected {other:?}"),
            }
        }
        assert!((sum / n as f64).abs() < 0.02);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let m = binary();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| m.sample(1, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
    }

    #[test]
    fn log_likelihood_ratio_examples() {
        let m = binary();
        assert_eq!(
            m.log_likelihood_ratio(Observation::Symbol(1), 1, 1)
                .unwrap(),
            0.0
        );
        let r = m
            .log_likelihood_ratio(Observation::Symbol(0), 0, 1)
            .unwrap();
        // direct ratio arithmetic: 0.8 / 0.2 = 4
        assert!((r - (0.8f64 / 0.2).ln()).abs() < 1e-15);
        assert!((r - 1.3862943611198906).abs() < 1e-12);

        let g = LikelihoodModel::gaussian(0, vec![0.0, 1.0], 1.0).unwrap();
        assert_eq!(
            g.log_likelihood_ratio(Observation::Real(0.5), 0, 1)
                .unwrap(),
            0.0
        );
    }

    #[test]
    fn kl_examples() {
        let m = binary();
        assert_eq!(m.kl_divergence(0, 0).unwrap(), 0.0);
        // exact summation: 0.8 ln(0.8/0.2) + 0.2 ln(0.2/0.8)
        let oracle = 0.8 * (0.8f64 / 0.2).ln() + 0.2 * (0.2f64 / 0.8).ln();
        assert!((m.kl_divergence(0, 1).unwrap() - oracle).abs() < 1e-15);
        assert!((oracle - 0.8317766166719343).abs() < 1e-12);

        let g = LikelihoodModel::gaussian(0, vec![0.0, 1.0], 1.0).unwrap();
        assert!((g.kl_divergence(0, 1).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gaussian_kl_matches_quadrature() {
        let g = LikelihoodModel::gaussian(0, vec![0.3, -1.1], 2.0).unwrap();
        // trapezoid rule on ∫ p_a (ln p_a − ln p_b)
        let (lo, hi, steps) = (-30.0, 30.0, 200_000);
        let h = (hi - lo) / steps as f64;
        let mut acc = 0.0;
        for i in 0..=steps {
            let x = lo + i as f64 * h;
            let la = g.log_density(Observation::Real(x), 0).unwrap();
            let lb = g.log_density(Observation::Real(x), 1).unwrap();
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            acc += w * la.exp() * (la - lb);
        }
        acc *= h;
        assert!((g.kl_divergence(0, 1).unwrap() - acc).abs() < 1e-8);
    }

    #[test]
    fn bounded_likelihood_examples() {
        let b = check_bounded_likelihoods(&[binary()]).unwrap();
        assert!((b.b - 4f64.ln()).abs() < 1e-12);
        assert!(!b.unbounded_warning);

        let same = LikelihoodModel::categorical(0, vec![vec![0.3, 0.7], vec![0.3, 0.7]]).unwrap();
        assert_eq!(check_bounded_likelihoods(&[same]).unwrap().b, 0.0);

        let g = LikelihoodModel::gaussian(0, vec![0.0, 1.0], 1.0).unwrap();
        let b = check_bounded_likelihoods(&[binary(), g]).unwrap();
        assert!(b.b.is_infinite());
        assert!(b.unbounded_warning);
    }

    #[test]
    fn zero_probability_on_shared_support_violates_assumption() {
        let m = LikelihoodModel::categorical(3, vec![vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        assert!(matches!(
            check_bounded_likelihoods(&[m]),
            Err(Error::AssumptionViolation(_))
        ));
        // a symbol nobody emits is outside the support and is ignored
        let m = LikelihoodModel::categorical(0, vec![vec![0.5, 0.5, 0.0], vec![0.25, 0.75, 0.0]])
            .unwrap();
        assert!(check_bounded_likelihoods(&[m]).is_ok());
    }

    #[test]
    fn optimal_set_examples() {
        let g = LikelihoodModel::gaussian(0, vec![0.0, 1.0, 2.0], 1.0).unwrap();
        assert_eq!(g.optimal_set(1).unwrap(), vec![1]);

        let twins = LikelihoodModel::categorical(0, vec![vec![0.4, 0.6], vec![0.4, 0.6]]).unwrap();
        assert_eq!(twins.optimal_set(0).unwrap(), vec![0, 1]);

        let dup =
            LikelihoodModel::categorical(0, vec![vec![0.6, 0.4], vec![0.1, 0.9], vec![0.1, 0.9]])
                .unwrap();
        assert_eq!(dup.optimal_set(1).unwrap(), vec![1, 2]);
        let truth = AgentTruth::derive(&dup, 2).unwrap();
        assert!(truth.optimal_set.contains(&truth.true_state));
    }

    #[test]
    fn invalid_models_are_rejected() {
        assert!(LikelihoodModel::categorical(0, vec![vec![0.5, 0.6], vec![0.5, 0.5]]).is_err());
        assert!(LikelihoodModel::categorical(0, vec![vec![1.0]]).is_err());
        assert!(LikelihoodModel::gaussian(0, vec![0.0, 1.0], 0.0).is_err());
        assert!(binary()
            .sample(2, &mut ChaCha8Rng::seed_from_u64(0))
            .is_err());
        assert!(binary().log_density(Observation::Real(0.1), 0).is_err());
        assert!(binary().log_density(Observation::Symbol(7), 0).is_err());
    }

    #[test]
    fn model_spec_forms() {
        let json = r#"{
            "hypotheses": ["bus", "car"],
            "agents": [
                {"family": "categorical", "pmfs": [[0.8, 0.2], [0.2, 0.8]], "true_state": 0},
                {"family": "gaussian", "means": [0.0, 1.0], "variance": 1.0, "true_state": 1}
            ]
        }"#;
        let spec: ModelSpec = serde_json::from_str(json).unwrap();
        let r = spec.resolve().unwrap();
        assert_eq!(r.hypotheses.labels(), &["bus", "car"]);
        assert_eq!(r.true_states, Some(vec![0, 1]));
        assert_eq!(r.models[1].agent_id(), 1);

        let shared = ModelSpec::shared(
            LikelihoodFamily::Categorical {
                pmfs: vec![vec![0.8, 0.2], vec![0.2, 0.8]],
            },
            4,
        );
        let text = serde_json::to_string(&shared).unwrap();
        let back: ModelSpec = serde_json::from_str(&text).unwrap();
        let r = back.resolve().unwrap();
        assert_eq!(r.models.len(), 4);
        assert_eq!(r.true_states, None);

        let both = ModelSpec {
            agents: Some(vec![]),
            ..shared
        };
        assert!(matches!(both.resolve(), Err(Error::Config(_))));
    }
}
