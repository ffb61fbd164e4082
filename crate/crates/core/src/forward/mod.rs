//! Adaptive social learning: local adaptive Bayesian update followed by geometric
//! averaging over the combination matrix.
//!
//! Beliefs are stored as log-probabilities with every row normalized so that
//! `logsumexp(row) = 0`. Losing hypotheses decay exponentially, so the linear domain
//! would underflow long before the log-ratios the inverse estimator needs stop being
//! informative.

mod trace;

pub use trace::{
    read_public_stream, RecordOptions, SimulationTrace, TraceMetadata, TraceStep, BELIEF_FLOOR,
};

use std::borrow::Cow;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::CombinationMatrix;
use crate::models::{validate_truths, LikelihoodModel, Observation};

/// Row-normalized belief matrix (agents × hypotheses) held in the log domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Beliefs {
    log: DMatrix<f64>,
}

impl Beliefs {
    /// Normalizes each row of unnormalized log-weights with max-subtraction.
    pub fn from_log_weights(mut log: DMatrix<f64>) -> Result<Self> {
        if log.ncols() < 2 || log.nrows() == 0 {
            return Err(Error::Contract(format!(
                "belief matrix must be n x H with n >= 1, H >= 2; got {}x{}",
                log.nrows(),
                log.ncols()
            )));
        }
        for (k, mut row) in log.row_iter_mut().enumerate() {
            let max = row.max();
            if !max.is_finite() {
                return Err(Error::Numerical(format!(
                    "belief row of agent {k} has no finite entry"
                )));
            }
            let lse = max + row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
            row.add_scalar_mut(-lse);
            if let Some(j) = row.iter().position(|x| !x.is_finite()) {
                return Err(Error::Numerical(format!(
                    "non-finite belief for agent {k}, hypothesis {j}"
                )));
            }
        }
        Ok(Self { log })
    }

    /// Builds beliefs from probabilities, flooring entries at [`BELIEF_FLOOR`].
    pub fn from_probabilities(p: &DMatrix<f64>) -> Result<Self> {
        if let Some(((k, j), v)) = p
            .iter()
            .enumerate()
            .map(|(idx, v)| ((idx % p.nrows(), idx / p.nrows()), *v))
            .find(|(_, v)| !(*v >= 0.0) || !v.is_finite())
        {
            return Err(Error::Numerical(format!(
                "belief {v} for agent {k}, hypothesis {j} is not a probability"
            )));
        }
        Self::from_log_weights(p.map(|v| v.max(BELIEF_FLOOR).ln()))
    }

    pub fn uniform(n: usize, h: usize) -> Result<Self> {
        Self::from_log_weights(DMatrix::zeros(n, h))
    }

    pub fn n_agents(&self) -> usize {
        self.log.nrows()
    }

    pub fn n_hypotheses(&self) -> usize {
        self.log.ncols()
    }

    pub fn log(&self) -> &DMatrix<f64> {
        &self.log
    }

    pub fn probabilities(&self) -> DMatrix<f64> {
        self.log.map(f64::exp)
    }

    pub fn row(&self, k: usize) -> Vec<f64> {
        self.log.row(k).iter().map(|x| x.exp()).collect()
    }
}

/// Private (post-combination) and public (post-adaptation) beliefs at iteration `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    pub private: Beliefs,
    pub public: Beliefs,
    pub iteration: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum BeliefInit {
    Uniform,
    SeededRandom { seed: u64 },
}

/// Strictly positive initial beliefs; public beliefs start equal to private ones.
pub fn init_beliefs(n: usize, h: usize, mode: BeliefInit) -> Result<BeliefState> {
    if n == 0 || h < 2 {
        return Err(Error::Contract(format!(
            "need n >= 1 agents and H >= 2 hypotheses, got n={n}, H={h}"
        )));
    }
    let private = match mode {
        BeliefInit::Uniform => Beliefs::uniform(n, h)?,
        BeliefInit::SeededRandom { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let weights = DMatrix::from_fn(n, h, |_, _| rng.random_range(0.05..1.0));
            Beliefs::from_probabilities(&weights)?
        }
    };
    Ok(BeliefState {
        public: private.clone(),
        private,
        iteration: 0,
    })
}

/// `n × H` matrix of `log L_k(ζ_k|θ)`.
pub fn log_likelihoods(
    observations: &[Observation],
    models: &[LikelihoodModel],
) -> Result<DMatrix<f64>> {
    if observations.len() != models.len() {
        return Err(Error::Contract(format!(
            "{} observations for {} agents",
            observations.len(),
            models.len()
        )));
    }
    let h = models.first().map_or(0, |m| m.n_hypotheses());
    let mut ll = DMatrix::zeros(models.len(), h);
    for (k, (model, &obs)) in models.iter().zip(observations).enumerate() {
        if model.n_hypotheses() != h {
            return Err(Error::Contract(
                "agents disagree on the number of hypotheses".into(),
            ));
        }
        for theta in 0..h {
            ll[(k, theta)] = model.log_density(obs, theta)?;
        }
    }
    Ok(ll)
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Contract(format!(
            "adaptation parameter {delta} is outside (0, 1)"
        )));
    }
    Ok(())
}

/// Adaptive Bayesian update: `ψ_k(θ) ∝ L_k(ζ_k|θ)^δ · μ_k(θ)^(1−δ)`.
pub fn adapt_step(
    beliefs: &BeliefState,
    observations: &[Observation],
    models: &[LikelihoodModel],
    delta: f64,
) -> Result<Beliefs> {
    check_delta(delta)?;
    let ll = log_likelihoods(observations, models)?;
    adapt_from_log_likelihoods(&beliefs.private, &ll, delta)
}

/// Adaptation step given precomputed log-likelihoods.
pub fn adapt_from_log_likelihoods(
    private: &Beliefs,
    log_likelihoods: &DMatrix<f64>,
    delta: f64,
) -> Result<Beliefs> {
    check_delta(delta)?;
    if log_likelihoods.shape() != private.log().shape() {
        return Err(Error::Contract(format!(
            "log-likelihoods are {:?}, beliefs are {:?}",
            log_likelihoods.shape(),
            private.log().shape()
        )));
    }
    if let Some(idx) = log_likelihoods.iter().position(|x| !x.is_finite()) {
        let n = log_likelihoods.nrows();
        return Err(Error::Numerical(format!(
            "non-finite log-likelihood for agent {}, hypothesis {}",
            idx % n,
            idx / n
        )));
    }
    Beliefs::from_log_weights(log_likelihoods * delta + private.log() * (1.0 - delta))
}

/// Geometric averaging: `μ_k(θ) ∝ Π_l ψ_l(θ)^{a_lk}`.
pub fn combine_step(public: &Beliefs, a: &CombinationMatrix) -> Result<Beliefs> {
    if a.n_agents() != public.n_agents() {
        return Err(Error::Contract(format!(
            "combination matrix is {}x{} but beliefs cover {} agents",
            a.n_agents(),
            a.n_agents(),
            public.n_agents()
        )));
    }
    Beliefs::from_log_weights(a.weights().tr_mul(public.log()))
}

/// Argmax estimate of one agent's state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateEstimate {
    pub index: usize,
    /// Another hypothesis shares the maximal belief.
    pub tie: bool,
}

/// Hypothesis with the highest belief; ties go to the lowest index and are flagged.
pub fn estimate_state(row: &[f64]) -> StateEstimate {
    let mut index = 0;
    let mut tie = false;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[index] {
            index = j;
            tie = false;
        } else if v == row[index] {
            tie = true;
        }
    }
    StateEstimate { index, tie }
}

fn estimate_all(beliefs: &Beliefs) -> Vec<StateEstimate> {
    beliefs
        .log()
        .row_iter()
        .map(|r| estimate_state(&r.iter().copied().collect::<Vec<_>>()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioKind {
    /// Log-ratios of public beliefs, `Λ`.
    Belief,
    /// Log-ratios of likelihoods of the realized observations, `𝓛`.
    Likelihood,
}

/// `n × (H−1)` matrix of log-ratios against the reference hypothesis θ_0.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRatioMatrix {
    pub entries: DMatrix<f64>,
    pub kind: RatioKind,
    pub iteration: usize,
}

impl LogRatioMatrix {
    pub fn new(entries: DMatrix<f64>, kind: RatioKind, iteration: usize) -> Result<Self> {
        if let Some(idx) = entries.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite log-ratio at agent {}, column {}",
                idx % entries.nrows().max(1),
                idx / entries.nrows().max(1) + 1
            )));
        }
        Ok(Self {
            entries,
            kind,
            iteration,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_ratios(&self) -> usize {
        self.entries.ncols()
    }
}

fn log_ratios(log: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, h) = log.shape();
    DMatrix::from_fn(n, h - 1, |k, j| log[(k, 0)] - log[(k, j + 1)])
}

/// `[Λ]_{k,j} = log(ψ_k(θ_0) / ψ_k(θ_j))` for `j = 1 … H−1`.
pub fn lambda_from_beliefs(public: &Beliefs, iteration: usize) -> Result<LogRatioMatrix> {
    LogRatioMatrix::new(log_ratios(public.log()), RatioKind::Belief, iteration)
}

/// `[𝓛]_{k,j} = log(L_k(ζ_k|θ_0) / L_k(ζ_k|θ_j))`.
pub fn likelihood_ratios(
    observations: &[Observation],
    models: &[LikelihoodModel],
    iteration: usize,
) -> Result<LogRatioMatrix> {
    if observations.len() != models.len() {
        return Err(Error::Contract(format!(
            "{} observations for {} agents",
            observations.len(),
            models.len()
        )));
    }
    let h = models.first().map_or(0, |m| m.n_hypotheses());
    let mut out = DMatrix::zeros(models.len(), h.saturating_sub(1));
    for (k, (model, &obs)) in models.iter().zip(observations).enumerate() {
        for j in 1..h {
            out[(k, j - 1)] = model.log_likelihood_ratio(obs, 0, j)?;
        }
    }
    LogRatioMatrix::new(out, RatioKind::Likelihood, iteration)
}

/// `Λ_i = (1−δ) Aᵀ Λ_{i−1} + δ 𝓛_i`.
pub fn linear_recursion_step(
    lambda_prev: &LogRatioMatrix,
    likelihood: &LogRatioMatrix,
    a: &CombinationMatrix,
    delta: f64,
) -> Result<LogRatioMatrix> {
    if lambda_prev.entries.shape() != likelihood.entries.shape()
        || a.n_agents() != lambda_prev.n_agents()
    {
        return Err(Error::Contract(format!(
            "shape mismatch: Λ {:?}, 𝓛 {:?}, A {}x{}",
            lambda_prev.entries.shape(),
            likelihood.entries.shape(),
            a.n_agents(),
            a.n_agents()
        )));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Contract(format!(
            "adaptation parameter {delta} is outside (0, 1]"
        )));
    }
    let next =
        a.weights().tr_mul(&lambda_prev.entries) * (1.0 - delta) + &likelihood.entries * delta;
    LogRatioMatrix::new(next, RatioKind::Belief, likelihood.iteration)
}

/// Everything produced by one adapt + combine iteration.
#[derive(Debug, Clone)]
pub struct Step {
    pub iteration: usize,
    pub observations: Vec<Observation>,
    pub public: Beliefs,
    pub private: Beliefs,
    pub lambda: LogRatioMatrix,
    pub likelihood_ratios: LogRatioMatrix,
    /// Argmax of the private beliefs.
    pub estimates: Vec<StateEstimate>,
}

/// Stateful simulator producing one [`Step`] per call.
///
/// Observations are drawn i.i.d. every iteration from each agent's true model, agents
/// in index order, from a single ChaCha8 stream seeded with `seed`.
pub struct Simulation<'a> {
    a: Cow<'a, CombinationMatrix>,
    models: Cow<'a, [LikelihoodModel]>,
    truths: Vec<usize>,
    delta: f64,
    rng: ChaCha8Rng,
    state: BeliefState,
}

impl<'a> Simulation<'a> {
    pub fn new(
        a: &'a CombinationMatrix,
        models: &'a [LikelihoodModel],
        truths: &[usize],
        delta: f64,
        seed: u64,
        init: BeliefInit,
    ) -> Result<Self> {
        Self::from_parts(
            Cow::Borrowed(a),
            Cow::Borrowed(models),
            truths,
            delta,
            seed,
            init,
        )
    }

    /// Like [`Simulation::new`] but takes ownership of the graph and models.
    pub fn owned(
        a: CombinationMatrix,
        models: Vec<LikelihoodModel>,
        truths: &[usize],
        delta: f64,
        seed: u64,
        init: BeliefInit,
    ) -> Result<Simulation<'static>> {
        Simulation::from_parts(Cow::Owned(a), Cow::Owned(models), truths, delta, seed, init)
    }

    fn from_parts(
        a: Cow<'a, CombinationMatrix>,
        models: Cow<'a, [LikelihoodModel]>,
        truths: &[usize],
        delta: f64,
        seed: u64,
        init: BeliefInit,
    ) -> Result<Self> {
        check_delta(delta)?;
        let n = a.n_agents();
        if models.len() != n {
            return Err(Error::Contract(format!(
                "{} likelihood models for {n} agents",
                models.len()
            )));
        }
        let h = models[0].n_hypotheses();
        if models.iter().any(|m| m.n_hypotheses() != h) {
            return Err(Error::Contract(
                "agents disagree on the number of hypotheses".into(),
            ));
        }
        validate_truths(truths, n, h).map_err(|e| Error::Contract(e.to_string()))?;
        Ok(Self {
            a,
            models,
            truths: truths.to_vec(),
            delta,
            rng: ChaCha8Rng::seed_from_u64(seed),
            state: init_beliefs(n, h, init)?,
        })
    }

    pub fn state(&self) -> &BeliefState {
        &self.state
    }

    pub fn n_agents(&self) -> usize {
        self.a.n_agents()
    }

    pub fn n_hypotheses(&self) -> usize {
        self.state.private.n_hypotheses()
    }

    pub fn step(&mut self) -> Result<Step> {
        let iteration = self.state.iteration + 1;
        self.advance(iteration)
            .map_err(|e| e.at_iteration(iteration))
    }

    fn advance(&mut self, iteration: usize) -> Result<Step> {
        let observations = self
            .models
            .iter()
            .zip(&self.truths)
            .map(|(m, &t)| m.sample(t, &mut self.rng))
            .collect::<Result<Vec<_>>>()?;
        let ll = log_likelihoods(&observations, &self.models)?;
        let public = adapt_from_log_likelihoods(&self.state.private, &ll, self.delta)?;
        let private = combine_step(&public, &self.a)?;
        let lambda = lambda_from_beliefs(&public, iteration)?;
        let likelihood_ratios = likelihood_ratios(&observations, &self.models, iteration)?;
        let estimates = estimate_all(&private);
        self.state = BeliefState {
            private: private.clone(),
            public: public.clone(),
            iteration,
        };
        Ok(Step {
            iteration,
            observations,
            public,
            private,
            lambda,
            likelihood_ratios,
            estimates,
        })
    }
}

/// Runs `iterations` adapt/combine steps from uniform beliefs. Zero iterations yield an
/// empty trace.
pub fn run_simulation(
    a: &CombinationMatrix,
    models: &[LikelihoodModel],
    truths: &[usize],
    delta: f64,
    iterations: usize,
    seed: u64,
    record: RecordOptions,
) -> Result<SimulationTrace> {
    let mut sim = Simulation::new(a, models, truths, delta, seed, BeliefInit::Uniform)?;
    let metadata = TraceMetadata::for_run(a, models, truths, delta, iterations, seed);
    let mut trace = SimulationTrace::new(metadata);
    for _ in 0..iterations {
        let step = sim.step()?;
        trace.push(step, record);
    }
    Ok(trace)
}
