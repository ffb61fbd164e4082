//! Inverse learning of heterogeneous states from public-belief log-ratios.
//!
//! The public beliefs obey the linear recursion `Λ_i = (1−δ) Aᵀ Λ_{i−1} + δ 𝓛_i`. The
//! estimator runs a stochastic-gradient identification of `A` on that recursion, with
//! the regressor centered over a sliding window of `M` past log-ratio matrices, and
//! recovers the expected likelihood log-ratios `𝓛̄` as a window average of the implied
//! innovations. Differences of the columns of `𝓛̂` estimate the informativeness
//! `d_k(θ, θ')`, and each agent's hypothesis set is the set of hypotheses that beat
//! the largest number of alternatives.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{lambda_from_beliefs, Beliefs};
use crate::models::{LikelihoodFamily, LikelihoodModel, PROB_FLOOR};

/// Leading-order residual terms of the error bound; their constants are unknown.
pub const RESIDUAL_ORDERS: &str = "O(mu/delta^2) + O(1/(delta^5 M^2))";

/// Window sums are recomputed from scratch this often to stop rounding drift.
const WINDOW_SUM_REFRESH: usize = 4096;

/// Starting point of the estimator.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitMode {
    /// `Â_0 = 1/n` everywhere, `𝓛̂_0 = 0`.
    #[default]
    Uniform,
    /// Explicit `Â_0` (n×n) and `𝓛̂_0` (n×(H−1)).
    Given { a: DMatrix<f64>, l: DMatrix<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InverseConfig {
    /// Learning rate of the combination-matrix update.
    pub step_mu: f64,
    /// Adaptation parameter of the observed network (known to the observer).
    pub delta: f64,
    /// Window size `M`.
    pub batch_m: usize,
    /// Relative change of `Â` over the last `M` updates that counts as converged.
    pub tol: f64,
    /// Cap on the number of belief matrices consumed.
    pub max_iter: Option<usize>,
    #[serde(skip)]
    pub init: InitMode,
}

impl Default for InverseConfig {
    fn default() -> Self {
        Self {
            step_mu: 1e-3,
            delta: 0.1,
            batch_m: 200,
            tol: 1e-6,
            max_iter: None,
            init: InitMode::Uniform,
        }
    }
}

impl InverseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_mu >= 0.0) || !self.step_mu.is_finite() {
            return Err(Error::Config(format!(
                "step size {} must be >= 0",
                self.step_mu
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!(
                "delta {} is outside (0, 1)",
                self.delta
            )));
        }
        if self.batch_m == 0 {
            return Err(Error::Config("window size M must be at least 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::Config(format!(
                "tolerance {} must be >= 0",
                self.tol
            )));
        }
        Ok(())
    }

    /// Belief matrices buffered before the first update.
    pub fn warm_up(&self) -> usize {
        self.batch_m + 1
    }
}

/// One combination-matrix step:
/// `Â_i = Â_{i−1} + μ(1−δ)(Λ_{i−1} − mean)(Λ_iᵀ − (1−δ)Λ_{i−1}ᵀ Â_{i−1} − δ 𝓛̂_{i−1}ᵀ)`,
/// where `mean` is the average of `Λ_{j−1}` over `j = i−M … i−1`.
pub fn update_combination(
    a_prev: &DMatrix<f64>,
    l_prev: &DMatrix<f64>,
    lambda_i: &DMatrix<f64>,
    lambda_prev: &DMatrix<f64>,
    window_mean: &DMatrix<f64>,
    step_mu: f64,
    delta: f64,
) -> Result<DMatrix<f64>> {
    let centered = lambda_prev - window_mean;
    let residual = lambda_i.transpose()
        - lambda_prev.tr_mul(a_prev) * (1.0 - delta)
        - l_prev.transpose() * delta;
    let next = a_prev + centered * residual * (step_mu * (1.0 - delta));
    if next.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical(
            "combination-matrix estimate became non-finite".into(),
        ));
    }
    Ok(next)
}

/// `𝓛̂_i = (δM)⁻¹ (Σ_j Λ_j − (1−δ) Â_iᵀ Σ_j Λ_{j−1})`, the sums running over
/// `j = i−M+1 … i`.
pub fn update_log_likelihoods(
    a_i: &DMatrix<f64>,
    sum_current: &DMatrix<f64>,
    sum_previous: &DMatrix<f64>,
    batch_m: usize,
    delta: f64,
) -> Result<DMatrix<f64>> {
    let l = (sum_current - a_i.tr_mul(sum_previous) * (1.0 - delta)) / (delta * batch_m as f64);
    if l.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical(
            "log-likelihood estimate became non-finite".into(),
        ));
    }
    Ok(l)
}

/// Running state of the estimator.
#[derive(Debug, Clone)]
pub struct InverseState {
    a_est: DMatrix<f64>,
    l_est: DMatrix<f64>,
    /// The last `M+1` log-ratio matrices `Λ_{i−M−1} … Λ_{i−1}`.
    window: VecDeque<DMatrix<f64>>,
    window_sum: DMatrix<f64>,
    step_mu: f64,
    delta: f64,
    batch_m: usize,
    /// Belief matrices consumed so far.
    iteration: usize,
    updates: usize,
}

impl InverseState {
    pub fn new(n_agents: usize, n_hypotheses: usize, config: &InverseConfig) -> Result<Self> {
        config.validate()?;
        if n_agents == 0 || n_hypotheses < 2 {
            return Err(Error::Contract(format!(
                "need n >= 1 agents and H >= 2 hypotheses, got n={n_agents}, H={n_hypotheses}"
            )));
        }
        let (a_est, l_est) = match &config.init {
            InitMode::Uniform => (
                DMatrix::from_element(n_agents, n_agents, 1.0 / n_agents as f64),
                DMatrix::zeros(n_agents, n_hypotheses - 1),
            ),
            InitMode::Given { a, l } => {
                if a.shape() != (n_agents, n_agents) || l.shape() != (n_agents, n_hypotheses - 1) {
                    return Err(Error::Contract(format!(
                        "initial estimates have shapes {:?} and {:?}",
                        a.shape(),
                        l.shape()
                    )));
                }
                (a.clone(), l.clone())
            }
        };
        Ok(Self {
            a_est,
            l_est,
            window: VecDeque::with_capacity(config.batch_m + 1),
            window_sum: DMatrix::zeros(n_agents, n_hypotheses - 1),
            step_mu: config.step_mu,
            delta: config.delta,
            batch_m: config.batch_m,
            iteration: 0,
            updates: 0,
        })
    }

    pub fn a_est(&self) -> &DMatrix<f64> {
        &self.a_est
    }

    pub fn l_est(&self) -> &DMatrix<f64> {
        &self.l_est
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    pub fn is_warm(&self) -> bool {
        self.window.len() == self.batch_m + 1
    }

    fn require_warm(&self) -> Result<()> {
        if !self.is_warm() {
            return Err(Error::WarmUp {
                needed: self.batch_m + 1,
                have: self.window.len(),
            });
        }
        Ok(())
    }

    fn check_shape(&self, lambda: &DMatrix<f64>) -> Result<()> {
        if lambda.shape() != self.l_est.shape() {
            return Err(Error::Contract(format!(
                "log-ratio matrix is {:?}, estimator expects {:?}",
                lambda.shape(),
                self.l_est.shape()
            )));
        }
        if lambda.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("non-finite log-ratio matrix".into()));
        }
        Ok(())
    }

    /// `Â_i` for the incoming `Λ_i`, without modifying the state.
    pub fn update_a(&self, lambda_i: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.require_warm()?;
        self.check_shape(lambda_i)?;
        let lambda_prev = self.window.back().expect("window is full");
        let window_mean = (&self.window_sum - lambda_prev) / self.batch_m as f64;
        update_combination(
            &self.a_est,
            &self.l_est,
            lambda_i,
            lambda_prev,
            &window_mean,
            self.step_mu,
            self.delta,
        )
    }

    /// `𝓛̂_i` for the incoming `Λ_i` given the freshly updated `Â_i`.
    pub fn update_l(&self, a_i: &DMatrix<f64>, lambda_i: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.require_warm()?;
        self.check_shape(lambda_i)?;
        let oldest = &self.window[0];
        let sum_previous = &self.window_sum - oldest;
        let sum_current = &sum_previous - &self.window[1] + lambda_i;
        update_log_likelihoods(a_i, &sum_current, &sum_previous, self.batch_m, self.delta)
    }

    fn push_window(&mut self, lambda: DMatrix<f64>) {
        self.window_sum += &lambda;
        self.window.push_back(lambda);
        if self.window.len() > self.batch_m + 1 {
            let old = self.window.pop_front().expect("non-empty");
            self.window_sum -= old;
        }
        if self.iteration % WINDOW_SUM_REFRESH == 0 {
            let mut exact = DMatrix::zeros(self.window_sum.nrows(), self.window_sum.ncols());
            for m in &self.window {
                exact += m;
            }
            self.window_sum = exact;
        }
    }

    /// Consumes `Λ_i`. Returns `‖Â_i − Â_{i−1}‖_F` when an update was performed, `None`
    /// while the window is still filling.
    pub fn push_lambda(&mut self, lambda_i: &DMatrix<f64>) -> Result<Option<f64>> {
        self.check_shape(lambda_i)?;
        let change = if self.is_warm() {
            let a_i = self.update_a(lambda_i)?;
            let l_i = self.update_l(&a_i, lambda_i)?;
            let change = (&a_i - &self.a_est).norm();
            self.a_est = a_i;
            self.l_est = l_i;
            self.updates += 1;
            Some(change)
        } else {
            None
        };
        self.iteration += 1;
        self.push_window(lambda_i.clone());
        Ok(change)
    }

    /// Computes `Λ_i` from public beliefs and consumes it.
    pub fn push_public(&mut self, public: &Beliefs) -> Result<Option<f64>> {
        let lambda = lambda_from_beliefs(public, self.iteration + 1)?;
        self.push_lambda(&lambda.entries)
    }
}

/// Expected likelihood log-ratios
/// `[𝓛̄]_{k,j} = D_KL(L_k(θ_k★)‖L_k(θ_j)) − D_KL(L_k(θ_k★)‖L_k(θ_0))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedLogRatio {
    pub entries: DMatrix<f64>,
}

pub fn expected_log_ratio(
    models: &[LikelihoodModel],
    truths: &[usize],
) -> Result<ExpectedLogRatio> {
    check_models_truths(models, truths)?;
    let h = models[0].n_hypotheses();
    let mut entries = DMatrix::zeros(models.len(), h - 1);
    for (k, (model, &t)) in models.iter().zip(truths).enumerate() {
        let to_reference = model.kl_divergence(t, 0)?;
        for j in 1..h {
            entries[(k, j - 1)] = model.kl_divergence(t, j)? - to_reference;
        }
    }
    Ok(ExpectedLogRatio { entries })
}

fn check_models_truths(models: &[LikelihoodModel], truths: &[usize]) -> Result<()> {
    if models.is_empty() || models.len() != truths.len() {
        return Err(Error::Contract(format!(
            "{} models for {} true states",
            models.len(),
            truths.len()
        )));
    }
    let h = models[0].n_hypotheses();
    if models.iter().any(|m| m.n_hypotheses() != h) {
        return Err(Error::Contract(
            "agents disagree on the number of hypotheses".into(),
        ));
    }
    if let Some(t) = truths.iter().find(|&&t| t >= h) {
        return Err(Error::Contract(format!(
            "true state {t} out of range for H={h}"
        )));
    }
    Ok(())
}

/// Per-agent antisymmetric `H×H` informativeness estimates `d̂_k(θ_{j1}, θ_{j2})`.
#[derive(Debug, Clone, PartialEq)]
pub struct Informativeness {
    pub values: Vec<DMatrix<f64>>,
}

/// `d̂_k(θ_{j1}, θ_{j2}) = [𝓛̂]_{k,j2} − [𝓛̂]_{k,j1}`, with an implicit zero column for θ_0.
pub fn informativeness(l_est: &DMatrix<f64>) -> Informativeness {
    let h = l_est.ncols() + 1;
    let values = l_est
        .row_iter()
        .map(|row| {
            let full: Vec<f64> = std::iter::once(0.0).chain(row.iter().copied()).collect();
            DMatrix::from_fn(h, h, |j1, j2| full[j2] - full[j1])
        })
        .collect();
    Informativeness { values }
}

/// Estimated hypothesis sets and malicious flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisEstimate {
    pub sets: Vec<Vec<usize>>,
    /// `positive_counts[k][j] = #{θ' : d̂_k(θ_j, θ') > 0}`.
    pub positive_counts: Vec<Vec<usize>>,
    /// Agent's set is disjoint from `reference`.
    pub malicious: Vec<bool>,
    /// Network-majority state set the flags are relative to.
    pub reference: Vec<usize>,
}

/// `Θ̂_k = argmax_{θ_{j1}} Σ_{θ_{j2}} 𝟙{d̂_k(θ_{j1}, θ_{j2}) > 0}`, returning every
/// maximizer. Agents whose set misses `reference` are flagged; without a reference the
/// hypothesis that appears in the most sets is used (ties to the lowest index).
pub fn estimate_hypothesis_sets(
    d: &Informativeness,
    reference: Option<&[usize]>,
) -> HypothesisEstimate {
    let mut sets = Vec::with_capacity(d.values.len());
    let mut positive_counts = Vec::with_capacity(d.values.len());
    for dk in &d.values {
        let counts: Vec<usize> = dk
            .row_iter()
            .map(|row| row.iter().filter(|&&v| v > 0.0).count())
            .collect();
        let best = counts.iter().copied().max().unwrap_or(0);
        sets.push(
            counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c == best)
                .map(|(j, _)| j)
                .collect::<Vec<_>>(),
        );
        positive_counts.push(counts);
    }
    let reference = match reference {
        Some(r) => r.to_vec(),
        None => {
            let h = d.values.first().map_or(0, |m| m.nrows());
            let mut votes = vec![0usize; h];
            for set in &sets {
                for &j in set {
                    votes[j] += 1;
                }
            }
            let top = votes.iter().copied().max().unwrap_or(0);
            votes.iter().position(|&v| v == top).into_iter().collect()
        }
    };
    let malicious = sets
        .iter()
        .map(|s| !s.iter().any(|j| reference.contains(j)))
        .collect();
    HypothesisEstimate {
        sets,
        positive_counts,
        malicious,
        reference,
    }
}

/// Leading term of the wrong-hypothesis probability bound for one (agent, θ) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBound {
    pub agent: usize,
    pub wrong_hypothesis: usize,
    pub batch_m: usize,
    pub trace_r: f64,
    /// `(4/M) Tr(R_𝓛) Σ_{θ★∈Θ_k★} 1/D_KL(L_k(θ★)‖L_k(θ))`.
    pub leading_term: f64,
    pub residual_orders: String,
}

pub fn wrong_hypothesis_bound(
    model: &LikelihoodModel,
    true_state: usize,
    wrong: usize,
    batch_m: usize,
    trace_r: f64,
) -> Result<ErrorBound> {
    if batch_m == 0 {
        return Err(Error::Contract("window size M must be at least 1".into()));
    }
    if !(trace_r >= 0.0) {
        return Err(Error::Contract(format!("Tr(R) = {trace_r} must be >= 0")));
    }
    let optimal = model.optimal_set(true_state)?;
    if wrong >= model.n_hypotheses() {
        return Err(Error::Contract(format!("hypothesis {wrong} out of range")));
    }
    if optimal.contains(&wrong) {
        return Err(Error::Domain(format!(
            "hypothesis {wrong} is in the optimal set of agent {}; the bound is undefined",
            model.agent_id()
        )));
    }
    let mut inverse_kl = 0.0;
    for &star in &optimal {
        let kl = model.kl_divergence(star, wrong)?;
        if !(kl > 0.0) {
            return Err(Error::Domain(format!(
                "zero divergence between {star} and {wrong} for agent {}",
                model.agent_id()
            )));
        }
        inverse_kl += 1.0 / kl;
    }
    Ok(ErrorBound {
        agent: model.agent_id(),
        wrong_hypothesis: wrong,
        batch_m,
        trace_r,
        leading_term: 4.0 / batch_m as f64 * trace_r * inverse_kl,
        residual_orders: RESIDUAL_ORDERS.to_string(),
    })
}

/// Bounds for every (agent, θ ∉ Θ_k★) pair.
pub fn all_bounds(
    models: &[LikelihoodModel],
    truths: &[usize],
    batch_m: usize,
    trace_r: f64,
) -> Result<Vec<ErrorBound>> {
    check_models_truths(models, truths)?;
    let mut out = Vec::new();
    for (model, &t) in models.iter().zip(truths) {
        let optimal = model.optimal_set(t)?;
        for wrong in (0..model.n_hypotheses()).filter(|j| !optimal.contains(j)) {
            out.push(wrong_hypothesis_bound(model, t, wrong, batch_m, trace_r)?);
        }
    }
    Ok(out)
}

fn categorical_ratio_vectors(pmfs: &[Vec<f64>], symbol: usize) -> Vec<f64> {
    let l0 = pmfs[0][symbol].max(PROB_FLOOR).ln();
    pmfs[1..]
        .iter()
        .map(|row| l0 - row[symbol].max(PROB_FLOOR).ln())
        .collect()
}

/// `E‖𝓛_{k,·} − 𝓛̄_{k,·}‖²` for one categorical agent by summing over the alphabet.
pub fn trace_r_exact_categorical(pmfs: &[Vec<f64>], true_state: usize) -> f64 {
    let alphabet = pmfs[0].len();
    let p = &pmfs[true_state];
    let vectors: Vec<Vec<f64>> = (0..alphabet)
        .map(|s| categorical_ratio_vectors(pmfs, s))
        .collect();
    let h1 = pmfs.len() - 1;
    let mean: Vec<f64> = (0..h1)
        .map(|j| {
            (0..alphabet)
                .filter(|&s| p[s] > 0.0)
                .map(|s| p[s] * vectors[s][j])
                .sum()
        })
        .collect();
    (0..alphabet)
        .filter(|&s| p[s] > 0.0)
        .map(|s| {
            p[s] * vectors[s]
                .iter()
                .zip(&mean)
                .map(|(v, m)| (v - m) * (v - m))
                .sum::<f64>()
        })
        .sum()
}

/// Monte-Carlo estimate of `E‖𝓛_i − 𝓛̄‖_F²` and its standard error.
pub fn trace_r_monte_carlo(
    models: &[LikelihoodModel],
    truths: &[usize],
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if samples == 0 {
        return Err(Error::Contract("need at least one sample".into()));
    }
    let expected = expected_log_ratio(models, truths)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = models[0].n_hypotheses();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let mut dev = 0.0;
        for (k, (model, &t)) in models.iter().zip(truths).enumerate() {
            let obs = model.sample(t, &mut rng)?;
            for j in 1..h {
                let d = model.log_likelihood_ratio(obs, 0, j)? - expected.entries[(k, j - 1)];
                dev += d * d;
            }
        }
        sum += dev;
        sum_sq += dev * dev;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = if samples > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok((mean, (var / n).sqrt()))
}

/// `Tr(R_𝓛) = E‖𝓛_i − 𝓛̄‖_F²`. Rows are independent across agents, so categorical
/// agents contribute their exact alphabet sum and only the remaining agents are
/// sampled.
pub fn estimate_trace_r(
    models: &[LikelihoodModel],
    truths: &[usize],
    samples: usize,
    seed: u64,
) -> Result<f64> {
    check_models_truths(models, truths)?;
    if samples == 0 {
        return Err(Error::Contract("need at least one sample".into()));
    }
    let mut total = 0.0;
    let mut sampled_models = Vec::new();
    let mut sampled_truths = Vec::new();
    for (model, &t) in models.iter().zip(truths) {
        match model.family() {
            LikelihoodFamily::Categorical { pmfs } => total += trace_r_exact_categorical(pmfs, t),
            LikelihoodFamily::Gaussian { .. } => {
                sampled_models.push(model.clone());
                sampled_truths.push(t);
            }
        }
    }
    if !sampled_models.is_empty() {
        total += trace_r_monte_carlo(&sampled_models, &sampled_truths, samples, seed)?.0;
    }
    Ok(total)
}

/// Ground truth for diagnostics.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub a: DMatrix<f64>,
    pub expected: ExpectedLogRatio,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `‖Â_i − Â_{i−1}‖_F` per update.
    pub a_change: Vec<f64>,
    /// `‖Â_i − A‖_F` per update, with ground truth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_error: Option<Vec<f64>>,
    /// `‖𝓛̂_i − 𝓛̄‖_F` per update, with ground truth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_error: Option<Vec<f64>>,
    pub iterations_consumed: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct InverseOutcome {
    pub a_est: DMatrix<f64>,
    pub l_est: DMatrix<f64>,
    pub informativeness: Informativeness,
    pub hypotheses: HypothesisEstimate,
    pub diagnostics: Diagnostics,
}

/// Optional extras for [`run_inverse`].
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub ground_truth: Option<GroundTruth>,
    /// Network-majority states used for malicious flags.
    pub reference_states: Option<Vec<usize>>,
}

/// Runs the estimator over a stream of public beliefs until the relative change of `Â`
/// over the last `M` updates drops below `tol`, `max_iter` beliefs have been consumed,
/// or the stream ends.
pub fn run_inverse<I>(
    publics: I,
    config: &InverseConfig,
    options: &RunOptions,
) -> Result<InverseOutcome>
where
    I: IntoIterator<Item = Beliefs>,
{
    let lambdas = publics.into_iter().enumerate().map(|(i, p)| {
        lambda_from_beliefs(&p, i + 1)
            .map(|l| l.entries)
            .map_err(|e| e.at_iteration(i + 1))
    });
    run_inverse_on_lambdas(lambdas, config, options)
}

/// [`run_inverse`] over precomputed `Λ_i` matrices.
pub fn run_inverse_on_lambdas<I>(
    lambdas: I,
    config: &InverseConfig,
    options: &RunOptions,
) -> Result<InverseOutcome>
where
    I: IntoIterator<Item = Result<DMatrix<f64>>>,
{
    config.validate()?;
    let mut state: Option<InverseState> = None;
    let mut diagnostics = Diagnostics {
        a_error: options.ground_truth.as_ref().map(|_| Vec::new()),
        l_error: options.ground_truth.as_ref().map(|_| Vec::new()),
        ..Diagnostics::default()
    };
    let mut history: VecDeque<DMatrix<f64>> = VecDeque::with_capacity(config.batch_m + 1);
    for lambda in lambdas {
        if config
            .max_iter
            .is_some_and(|cap| diagnostics.iterations_consumed >= cap)
        {
            break;
        }
        let lambda = lambda?;
        let iteration = diagnostics.iterations_consumed + 1;
        let st = match &mut state {
            Some(s) => s,
            None => state.insert(
                InverseState::new(lambda.nrows(), lambda.ncols() + 1, config)
                    .map_err(|e| e.at_iteration(iteration))?,
            ),
        };
        let change = st
            .push_lambda(&lambda)
            .map_err(|e| e.at_iteration(iteration))?;
        diagnostics.iterations_consumed = iteration;
        let Some(change) = change else { continue };
        diagnostics.a_change.push(change);
        if let Some(gt) = &options.ground_truth {
            if let Some(v) = diagnostics.a_error.as_mut() {
                v.push((st.a_est() - &gt.a).norm());
            }
            if let Some(v) = diagnostics.l_error.as_mut() {
                v.push((st.l_est() - &gt.expected.entries).norm());
            }
        }
        history.push_back(st.a_est().clone());
        if history.len() > config.batch_m + 1 {
            history.pop_front();
        }
        if history.len() == config.batch_m + 1 {
            let old = history.front().expect("non-empty");
            let rel = (st.a_est() - old).norm() / old.norm().max(f64::MIN_POSITIVE);
            if rel < config.tol {
                diagnostics.converged = true;
                break;
            }
        }
    }
    let state = state.ok_or_else(|| Error::InsufficientData("empty belief stream".into()))?;
    if state.updates() == 0 {
        return Err(Error::InsufficientData(format!(
            "stream supplied {} belief matrices; at least M+2 = {} are needed \
             (M+1 to fill the window, one to update)",
            state.iteration(),
            config.batch_m + 2
        )));
    }
    let d = informativeness(state.l_est());
    let hypotheses = estimate_hypothesis_sets(&d, options.reference_states.as_deref());
    Ok(InverseOutcome {
        a_est: state.a_est().clone(),
        l_est: state.l_est().clone(),
        informativeness: d,
        hypotheses,
        diagnostics,
    })
}

/// Cosmetic post-hoc view of `Â`: entries clipped to `[0, 1]` and columns renormalized.
/// Not used by the estimator itself.
pub fn cosmetic_left_stochastic(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = a.map(|x| x.clamp(0.0, 1.0));
    let n = out.nrows();
    for mut col in out.column_iter_mut() {
        let s = col.sum();
        if s > 0.0 {
            col /= s;
        } else {
            col.fill(1.0 / n as f64);
        }
    }
    out
}
