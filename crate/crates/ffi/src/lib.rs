//! C ABI over the `social-inverse` crate.
//!
//! Objects are opaque handles created by `si_*_new`-style functions and released with
//! the matching `si_*_free`. Every fallible call returns an [`SiStatus`]; on failure the
//! message is available from [`si_last_error_message`] on the same thread until the
//! next failing call. Matrices cross the boundary as row-major `double` buffers whose
//! length the caller passes explicitly.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use nalgebra::DMatrix;

use social_inverse::forward::{BeliefInit, Beliefs, Simulation};
use social_inverse::graph::{generate_erdos_renyi, perron_vector, CombinationMatrix};
use social_inverse::inverse::{
    estimate_hypothesis_sets, informativeness, wrong_hypothesis_bound, InverseConfig, InverseState,
};
use social_inverse::models::{LikelihoodModel, ModelSpec};
use social_inverse::{Error, ErrorClass};

/// Result code of every fallible entry point. Values 2 to 5 match the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Data = 3,
    Numerical = 4,
    Generation = 5,
    BufferSize = 6,
    Panic = 7,
}

pub struct SiGraph(CombinationMatrix);

pub struct SiModels(Vec<LikelihoodModel>);

pub struct SiSimulation(Simulation<'static>);

pub struct SiInverse(InverseState);

enum Failure {
    Null(&'static str),
    BufferSize {
        what: &'static str,
        need: usize,
        have: usize,
    },
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn status(&self) -> SiStatus {
        match self {
            Failure::Null(_) => SiStatus::NullPointer,
            Failure::BufferSize { .. } => SiStatus::BufferSize,
            Failure::Core(e) => match e.class() {
                ErrorClass::Config => SiStatus::Config,
                ErrorClass::Data => SiStatus::Data,
                ErrorClass::Numerical => SiStatus::Numerical,
                ErrorClass::Generation => SiStatus::Generation,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Null(arg) => format!("null pointer passed for `{arg}`"),
            Failure::BufferSize { what, need, have } => {
                format!("buffer `{what}` holds {have} values, {need} are needed")
            }
            Failure::Core(e) => e.to_string(),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs were replaced");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SiStatus::Ok,
        Ok(Err(failure)) => {
            set_last_error(failure.message());
            failure.status()
        }
        Err(payload) => {
            let text = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {text}"));
            SiStatus::Panic
        }
    }
}

unsafe fn handle<'a, T>(ptr: *const T, name: &'static str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or(Failure::Null(name))
}

unsafe fn handle_mut<'a, T>(ptr: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    ptr.as_mut().ok_or(Failure::Null(name))
}

unsafe fn input<'a, T>(
    ptr: *const T,
    len: usize,
    need: usize,
    name: &'static str,
) -> Result<&'a [T], Failure> {
    if len != need {
        return Err(Failure::BufferSize {
            what: name,
            need,
            have: len,
        });
    }
    if need == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn output<'a, T>(
    ptr: *mut T,
    len: usize,
    need: usize,
    name: &'static str,
) -> Result<&'a mut [T], Failure> {
    if len < need {
        return Err(Failure::BufferSize {
            what: name,
            need,
            have: len,
        });
    }
    if need == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, need))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    let out = out.as_mut().ok_or(Failure::Null("out"))?;
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn store<T>(ptr: *mut T, value: T) {
    if let Some(slot) = ptr.as_mut() {
        *slot = value;
    }
}

fn copy_row_major(m: &DMatrix<f64>, out: &mut [f64]) {
    let c = m.ncols();
    for i in 0..m.nrows() {
        for j in 0..c {
            out[i * c + j] = m[(i, j)];
        }
    }
}

/// Message of the last failed call on this thread, or NULL. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn si_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |c| c.as_ptr())
    })
}

/// Static, NUL-terminated name of a status code.
#[no_mangle]
pub extern "C" fn si_status_name(status: SiStatus) -> *const c_char {
    let name: &'static CStr = match status {
        SiStatus::Ok => c"ok",
        SiStatus::NullPointer => c"null pointer",
        SiStatus::Config => c"configuration error",
        SiStatus::Data => c"data error",
        SiStatus::Numerical => c"numerical error",
        SiStatus::Generation => c"graph generation failed",
        SiStatus::BufferSize => c"buffer size mismatch",
        SiStatus::Panic => c"internal panic",
    };
    name.as_ptr()
}

// ---- graphs ----

/// Erdős–Rényi graph with self-loops and averaging-rule weights.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn si_graph_erdos_renyi(
    n: usize,
    p: f64,
    seed: u64,
    out: *mut *mut SiGraph,
) -> SiStatus {
    guard(|| emit(out, SiGraph(generate_erdos_renyi(n, p, seed)?)))
}

/// Combination matrix from `n × n` row-major weights; columns must sum to one.
///
/// # Safety
/// `weights` must point to `len` readable doubles and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn si_graph_from_weights(
    n: usize,
    weights: *const f64,
    len: usize,
    out: *mut *mut SiGraph,
) -> SiStatus {
    guard(|| {
        let w = input(weights, len, n * n, "weights")?;
        let a = CombinationMatrix::new(DMatrix::from_row_slice(n, n, w))?;
        emit(out, SiGraph(a))
    })
}

/// Number of agents, or 0 for a NULL handle.
///
/// # Safety
/// `graph` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn si_graph_n_agents(graph: *const SiGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.n_agents())
}

/// Copies the `n × n` weights in row-major order.
///
/// # Safety
/// `graph` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn si_graph_weights(
    graph: *const SiGraph,
    out: *mut f64,
    len: usize,
) -> SiStatus {
    guard(|| {
        let g = handle(graph, "graph")?;
        let n = g.0.n_agents();
        copy_row_major(g.0.weights(), output(out, len, n * n, "out")?);
        Ok(())
    })
}

/// Perron vector of the graph, normalized to sum to one.
///
/// # Safety
/// `graph` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn si_graph_perron_vector(
    graph: *const SiGraph,
    tol: f64,
    out: *mut f64,
    len: usize,
) -> SiStatus {
    guard(|| {
        let g = handle(graph, "graph")?;
        let u = perron_vector(&g.0, tol)?;
        output(out, len, g.0.n_agents(), "out")?.copy_from_slice(u.as_slice());
        Ok(())
    })
}

/// Highest-degree agent.
///
/// # Safety
/// `graph` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn si_graph_most_central(graph: *const SiGraph, out: *mut usize) -> SiStatus {
    guard(|| {
        let g = handle(graph, "graph")?;
        *handle_mut(out, "out")? = g.0.most_central();
        Ok(())
    })
}

/// # Safety
/// `graph` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn si_graph_free(graph: *mut SiGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

// ---- likelihood models ----

/// Models from a JSON model specification (the same format the CLI reads).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn si_models_from_json(
    json: *const c_char,
    out: *mut *mut SiModels,
) -> SiStatus {
    guard(|| {
        if json.is_null() {
            return Err(Failure::Null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Error::Parse(format!("model spec is not UTF-8: {e}")))?;
        let spec: ModelSpec = serde_json::from_str(text).map_err(Error::from)?;
        emit(out, SiModels(spec.resolve()?.models))
    })
}

/// `n_agents` agents sharing one categorical family; `pmfs` is `n_hypotheses × alphabet`
/// row-major.
///
/// # Safety
/// `pmfs` must point to `len` readable doubles and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn si_models_categorical(
    n_agents: usize,
    n_hypotheses: usize,
    alphabet: usize,
    pmfs: *const f64,
    len: usize,
    out: *mut *mut SiModels,
) -> SiStatus {
    guard(|| {
        let flat = input(pmfs, len, n_hypotheses * alphabet, "pmfs")?;
        let rows: Vec<Vec<f64>> = flat.chunks(alphabet.max(1)).map(<[f64]>::to_vec).collect();
        let models = (0..n_agents)
            .map(|k| LikelihoodModel::categorical(k, rows.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        emit(out, SiModels(models))
    })
}

/// # Safety
/// `models` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn si_models_n_agents(models: *const SiModels) -> usize {
    models.as_ref().map_or(0, |m| m.0.len())
}

/// # Safety
/// `models` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn si_models_n_hypotheses(models: *const SiModels) -> usize {
    models
        .as_ref()
        .and_then(|m| m.0.first())
        .map_or(0, |m| m.n_hypotheses())
}

/// Leading term of the wrong-hypothesis bound for `agent` and hypothesis `wrong`.
///
/// # Safety
/// `models` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn si_error_bound(
    models: *const SiModels,
    agent: usize,
    true_state: usize,
    wrong: usize,
    batch_m: usize,
    trace_r: f64,
    out: *mut f64,
) -> SiStatus {
    guard(|| {
        let m = handle(models, "models")?;
        let model = m.0.get(agent).ok_or_else(|| {
            Error::Contract(format!(
                "agent {agent} out of range for {} agents",
                m.0.len()
            ))
        })?;
        *handle_mut(out, "out")? =
            wrong_hypothesis_bound(model, true_state, wrong, batch_m, trace_r)?.leading_term;
        Ok(())
    })
}

/// # Safety
/// `models` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn si_models_free(models: *mut SiModels) {
    if !models.is_null() {
        drop(Box::from_raw(models));
    }
}

// ---- forward simulation ----

/// Simulation from uniform beliefs. The graph and models are copied, so both handles
/// may be freed afterwards.
///
/// # Safety
/// `graph` and `models` must be live handles, `truths` must point to `n_truths`
/// readable values and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn si_simulation_new(
    graph: *const SiGraph,
    models: *const SiModels,
    truths: *const usize,
    n_truths: usize,
    delta: f64,
    seed: u64,
    out: *mut *mut SiSimulation,
) -> SiStatus {
    guard(|| {
        let g = handle(graph, "graph")?;
        let m = handle(models, "models")?;
        let t = input(truths, n_truths, g.0.n_agents(), "truths")?;
        let sim = Simulation::owned(
            g.0.clone(),
            m.0.clone(),
            t,
            delta,
            seed,
            BeliefInit::Uniform,
        )?;
        emit(out, SiSimulation(sim))
    })
}

/// Runs one adapt/combine iteration. `public_out` receives the `n × H` public beliefs
/// and, when not NULL, `lambda_out` the `n × (H−1)` log-ratios `log ψ_0 − log ψ_j`.
///
/// # Safety
/// `sim` must be a live handle; the output pointers must reference the stated number of
/// writable doubles (`lambda_out` may be NULL).
#[no_mangle]
pub unsafe extern "C" fn si_simulation_step(
    sim: *mut SiSimulation,
    public_out: *mut f64,
    public_len: usize,
    lambda_out: *mut f64,
    lambda_len: usize,
) -> SiStatus {
    guard(|| {
        let s = handle_mut(sim, "sim")?;
        let (n, h) = (s.0.n_agents(), s.0.n_hypotheses());
        let public = output(public_out, public_len, n * h, "public_out")?;
        let lambda = if lambda_out.is_null() {
            None
        } else {
            Some(output(lambda_out, lambda_len, n * (h - 1), "lambda_out")?)
        };
        let step = s.0.step()?;
        copy_row_major(&step.public.probabilities(), public);
        if let Some(buf) = lambda {
            copy_row_major(&step.lambda.entries, buf);
        }
        Ok(())
    })
}

/// Number of completed iterations.
///
/// # Safety
/// `sim` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn si_simulation_iteration(sim: *const SiSimulation) -> usize {
    sim.as_ref().map_or(0, |s| s.0.state().iteration)
}

/// # Safety
/// `sim` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn si_simulation_free(sim: *mut SiSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

// ---- inverse estimator ----

/// Streaming estimator for a network of `n` agents over `h` hypotheses, starting from
/// uniform weights and zero log-likelihood ratios. `max_iter` of 0 means no cap.
///
/// # Safety
/// `out` must be writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn si_inverse_new(
    n: usize,
    h: usize,
    step_mu: f64,
    delta: f64,
    batch_m: usize,
    tol: f64,
    max_iter: usize,
    out: *mut *mut SiInverse,
) -> SiStatus {
    guard(|| {
        let config = InverseConfig {
            step_mu,
            delta,
            batch_m,
            tol,
            max_iter: (max_iter > 0).then_some(max_iter),
            ..InverseConfig::default()
        };
        emit(out, SiInverse(InverseState::new(n, h, &config)?))
    })
}

unsafe fn report_update(result: Option<f64>, updated: *mut bool, a_change: *mut f64) {
    store(updated, result.is_some());
    store(a_change, result.unwrap_or(f64::NAN));
}

/// Feeds one `n × H` row-major matrix of public beliefs. `updated` (optional) tells
/// whether the estimates moved; `a_change` (optional) receives `‖Â_i − Â_{i−1}‖_F`, or
/// NaN while warming up.
///
/// # Safety
/// `est` must be a live handle and `beliefs` must point to `len` readable doubles.
/// `updated` and `a_change` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn si_inverse_push_public(
    est: *mut SiInverse,
    beliefs: *const f64,
    len: usize,
    updated: *mut bool,
    a_change: *mut f64,
) -> SiStatus {
    guard(|| {
        let e = handle_mut(est, "est")?;
        let (n, h) = (e.0.a_est().nrows(), e.0.l_est().ncols() + 1);
        let p = DMatrix::from_row_slice(n, h, input(beliefs, len, n * h, "beliefs")?);
        let result = e.0.push_public(&Beliefs::from_probabilities(&p)?)?;
        report_update(result, updated, a_change);
        Ok(())
    })
}

/// Feeds one `n × (H−1)` row-major log-ratio matrix `Λ_i` directly.
///
/// # Safety
/// As for [`si_inverse_push_public`].
#[no_mangle]
pub unsafe extern "C" fn si_inverse_push_lambda(
    est: *mut SiInverse,
    lambda: *const f64,
    len: usize,
    updated: *mut bool,
    a_change: *mut f64,
) -> SiStatus {
    guard(|| {
        let e = handle_mut(est, "est")?;
        let (n, c) = (e.0.a_est().nrows(), e.0.l_est().ncols());
        let l = DMatrix::from_row_slice(n, c, input(lambda, len, n * c, "lambda")?);
        let result = e.0.push_lambda(&l)?;
        report_update(result, updated, a_change);
        Ok(())
    })
}

/// Number of estimator updates performed so far.
///
/// # Safety
/// `est` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn si_inverse_updates(est: *const SiInverse) -> usize {
    est.as_ref().map_or(0, |e| e.0.updates())
}

/// Copies `Â` (`n × n`, row-major).
///
/// # Safety
/// `est` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn si_inverse_a_est(
    est: *const SiInverse,
    out: *mut f64,
    len: usize,
) -> SiStatus {
    guard(|| {
        let e = handle(est, "est")?;
        let a = e.0.a_est();
        copy_row_major(a, output(out, len, a.len(), "out")?);
        Ok(())
    })
}

/// Copies `𝓛̂` (`n × (H−1)`, row-major).
///
/// # Safety
/// `est` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn si_inverse_l_est(
    est: *const SiInverse,
    out: *mut f64,
    len: usize,
) -> SiStatus {
    guard(|| {
        let e = handle(est, "est")?;
        let l = e.0.l_est();
        copy_row_major(l, output(out, len, l.len(), "out")?);
        Ok(())
    })
}

/// Estimated hypothesis sets from the current `𝓛̂`. `set_mask` (`n × H`, row-major)
/// receives 1 where a hypothesis belongs to the agent's set, `malicious` (length `n`)
/// receives 1 for flagged agents. `reference` lists the states flags are relative to;
/// pass NULL to use the hypothesis found in the most sets.
///
/// # Safety
/// `est` must be a live handle, `reference` NULL or `n_reference` readable values, and
/// both outputs must hold the stated number of writable bytes.
#[no_mangle]
pub unsafe extern "C" fn si_inverse_hypotheses(
    est: *const SiInverse,
    reference: *const usize,
    n_reference: usize,
    set_mask: *mut u8,
    set_mask_len: usize,
    malicious: *mut u8,
    malicious_len: usize,
) -> SiStatus {
    guard(|| {
        let e = handle(est, "est")?;
        let l = e.0.l_est();
        let (n, h) = (l.nrows(), l.ncols() + 1);
        let reference = if reference.is_null() {
            None
        } else {
            Some(input(reference, n_reference, n_reference, "reference")?)
        };
        let mask = output(set_mask, set_mask_len, n * h, "set_mask")?;
        let flags = output(malicious, malicious_len, n, "malicious")?;
        let estimate = estimate_hypothesis_sets(&informativeness(l), reference);
        mask.fill(0);
        for (k, set) in estimate.sets.iter().enumerate() {
            for &j in set {
                mask[k * h + j] = 1;
            }
            flags[k] = u8::from(estimate.malicious[k]);
        }
        Ok(())
    })
}

/// # Safety
/// `est` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn si_inverse_free(est: *mut SiInverse) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}
