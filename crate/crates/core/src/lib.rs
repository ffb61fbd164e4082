//! Adaptive social learning over directed graphs and inverse recovery of each agent's
//! true-state set from publicly shared beliefs.
//!
//! * [`graph`]: left-stochastic combination matrices, random generation, Perron vectors.
//! * [`models`]: hypothesis spaces and per-agent likelihood families.
//! * [`forward`]: the adapt-then-combine belief dynamics and trace I/O.
//! * [`inverse`]: online estimation of the combination matrix and expected log-likelihood
//!   ratios, hypothesis-set recovery, and the error bound.
//! * [`harness`]: Monte-Carlo experiments and metrics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod digest;
pub mod error;
pub mod forward;
pub mod graph;
pub mod harness;
pub mod inverse;
pub mod models;
mod rows;

pub use error::{Error, ErrorClass, Result};
pub use forward::{
    run_simulation, BeliefInit, BeliefState, Beliefs, LogRatioMatrix, RecordOptions, Simulation,
    SimulationTrace,
};
pub use graph::{generate_erdos_renyi, is_strongly_connected, perron_vector, CombinationMatrix};
pub use inverse::{
    estimate_hypothesis_sets, informativeness, run_inverse, wrong_hypothesis_bound, InverseConfig,
    InverseOutcome, InverseState,
};
pub use models::{HypothesisSpace, LikelihoodFamily, LikelihoodModel, ModelSpec, Observation};
