use thiserror::Error;

/// Errors produced by the social-learning simulator and the inverse estimator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A caller broke an operation's precondition (shape mismatch, bad index, out-of-range parameter).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error(
        "failed to generate a strongly connected graph for n={n}, p={p}, seed={seed} after {attempts} attempts"
    )]
    GenerationFailed {
        n: usize,
        p: f64,
        seed: u64,
        attempts: usize,
    },

    #[error(
        "power iteration did not converge: residual {residual:e} after {iterations} iterations"
    )]
    PerronNotConverged { residual: f64, iterations: usize },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("bounded-likelihood assumption violated: {0}")]
    AssumptionViolation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("estimator not warmed up: need {needed} buffered belief matrices, have {have}")]
    WarmUp { needed: usize, have: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("at iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Error class, used for CLI exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numerical,
    Generation,
}

impl Error {
    pub fn at_iteration(self, iteration: usize) -> Error {
        match self {
            Error::AtIteration { .. } => self,
            other => Error::AtIteration {
                iteration,
                source: Box::new(other),
            },
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Contract(_) | Error::Domain(_) => ErrorClass::Config,
            Error::GenerationFailed { .. } => ErrorClass::Generation,
            Error::PerronNotConverged { .. }
            | Error::Numerical(_)
            | Error::AssumptionViolation(_) => ErrorClass::Numerical,
            Error::WarmUp { .. }
            | Error::InsufficientData(_)
            | Error::Parse(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => ErrorClass::Data,
            Error::AtIteration { source, .. } => source.class(),
        }
    }

    /// Process exit code for this error: 2 config, 3 data, 4 numerical, 5 graph generation.
    pub fn exit_code(&self) -> i32 {
        match self.class() {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numerical => 4,
            ErrorClass::Generation => 5,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iteration_wrapping_keeps_class() {
        let e = Error::Numerical("nan".into()).at_iteration(7);
        assert_eq!(e.class(), ErrorClass::Numerical);
        assert!(e.to_string().contains("iteration 7"));
        // wrapping twice keeps the innermost iteration
        let e = e.at_iteration(9);
        assert!(e.to_string().starts_with("at iteration 7"));
    }

    #[test]
    fn exit_codes_are_distinct() {
        let codes = [
            Error::Config("x".into()).exit_code(),
            Error::InsufficientData("x".into()).exit_code(),
            Error::Numerical("x".into()).exit_code(),
            Error::GenerationFailed {
                n: 2,
                p: 0.0,
                seed: 0,
                attempts: 1,
            }
            .exit_code(),
        ];
        for (i, a) in codes.iter().enumerate() {
            assert_ne!(*a, 0);
            for b in &codes[i + 1..] {
                assert_ne!(a, b);
            }
        }
    }
}
