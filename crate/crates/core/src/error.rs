//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error(
        "could not build a connected {kind} graph after {attempts} attempts (check {parameter})"
    )]
    Unconnectable {
        kind: String,
        parameter: String,
        attempts: usize,
    },

    #[error("consensus matrix is not symmetric (max asymmetry {max_abs:e})")]
    AsymmetricMatrix { max_abs: f64 },

    #[error("chain does not mix: slem = {slem} >= 1")]
    PeriodicChain { slem: f64 },

    #[error(
        "subgradient norm {norm} exceeds the assumed bound {bound} at node {node}, step {step}"
    )]
    GradientBoundExceeded {
        norm: f64,
        bound: f64,
        node: usize,
        step: usize,
    },

    #[error("horizon T = {horizon} is below the first round length T1 = {t1}: zero rounds")]
    HorizonTooSmall { horizon: usize, t1: usize },

    #[error("Lipschitz bound undefined: {0}")]
    UnboundedSet(String),

    #[error("reference solver did not converge: {0}")]
    ReferenceNonConvergence(String),

    #[error("reference solution invalidated: gap {gap:e} below -{tol:e}")]
    ReferenceInvalidated { gap: f64, tol: f64 },

    #[error("{check} violated at {location}: value {value:e} > limit {limit:e}")]
    BoundViolated {
        check: String,
        location: String,
        value: f64,
        limit: f64,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("{stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed CSV at line {line}: {reason}")]
    Csv { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wrap an error with the name of the pipeline stage it occurred in.
    pub fn at_stage(self, stage: &str) -> Error {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }
}
