//! Desk-scale experiments on randomly selected integer sequences.
//!
//! A sequence `Λ` is drawn by including each integer `n` independently,
//! either with Poisson multiplicity `ξ_n` of mean `w_n` or as a Bernoulli
//! selection with probability `1 − e^{−w_n}`. Depending on the growth of
//! `n·w_n` the resulting sets behave very differently: bounded `n·w_n`
//! produces Sidon-like, Bohr-non-dense sets, while `n·w_n → ∞` produces
//! dense, non-Sidon sets. The modules here implement the deterministic
//! weight sequences, the samplers, and the combinatorial, spectral and
//! probabilistic diagnostics that separate the two regimes, together with
//! a reproducible experiment harness.

pub mod analyticity;
pub mod bohr;
pub mod fourier;
pub mod harness;
pub mod martingale;
pub(crate) mod rng;
pub mod sampler;
pub mod sidon;
pub mod stats;
pub mod weights;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("horizon mismatch: {0} vs {1}")]
    HorizonMismatch(u64, u64),
    #[error("unknown experiment: {0}")]
    UnknownExperiment(String),
    #[error("empty table: {0}")]
    EmptyTable(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn capacity(msg: impl Into<String>) -> Self {
        Error::Capacity(msg.into())
    }
}
