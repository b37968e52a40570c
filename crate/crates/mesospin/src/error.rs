//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by lattice construction, state manipulation, propagation
/// and the measurement pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("system too large: {n_spins} spins exceeds limit of {limit}")]
    TooLarge { n_spins: usize, limit: usize },

    #[error("propagation failed: {substeps} substeps used, |t| = {remaining:.3e} still remaining")]
    PropagationFailed { substeps: usize, remaining: f64 },

    #[error("post-selection impossible: outcome probability {p:.3e} below floor")]
    PostSelectionImpossible { p: f64 },

    #[error("missing mixture term {bitmask:#x}")]
    MissingMixtureTerm { bitmask: u64 },

    #[error("empty transcript")]
    EmptyTranscript,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
