use alloc::boxed::Box;
use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

/// Failures raised by the simulation and estimation core.
///
/// Variants up to `InvalidBudget` are domain errors (bad inputs); the rest are
/// numerical failures that can only surface once a computation is running.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("site {site} is outside the chain 1..={n_sites}")]
    SiteOutOfRange { site: usize, n_sites: usize },
    #[error("invalid chain: {0}")]
    InvalidChain(&'static str),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("evolution time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(&'static str),
    #[error("outcome sequence has length {found}, schedule expects {expected}")]
    SequenceLength { expected: usize, found: usize },
    #[error("outcome probability {probability:e} is below the collapse threshold")]
    ZeroProbability { probability: f64 },
    #[error("invalid field grid: {0}")]
    InvalidGrid(&'static str),
    #[error("dataset needs at least one sample")]
    EmptyDataset,
    #[error("relative error is undefined for a true field of zero")]
    ZeroTrueField,
    #[error("invalid time budget: {0}")]
    InvalidBudget(&'static str),
    #[error("log-log fit needs positive data, got {value} at index {index}")]
    NonPositiveData { index: usize, value: f64 },
    #[error("log-log fit needs at least 3 points in the window, found {found}")]
    TooFewPoints { found: usize },
    #[error("eigensolver did not converge for a {dim}x{dim} matrix")]
    Eigensolver { dim: usize },
    #[error("posterior is degenerate: every grid point gives the data zero probability")]
    DegeneratePosterior,
    #[error("repeat {index}: {source}")]
    Repeat { index: usize, source: Box<Error> },
    #[error("fit for n_seq={n_seq}, JT={total_time}: {source}")]
    Fit {
        n_seq: usize,
        total_time: f64,
        source: Box<Error>,
    },
}

impl Error {
    /// True for failures that come from the numerics rather than from the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Eigensolver { .. } | Error::DegeneratePosterior => true,
            Error::Repeat { source, .. } | Error::Fit { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
