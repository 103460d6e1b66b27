use thiserror::Error;

/// Errors produced by construction and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix contains non-finite entries: {0}")]
    NonFinite(String),

    #[error("matrix is not Hermitian: {0}")]
    NotHermitian(String),

    #[error("state is not normalized: {0}")]
    NotNormalized(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("state is rank deficient: {0}")]
    RankDeficient(String),

    #[error("target is unreachable: {0}")]
    Unreachable(String),

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("steady state is degenerate: {0}")]
    DegenerateSteadyState(String),

    #[error("state is not steady: {0}")]
    NotSteady(String),

    #[error("detailed balance violated: {0}")]
    DetailedBalance(String),

    #[error("Schmidt weights too close: {0}")]
    DegenerateWeights(String),

    #[error("time horizon too short: {0}")]
    HorizonTooShort(String),
}

pub type Result<T> = std::result::Result<T, Error>;
