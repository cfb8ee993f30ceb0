use thiserror::Error;

/// Errors raised by the simulation modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("integrator aborted at t = {t}: {reason}")]
    IntegratorAbort { t: f64, reason: String },

    #[error("steady state is not unique: null space has dimension {0}")]
    DegenerateNullSpace(usize),

    #[error("singular quantity: {0}")]
    Singular(String),

    #[error("unphysical covariance: symplectic eigenvalue {0} < 1/2")]
    Unphysical(f64),

    #[error("truncation leakage {population:e} at ancilla level {n_max}; increase n_max")]
    TruncationLeakage { population: f64, n_max: usize },

    #[error("no periodic orbit detected: {0}")]
    NoPeriod(String),

    #[error("zero temperature: {0}")]
    ZeroTemperature(String),

    #[error("channel check failed: {0}")]
    Channel(String),

    #[error("size cap exceeded: {0}")]
    SizeCap(String),

    #[error("linear algebra failure: {0}")]
    Linalg(#[from] ndarray_linalg::error::LinalgError),
}

pub type Result<T> = std::result::Result<T, Error>;
