use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("target and conditioning index sets overlap at {0}")]
    OverlappingIndices(usize),

    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NonHermitianInput(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("eigenvalue {value:e} is below the PSD tolerance -{tol:e}")]
    NotPositiveSemidefinite { value: f64, tol: f64 },

    #[error("Hermitian eigendecomposition did not converge")]
    ConvergenceFailure,

    #[error("invalid water-filling input: {0}")]
    InvalidWaterfillInput(String),

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("channel matrix does not have full column rank")]
    RankDeficientChannel,

    #[error("allocation infeasible at link {link}: cumulative load {cumulative} bits exceeds fronthaul {fronthaul} bits")]
    InfeasibleAllocation {
        link: usize,
        cumulative: f64,
        fronthaul: f64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid instance file: {0}")]
    InvalidInstance(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
