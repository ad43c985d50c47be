use std::path::PathBuf;

/// Errors raised anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not positive-definite: smallest eigenvalue {min_eig:e} <= tolerance {tol:e}")]
    NotPositiveDefinite { min_eig: f64, tol: f64 },

    #[error("matrix is not positive semi-definite: eigenvalue {eigenvalue:e} below -{floor:e}")]
    NotPositiveSemidefinite { eigenvalue: f64, floor: f64 },

    #[error("symmetric eigensolver did not converge within {iterations} iterations")]
    EigenNoConvergence { iterations: usize },

    #[error("singular value decomposition did not converge within {iterations} iterations")]
    SvdNoConvergence { iterations: usize },

    #[error("{function} is undefined at eigenvalue {eigenvalue:e}")]
    Domain { function: &'static str, eigenvalue: f64 },

    #[error("condition number {condition:e} exceeds the limit {limit:e}")]
    IllConditioned { condition: f64, limit: f64 },

    #[error("rank mismatch: {left} vs {right}; re-factorize both at the smaller rank")]
    RankMismatch { left: usize, right: usize },

    #[error("requested rank {requested} exceeds numerically available rank {available}")]
    RankUnavailable { requested: usize, available: usize },

    #[error("columns are not orthonormal (deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },

    #[error("vector is not unit norm (norm {norm})")]
    NotUnitVector { norm: f64 },

    #[error("sequence length {len} is not a power of two; truncate to the first {suggestion} frames")]
    NotPowerOfTwo { len: usize, suggestion: usize },

    #[error("index out of bounds: {0}")]
    OutOfBounds(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("all points coincide (median distance is zero); use a fixed bandwidth instead")]
    ZeroBandwidth,

    #[error("theorem hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    ///
    /// `1` validation, `2` numerical failure, `3` verification failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotPositiveDefinite { .. }
            | Error::NotPositiveSemidefinite { .. }
            | Error::EigenNoConvergence { .. }
            | Error::SvdNoConvergence { .. }
            | Error::Domain { .. }
            | Error::IllConditioned { .. }
            | Error::RankUnavailable { .. }
            | Error::NotOrthonormal { .. } => 2,
            Error::Verification(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
