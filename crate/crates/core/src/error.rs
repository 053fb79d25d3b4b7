use thiserror::Error;

/// Errors raised anywhere in the bound pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("{op} requires a square matrix, got {rows}x{cols}")]
    NotSquare {
        op: &'static str,
        rows: usize,
        cols: usize,
    },

    #[error("matrix is not Hermitian: max |A - A^H| = {defect:.3e} exceeds {tolerance:.3e}")]
    NotHermitian { defect: f64, tolerance: f64 },

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal residual {residual:.3e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("parameter {param} = {value} is out of domain: {reason}")]
    Domain {
        param: String,
        value: f64,
        reason: String,
    },

    #[error("Fock cutoff too small: {what} needs cutoff {required}, space has {available}")]
    Cutoff {
        what: String,
        required: usize,
        available: usize,
    },

    #[error("coherent amplitude |{amplitude:.4}| needs cutoff {required} to keep the Poisson tail below {budget:.1e}, cap is {cap}")]
    Truncation {
        amplitude: f64,
        required: usize,
        cap: usize,
        budget: f64,
    },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("unknown parameter or coordinate label: {0}")]
    UnknownLabel(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(param: impl Into<String>, value: f64, reason: impl Into<String>) -> Self {
        Error::Domain {
            param: param.into(),
            value,
            reason: reason.into(),
        }
    }
}
