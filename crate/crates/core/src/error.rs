use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}, field {field}: cannot parse `{text}` as a number")]
    Parse {
        line: usize,
        field: usize,
        text: String,
    },

    #[error("line {line}: expected {expected} numeric fields, found {found}")]
    Ragged {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("{0}")]
    Csv(#[from] csv::Error),

    #[error("{0}")]
    Json(#[from] serde_json::Error),

    #[error("input contains no data rows")]
    Empty,

    #[error("duplicate row id `{0}`")]
    DuplicateId(String),

    #[error("row `{id}` has negative value {value} in column {column}")]
    NegativeValue {
        id: String,
        column: usize,
        value: f64,
    },

    #[error("row `{0}` sums to zero")]
    ZeroRow(String),

    #[error("degenerate matrix: {0}")]
    Degenerate(String),

    #[error("zero variance: {0}")]
    ZeroVariance(&'static str),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("value {value} of `{id}` is not strictly positive")]
    NonPositive { id: String, value: f64 },

    #[error("value {0} lies outside [0, 1)")]
    OutOfUnitInterval(f64),

    #[error("depth {depth} exceeds the precision bound {max} for base {base}")]
    DepthTooLarge { depth: usize, max: usize, base: u32 },

    #[error("invalid digit {digit} for base {base}")]
    InvalidDigit { digit: u32, base: u32 },

    #[error("{what} has size {size}, above the limit of {limit}")]
    TooLarge {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("power iteration did not converge after {iterations} iterations (last eigenvalue estimate {eigenvalue})")]
    NotConverged {
        iterations: usize,
        eigenvalue: f64,
        eigenvector: Vec<f64>,
    },

    #[error("dendrograms have different leaf sets")]
    LeafMismatch,

    #[error("unknown experiment `{0}` (expected `iris` or `uniform`)")]
    UnknownExperiment(String),

    #[error("unsupported transform chain: {0}")]
    UnsupportedChain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Process exit code: 2 for usage and I/O problems (including malformed
    /// input files), 1 for numerical or precondition failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::Ragged { .. }
            | Error::Csv(_)
            | Error::Json(_)
            | Error::UnknownExperiment(_)
            | Error::InvalidDigit { .. }
            | Error::InvalidArgument(_) => 2,
            _ => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
