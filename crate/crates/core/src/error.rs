use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("generator is not irreducible: the rate graph is not strongly connected")]
    NonIrreducible,

    #[error("linear system for the stationary distribution is singular")]
    SingularSystem,

    #[error("matrix exponential exceeded its scaling budget (norm {norm})")]
    NumericalOverflow { norm: f64 },

    #[error("coarsening factor {factor} does not divide lattice length {len}")]
    NonDivisor { factor: usize, len: usize },

    #[error("length mismatch: {increments} increments but {regimes} regime samples (need increments + 1)")]
    LengthMismatch { increments: usize, regimes: usize },

    #[error("state became non-finite at step {step}")]
    NonFiniteState { step: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("model has no stationary Gamma law: {0}")]
    NotPermanent(String),

    #[error("empty sample")]
    EmptySample,

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. }
            | Error::DimensionMismatch { .. }
            | Error::NonDivisor { .. }
            | Error::LengthMismatch { .. }
            | Error::GridMismatch(_)
            | Error::DegenerateInput(_)
            | Error::Json(_) => 2,
            Error::NonIrreducible | Error::SingularSystem | Error::NotPermanent(_) => 3,
            Error::Io(_) => 4,
            Error::NumericalOverflow { .. } | Error::NonFiniteState { .. } | Error::EmptySample => {
                1
            }
        }
    }
}
