use thiserror::Error;

/// Crate-wide error type. Variants are grouped by how a caller should
/// react: `InvalidInput`/`Domain`/`SizeLimit` are usage errors,
/// `RankDeficient` directs the caller to `minimizers::reduce_rank_deficient`,
/// and the remaining variants report numerical failure of an otherwise
/// valid request.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("rank-deficient matrix: {0}")]
    RankDeficient(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("divergence detected at step {step}")]
    Diverged { step: u64 },

    #[error("step budget exceeded: the literal step-size rule demands ~{required:.3e} steps, budget is {budget}")]
    StepBudget { required: f64, budget: u64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code the CLI maps this error to: 2 for validation
    /// errors, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::Domain(_)
            | Error::SizeLimit(_)
            | Error::RankDeficient(_)
            | Error::Io(_)
            | Error::Json(_) => 2,
            Error::Numerical(_) | Error::Diverged { .. } | Error::StepBudget { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
