use thiserror::Error;

/// Errors produced by instance construction, the algorithms, and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("two or more arms share the maximum mean {mean}")]
    TiedBest { mean: f64 },

    #[error("operation requires a non-empty arm set")]
    EmptySet,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("round limit of {limit} exceeded")]
    RoundLimitExceeded { limit: u32 },

    #[error("search budget exceeded: {0}")]
    SearchBudgetExceeded(String),

    #[error("parallel simulation spawned more than {limit} inner instances")]
    InstanceBudgetExceeded { limit: u32 },

    #[error("infeasible instance spec: {0}")]
    Spec(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("pull count {0} is not representable")]
    PullOverflow(f64),

    /// A budgeted environment ran out of pulls. Used to pause replayed runs.
    #[error("pull budget exhausted")]
    BudgetExhausted,

    #[error("every arm was eliminated")]
    AllArmsEliminated,

    #[error("resumable run already finished")]
    AlreadyFinished,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn params(msg: impl Into<String>) -> Self {
        Error::InvalidParams(msg.into())
    }

    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Csv(_) => 3,
            Error::Json(e) if e.is_io() => 3,
            Error::Domain(_)
            | Error::TiedBest { .. }
            | Error::EmptySet
            | Error::InvalidParams(_)
            | Error::Spec(_)
            | Error::Config(_)
            | Error::Json(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
