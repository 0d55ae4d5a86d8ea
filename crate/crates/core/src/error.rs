use thiserror::Error;

/// Failure modes shared by every module of the workbench.
///
/// Each variant corresponds to one documented error condition of an
/// operation; callers match on the variant, the message is for humans.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("functional is not bounded by the seminorm: coordinate {index} lies outside the active set")]
    NotPBounded { index: usize },

    #[error("vector is not in the span of the disk")]
    NotInSpan,

    #[error("no separating functional: u + span(L) meets ker p")]
    NoSeparation,

    #[error("Neumann budget exceeded: c = {c} >= 1")]
    BudgetExceeded { c: String },

    #[error("operator is singular: {0}")]
    Singular(String),

    #[error("candidates exhausted: {0}")]
    Exhausted(String),

    #[error("no approximant within the enumeration prefix (best distance {best}, needed < {needed})")]
    NoApproximant { best: String, needed: String },

    #[error("span meets the seminorm kernel: {0}")]
    KernelCollision(String),

    #[error("not an epsilon-net: target {target} has no element within {eps}")]
    NotANet { target: usize, eps: String },

    #[error("seminorm family is not strictly nested at position {position}")]
    NotNested { position: usize },

    #[error("no witness found (best n = {best_n}, residual {best_residual})")]
    NotFound { best_n: usize, best_residual: String },

    #[error("transport aborted at stage {stage}: {source}")]
    StageFailed {
        stage: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Stable machine-readable name, used in reports and by the C ABI.
    pub fn code_name(&self) -> &'static str {
        match self {
            Error::NotPBounded { .. } => "NOT_P_BOUNDED",
            Error::NotInSpan => "NOT_IN_SPAN",
            Error::NoSeparation => "NO_SEPARATION",
            Error::BudgetExceeded { .. } => "BUDGET_EXCEEDED",
            Error::Singular(_) => "SINGULAR",
            Error::Exhausted(_) => "EXHAUSTED",
            Error::NoApproximant { .. } => "NO_APPROXIMANT",
            Error::KernelCollision(_) => "KERNEL_COLLISION",
            Error::NotANet { .. } => "NOT_A_NET",
            Error::NotNested { .. } => "NOT_NESTED",
            Error::NotFound { .. } => "NOT_FOUND",
            Error::StageFailed { source, .. } => source.code_name(),
            Error::InvalidInput(_) => "INVALID_INPUT",
            Error::Parse(_) => "PARSE",
            Error::Schema { .. } => "SCHEMA",
        }
    }

    /// Strips any `StageFailed` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::StageFailed { source, .. } => source.root(),
            other => other,
        }
    }
}
