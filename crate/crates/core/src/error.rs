use thiserror::Error;

/// Errors raised across the library. Each variant carries enough context
/// (indices, offending values) to locate the problem.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("singular linear system: {0}")]
    Singular(String),
    #[error("rank-deficient regression design: {0}")]
    RankDeficient(String),
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("did not converge: {0}")]
    NoConvergence(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
    /// Wraps an error with the run phase (and seed) it occurred in.
    #[error("{phase} failed (seed {seed:?}): {source}")]
    Run {
        phase: String,
        seed: Option<u64>,
        source: Box<Error>,
    },
}

impl Error {
    /// Short machine-readable tag used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::InvalidModel(_) => "invalid_model",
            Error::InvalidPolicy(_) => "invalid_policy",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::InvalidLayout(_) => "invalid_layout",
            Error::Config(_) => "config",
            Error::Singular(_) => "singular",
            Error::RankDeficient(_) => "rank_deficient",
            Error::Infeasible => "infeasible",
            Error::Unbounded => "unbounded",
            Error::NoConvergence(_) => "no_convergence",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Run { source, .. } => source.kind(),
        }
    }

    pub(crate) fn in_phase(self, phase: &str, seed: Option<u64>) -> Error {
        match self {
            e @ Error::Run { .. } => e,
            e => Error::Run {
                phase: phase.to_string(),
                seed,
                source: Box::new(e),
            },
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
