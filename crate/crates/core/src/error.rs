use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// A simulated or propagated state became non-finite. `time` is 0-based.
    #[error("divergence at time index {time}{}", iteration.map(|k| format!(" (iteration {k})")).unwrap_or_default())]
    Divergence { time: usize, iteration: Option<usize> },

    #[error("degenerate weights: all weights are zero or non-finite")]
    DegenerateWeights,

    #[error(
        "rank-deficient {equation} equation at row {row}: the regularized normal equations are singular; \
         add or increase regularization (a nonzero prior precision)"
    )]
    RankDeficient { equation: &'static str, row: usize },

    /// A type invariant does not hold; the message names the invariant.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_iteration(self, k: usize) -> Self {
        match self {
            Error::Divergence { time, .. } => Error::Divergence {
                time,
                iteration: Some(k),
            },
            other => other,
        }
    }
}
