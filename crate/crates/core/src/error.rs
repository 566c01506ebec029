use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid domain spec: {0}")]
    InvalidSpec(String),

    #[error("covariance not PSD: {name}")]
    NotPsd { name: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate labels: training data contains a single class")]
    DegenerateLabels,

    #[error("diverged: non-finite loss at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("degenerate projection: w'Sigma w = {0}")]
    DegenerateProjection(f64),

    #[error("degenerate sweep: {0}")]
    DegenerateSweep(String),

    #[error("unknown environment `{0}`")]
    UnknownEnv(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by the numbers themselves (degenerate data,
    /// divergence) rather than by malformed input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::DegenerateLabels
                | Error::Diverged { .. }
                | Error::DegenerateProjection(_)
                | Error::DegenerateSweep(_)
                | Error::NotPsd { .. }
        )
    }
}
