use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("every item has zero weight")]
    AllZeroWeights,
    #[error("arrival {arrival} sends total weight {total} > 1")]
    ArrivalOverflow { arrival: usize, total: f64 },
    #[error("type {0} has zero probability")]
    DegenerateType(usize),
    #[error("infeasible fractional solution: {0}")]
    Infeasible(String),
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error("size {n} not supported by family {family}: {reason}")]
    BadSize {
        family: &'static str,
        n: usize,
        reason: &'static str,
    },
    #[error("{0} outside domain")]
    Domain(String),
    #[error("no events in window {0}")]
    EmptyWindow(String),
    #[error("malformed input {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the filesystem rather than by the inputs.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
