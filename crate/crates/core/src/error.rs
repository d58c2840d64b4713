use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid bounds on axis {axis}: lo {lo} > hi {hi}")]
    InvalidBounds { axis: usize, lo: f64, hi: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("unsupported activation `{0}`")]
    UnsupportedActivation(String),

    #[error("solver failure: {0}")]
    Solver(#[from] crate::solver::SolverError),

    #[error("abstraction failure: {0}")]
    Abstraction(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown benchmark `{0}`")]
    UnknownBenchmark(String),

    #[error("policy rejected: {0}")]
    PolicyRejected(String),

    #[error("degenerate hull: {0}")]
    DegenerateHull(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(path: &std::path::Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

pub(crate) fn json_err(context: impl Into<String>, source: serde_json::Error) -> Error {
    Error::Json {
        context: context.into(),
        source,
    }
}
