use std::path::PathBuf;

/// Errors produced by the estimation toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("invalid support set: {0}")]
    InvalidSupport(String),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("OD pair {src} -> {dst} is unreachable")]
    UnreachablePair { src: String, dst: String },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid vector: {0}")]
    InvalidVector(String),

    #[error("relative residual undefined: link loads are all zero but the residual is {0}")]
    UndefinedRelativeResidual(f64),

    #[error("quadrature did not reach tolerance {tolerance:e} (estimate {estimate})")]
    QuadratureFailure { tolerance: f64, estimate: f64 },

    #[error("insufficient data: need at least {needed} strictly positive demands, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate sample: all positive demands are equal")]
    DegenerateSample,

    #[error("row {0} of the constraint matrix has no nonzero entries")]
    ZeroRow(usize),

    #[error("degenerate candidate: A*y is identically zero")]
    DegenerateCandidate,

    #[error("malformed generator weights: {0}")]
    MalformedWeights(String),

    #[error("true demands sum to zero on the evaluated index set")]
    ZeroTruth,

    #[error("no demands selected by the evaluation mask")]
    EmptyMask,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn mismatch(context: &'static str, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            found,
        }
    }
}
