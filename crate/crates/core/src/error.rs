use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("hyperparameter `{0}` must be strictly positive and not NaN")]
    NonPositiveHyperparameter(&'static str),
    #[error("burn-in ({burn_in}) must be smaller than max_iters ({max_iters})")]
    BurnInExceedsIterations { burn_in: usize, max_iters: usize },
    #[error("training set has no signals or zero signal dimension")]
    EmptyTrainingSet,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("precision matrix is not positive definite after jitter ({0})")]
    SingularPrecision(&'static str),
    #[error("expected residual is negative ({0:e}); posterior moments are inconsistent")]
    NegativeResidual(f64),
    #[error("chain trace holds no dictionary samples")]
    EmptyTrace,
    #[error("requested tail of {tail} samples but the trace holds {len}")]
    TailLargerThanTrace { tail: usize, len: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("clean signal has zero power")]
    ZeroSignal,
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),
    #[error("unsupported PGM maxval {0} (only 255 is supported)")]
    UnsupportedMaxval(u32),
    #[error("malformed matrix file: {0}")]
    MalformedMatrix(String),
    #[error("image must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("image of size {size} is smaller than the {patch}x{patch} patch")]
    ImageTooSmall { size: usize, patch: usize },
    #[error("pixel ({row}, {col}) is not covered by any patch")]
    CoverageGap { row: usize, col: usize },
    #[error("config error at {location}: {message}")]
    ConfigParse { location: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
