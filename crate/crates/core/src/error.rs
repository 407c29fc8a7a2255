use thiserror::Error;

/// Everything that can go wrong while building grids, operators or running
/// one of the numerical pipelines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("coefficient a is not symmetric at node {node} (x = {coords:?})")]
    NotSymmetric { node: usize, coords: [f64; 2] },

    #[error("ellipticity bound violated at node {node} (x = {coords:?}): {detail}")]
    NotElliptic {
        node: usize,
        coords: [f64; 2],
        detail: String,
    },

    #[error("invalid equation coefficients: {0}")]
    InvalidCoefficients(String),

    #[error("empty region")]
    EmptyRegion,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("too few time levels: need at least {needed}, have {have}")]
    TooFewLevels { needed: usize, have: usize },

    #[error("evaluation at t = 0 is singular")]
    SingularTime,

    #[error("linear solve failed at step {step}: residual {residual:e} after {iterations} iterations")]
    SolveFailed {
        step: usize,
        residual: f64,
        iterations: usize,
    },

    #[error("NaN detected at step {0}")]
    NanDetected(usize),

    #[error("Carleman geometry rejected: {0}")]
    Geometry(String),

    #[error("level-set inclusion failed: {0}")]
    Inclusion(String),

    #[error("test field is not compactly supported in the integration region: {0}")]
    NotCompactlySupported(String),

    #[error("source hypothesis violated: min |R(x, t0)| = {min_abs:e} < r_min = {r_min:e}")]
    SourceHypothesis { min_abs: f64, r_min: f64 },

    #[error("regularization parameter must be positive, got {0}")]
    NonPositiveAlpha(f64),

    #[error("fit refused: {0}")]
    FitRefused(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("expression error: {0}")]
    Expr(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors raised while validating inputs, before any heavy
    /// numerical work. The command line maps these to exit status 1 and
    /// everything else to 2.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::SolveFailed { .. }
                | Error::NanDetected(_)
                | Error::FitRefused(_)
                | Error::Io(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
