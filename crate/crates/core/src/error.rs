use thiserror::Error;

/// Errors raised by the laboratory. Numerical breakdown during time
/// integration is reported through trajectory status, never through this type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid point count {0} must be a power of two and at least 8")]
    BadPointCount(usize),
    #[error("box length must be positive and finite, got {0}")]
    BadBoxLength(f64),
    #[error("symbol is not finite at xi = {xi}")]
    NonFiniteSymbol { xi: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("dyadic index {0} is below -1")]
    BadDyadicIndex(i32),
    #[error("alpha = {0} lies outside (0, 1/2]")]
    BadAlpha(f64),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("empty sample set")]
    EmptySample,
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("unknown symbol family `{0}`")]
    UnknownFamily(String),
    #[error("sign tuple {signs} does not fit family {family} of arity {arity}")]
    SignMismatch { family: String, signs: String, arity: usize },
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("phase vanishes on the sample set for sign tuple {0}")]
    VanishingPhase(String),
    #[error("grid with n = {0} is too large for direct summation (limit 128)")]
    InfeasibleGrid(usize),
    #[error("frequency gap precondition violated: {0}")]
    GapViolation(String),
    #[error("time {0} is not on the trajectory lattice")]
    OffLattice(f64),
    #[error("trajectory too short: {0}")]
    TooFewSnapshots(String),
    #[error("wrap-around detected: edge mass {0:e}")]
    WrapAround(f64),
    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { field: field.into(), reason: reason.into() }
    }
}
