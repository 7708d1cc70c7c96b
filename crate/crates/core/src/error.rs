use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("objective diverged")]
    ObjectiveDiverged,
    #[error("not a norm: {0}")]
    NotANorm(String),
    #[error("outside unit ball: norm {norm:.12} exceeds 1")]
    OutsideUnitBall { norm: f64 },
    #[error("ball function escaped the unit ball at support point {index}: norm {norm:.12}")]
    BallEscape { index: usize, norm: f64 },
    #[error("not a density operator: {0}")]
    NotDensity(String),
    #[error("not unitary (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },
    #[error("neither unital nor TP")]
    NeitherUnitalNorTp,
    #[error("exact norms required: {0}")]
    ExactNormsRequired(String),
    #[error("spatial tensor only realized for HS objects")]
    NotHsObject,
    #[error("ill-polarized formula: {0}")]
    IllPolarized(String),
    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("subspace not contained in space: {0}")]
    NotContained(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("singular matrix")]
    Singular,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
