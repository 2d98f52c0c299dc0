use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("point is not on the boundary (|z| = {norm})")]
    OffBoundary { norm: f64 },

    #[error("point is not in the open domain (|z| = {norm})")]
    NotInterior { norm: f64 },

    #[error("boundary projection is undefined at the origin")]
    UndefinedProjection,

    #[error("generation {k} exceeds grid depth {depth}")]
    GenerationOutOfRange { k: usize, depth: usize },

    #[error("mesh too coarse for the requested grid: {0}")]
    Resolution(String),

    #[error("symbol is not a self-map: |phi(z)| = {norm} at sample {index}")]
    SelfMapViolation { norm: f64, index: usize },

    #[error("non-finite integrand value at atom {index}")]
    NonFiniteIntegrand { index: usize },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("expression parse error: {0}")]
    Parse(String),

    #[error("config field `{field}`: {detail}")]
    Config { field: String, detail: String },

    #[error("unknown suite `{0}`")]
    UnknownSuite(String),

    #[error("corrupt grid cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(field: &str, detail: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            detail: detail.into(),
        }
    }
}
