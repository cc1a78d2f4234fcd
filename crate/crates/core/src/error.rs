use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("scaled distance Z_en = {z_en:.4} ft/lb^(1/3) is outside the fitted range [0.5, 500]")]
    ScaledDistanceOutOfRange { z_en: f64 },

    #[error("invalid dataset: {0}")]
    Schema(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("dataset contains no modality observations")]
    EmptyDataset,

    #[error("{0} modality is not present in the dataset")]
    MissingModality(&'static str),

    #[error("{0} has no observations")]
    EmptyObservations(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("fusion method {0} is a post-hoc fuser and has no joint density; use fuse-posthoc")]
    UnsupportedMethod(&'static str),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("divergent transitions in {rate:.1}% of post-warmup draws exceed the 25% limit", rate = .rate * 100.0)]
    DiagnosticFailure { rate: f64 },

    #[error("could not find a finite starting point after {0} attempts")]
    Initialization(usize),

    #[error("step size search failed: {0}")]
    StepSize(String),

    #[error("redraw limit reached while generating {0}")]
    RedrawLimit(&'static str),

    #[error("zero-variance marginal for {0}")]
    ZeroVariance(String),

    #[error("raster error: {0}")]
    Raster(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}
