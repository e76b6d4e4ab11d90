//! Error type shared by every stage of the certification pipeline.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Failures raised by the solvers and the pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unsupported dimension {0}; expected 1 or 3")]
    UnsupportedDimension(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("step size underflow at r = {r} (stiff or singular system)")]
    Stiffness { r: f64 },

    #[error("solution blow-up (|u| > 1e100) at r = {r}")]
    BlowUp { r: f64 },

    #[error("step budget exhausted at r = {r}")]
    MaxSteps { r: f64 },

    #[error("ambiguous zero crossing near r = {r}; tighten the tolerance")]
    AmbiguousCrossing { r: f64 },

    #[error("asymptotic fit did not stabilize: {0}")]
    WindowTooSmall(String),

    #[error("inconclusive index: {0}")]
    InconclusiveIndex(String),

    #[error("iteration failed to converge (last residual {residual:e})")]
    IterationFailure { residual: f64 },

    #[error("degenerate solution: {0}")]
    DegenerateSolution(String),

    #[error("boundary mismatch {mismatch:e} at r = {r}; increase r_max")]
    DomainTooSmall { r: f64, mismatch: f64 },

    #[error("eigenmode shooting failed: {0}")]
    Shooting(String),

    #[error("eigenvalue e = {0} is not positive (wrong branch)")]
    WrongBranch(f64),

    #[error("degenerate Gram reduction (K2 = {0:e})")]
    DegenerateGram(f64),

    #[error("index changed already at the smallest delta0 = {0:e}")]
    PerturbationFailure(f64),

    #[error("bound composition failed: {0}")]
    BoundComposition(String),

    #[error("incomplete run: missing {0}")]
    IncompleteRun(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("{0}")]
    MissingCache(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wraps an error with the name of the pipeline stage that raised it.
    pub fn in_stage(self, stage: &str) -> Error {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage: stage.to_string(),
                source: Box::new(other),
            },
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(format!("json: {e}"))
    }
}
