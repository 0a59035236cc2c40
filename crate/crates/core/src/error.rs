use thiserror::Error;

/// Errors produced anywhere in the simulation / reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A physical or numerical parameter is outside its domain.
    #[error("parameter out of domain: {0}")]
    Parameter(String),

    #[error("invalid filter: {0}")]
    Filter(String),

    /// A numerical routine failed (quadrature, integration, eigen-solve).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The conditioned state lost its trace or produced NaN.
    #[error("trajectory {trajectory} became unstable at step {step}: {detail}")]
    Instability {
        trajectory: u64,
        step: u64,
        detail: String,
    },

    /// A record does not cover the window a filter needs.
    #[error("record coverage: {0}")]
    Coverage(String),

    /// Bad measurement data (empty, NaN, mismatched geometry).
    #[error("data error: {0}")]
    Data(String),

    /// The MLE iteration decreased the likelihood beyond roundoff.
    #[error("likelihood decreased by {decrease:e} at iteration {iteration}")]
    LikelihoodDecrease { iteration: usize, decrease: f64 },

    /// Fock cutoff too small for the requested operation.
    #[error("Fock cutoff {have} too small, need at least {required}")]
    Cutoff { have: usize, required: usize },

    #[error("phase-space grid: {0}")]
    Grid(String),

    #[error("config error at `{path}`: {msg}")]
    Config { path: String, msg: String },

    /// Artifacts from different configurations were mixed.
    #[error("provenance mismatch: {0}")]
    Provenance(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
