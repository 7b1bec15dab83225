use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A zero-variance fade has no density.
    #[error("degenerate distribution: sigma_sq = 0 has no density")]
    DegenerateDistribution,

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    /// Measured totals imply a negative signal component.
    #[error("inconsistent calibration: N_S(0) = {sifted_total} is below N_b * N_P(0) = {background_total}")]
    InconsistentCalibration {
        sifted_total: f64,
        background_total: f64,
    },

    /// Predicted counts per packet fell below the background floor.
    #[error("model inconsistency at threshold {threshold}: predicted s(T) = {counts_per_packet} < N_b = {background}")]
    ModelInconsistency {
        threshold: f64,
        counts_per_packet: f64,
        background: f64,
    },

    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    #[error("invalid channel spec: {0}")]
    InvalidSpec(String),

    /// Malformed trace file. Rows are 1-based line numbers within the file.
    #[error("parse error at line {line}, field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            field: field.into(),
            message: message.into(),
        }
    }
}
