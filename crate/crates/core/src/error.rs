use thiserror::Error;

use crate::solver::{ResidualReport, SolveOutcome};

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid transform parameter: {0}")]
    Parameter(String),

    #[error("value out of representable range: {0}")]
    Range(String),

    #[error(
        "solver did not converge after {iterations} Newton iterations (residuals: {residuals})"
    )]
    NotConverged {
        iterations: usize,
        residuals: ResidualReport,
        best: Box<SolveOutcome>,
    },

    #[error("grid search refused: {0}")]
    Refused(String),

    #[error("invalid experiment configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
