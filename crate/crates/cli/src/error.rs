use std::path::PathBuf;

use actmap::archive::ArchiveError;
use actmap::dataset::DatasetError;
use actmap::evaluation::EvalError;
use actmap::features::FeatureError;
use actmap::protocol::ProtocolError;
use actmap::regression::RegressionError;
use actmap::synthetic::SyntheticError;
use thiserror::Error;

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_CONVERGENCE: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{0}")]
    Check(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Archive(#[from] ArchiveError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Regression(#[from] RegressionError),
    #[error(transparent)]
    Evaluation(#[from] EvalError),
    #[error(transparent)]
    Synthetic(#[from] SyntheticError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn regression_code(e: &RegressionError) -> u8 {
    match e {
        RegressionError::ConvergenceFailure { .. } | RegressionError::CholeskyFailure(_) => EXIT_CONVERGENCE,
        RegressionError::InvalidParameter(_) => EXIT_VALIDATION,
        _ => EXIT_DATA,
    }
}

fn evaluation_code(e: &EvalError) -> u8 {
    match e {
        EvalError::InvalidParameter(_) => EXIT_VALIDATION,
        _ => EXIT_DATA,
    }
}

impl CliError {
    /// 2 for invalid flags or parameters, 3 for bad or insufficient data,
    /// 4 when a solver fails to converge.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) | CliError::Config { .. } => EXIT_VALIDATION,
            CliError::Regression(e) => regression_code(e),
            CliError::Evaluation(e) => evaluation_code(e),
            CliError::Protocol(e) => match e.root() {
                ProtocolError::Regression(e) => regression_code(e),
                ProtocolError::Evaluation(e) => evaluation_code(e),
                _ => EXIT_DATA,
            },
            CliError::Synthetic(SyntheticError::TooFewReferences(_) | SyntheticError::InvalidLevel(_)) => {
                EXIT_VALIDATION
            }
            _ => EXIT_DATA,
        }
    }
}
