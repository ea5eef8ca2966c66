//! Correlation statistics, logistic mapping, significance testing, and the
//! split machinery of the evaluation protocol.

mod correlation;
mod logistic;
mod report;
mod splits;

use statrs::function::erf::erfc;
use thiserror::Error;

pub use correlation::{fractional_ranks, krocc, plcc, srocc};
pub use logistic::{fit_logistic5, Logistic5};
pub use report::{
    aggregate, evaluate, AggregateReport, AggregateRow, Correlations, EvaluationReport, GroupLabel, Scope, ScopeResult,
};
pub use splits::{make_splits, ratio_splits, SplitPlan, TrainTestSplit, MAX_TRAIN_PERCENT};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("need at least {needed} distinct references, got {got}")]
    TooFewReferences { needed: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Variance inflation of the Fisher z-transform used by the comparison test.
pub const Z_VARIANCE_FACTOR: f64 = 1.06;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Significance {
    pub z_stat: f64,
    pub p_value: f64,
    pub significant_at_05: bool,
}

/// Two-sided test for a difference between two correlations measured on the
/// same `n` samples: `z = (atanh r1 − atanh r2) / sqrt(2 · 1.06 / (n − 3))`.
pub fn significance(r1: f64, r2: f64, n: usize) -> Result<Significance, EvalError> {
    for r in [r1, r2] {
        if !(r.abs() < 1.0) {
            return Err(EvalError::DomainError(format!("correlation {r} outside (-1, 1)")));
        }
    }
    if n <= 3 {
        return Err(EvalError::DomainError(format!("need more than 3 samples, got {n}")));
    }
    let z_stat = (r1.atanh() - r2.atanh()) / (2.0 * Z_VARIANCE_FACTOR / (n as f64 - 3.0)).sqrt();
    let p_value = erfc(z_stat.abs() / std::f64::consts::SQRT_2).min(1.0);
    Ok(Significance { z_stat, p_value, significant_at_05: p_value < 0.05 })
}
