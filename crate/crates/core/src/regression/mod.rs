//! Regressors mapping feature vectors to quality scores.
//!
//! Three model kinds are available: ε-SVR with a linear kernel, ε-SVR with
//! an RBF ("Gaussian") kernel, and Gaussian-process regression with a
//! rational quadratic kernel. Every model standardizes its inputs with
//! statistics taken from the training rows only.

mod gpr;
mod io;
mod standardize;
mod svr;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use gpr::{cholesky, log_marginal_likelihood, train_gpr, GprModel, GprParams, RationalQuadratic};
pub use io::{load_model, read_model, save_model, write_model, MODEL_MAGIC};
pub use standardize::Standardizer;
pub use svr::{solve_epsilon_svr, train_svr, SmoSolution, SvrKernel, SvrModel, SvrParams};

#[derive(Debug, Error)]
pub enum RegressionError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("SMO did not converge within {iterations} iterations (KKT gap {gap:.3e})")]
    ConvergenceFailure { iterations: usize, gap: f64 },
    #[error("Cholesky factorization failed at pivot {0}: matrix is not positive definite")]
    CholeskyFailure(usize),
    #[error("malformed model file: {0}")]
    MalformedModel(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegressorKind {
    LinearSvr,
    GaussianSvr,
    Gpr,
}

impl RegressorKind {
    pub const ALL: [RegressorKind; 3] = [RegressorKind::LinearSvr, RegressorKind::GaussianSvr, RegressorKind::Gpr];

    pub fn name(self) -> &'static str {
        match self {
            RegressorKind::LinearSvr => "linsvr",
            RegressorKind::GaussianSvr => "gsvr",
            RegressorKind::Gpr => "gpr",
        }
    }
}

impl fmt::Display for RegressorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RegressorKind {
    type Err = RegressionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "linsvr" => Ok(RegressorKind::LinearSvr),
            "gsvr" => Ok(RegressorKind::GaussianSvr),
            "gpr" => Ok(RegressorKind::Gpr),
            other => Err(RegressionError::InvalidParameter(format!("unknown regressor '{other}'"))),
        }
    }
}

/// Hyperparameters for every regressor kind; `None` fields fall back to
/// data-dependent defaults at training time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegressorConfig {
    pub svr: SvrParams,
    pub gpr: GprParams,
    /// Pick the GPR length-scale and noise by marginal likelihood over a small grid.
    pub gpr_grid_search: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RegressionModel {
    Svr(SvrModel),
    Gpr(GprModel),
}

impl RegressionModel {
    pub fn kind(&self) -> RegressorKind {
        match self {
            RegressionModel::Svr(m) => match m.kernel() {
                SvrKernel::Linear => RegressorKind::LinearSvr,
                SvrKernel::Rbf { .. } => RegressorKind::GaussianSvr,
            },
            RegressionModel::Gpr(_) => RegressorKind::Gpr,
        }
    }

    /// Feature dimension the model was trained on.
    pub fn dim(&self) -> usize {
        match self {
            RegressionModel::Svr(m) => m.dim(),
            RegressionModel::Gpr(m) => m.dim(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, RegressionError> {
        match self {
            RegressionModel::Svr(m) => m.predict(x),
            RegressionModel::Gpr(m) => m.predict(x),
        }
    }

    pub fn predict_many(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>, RegressionError> {
        rows.iter().map(|r| self.predict(r)).collect()
    }
}

/// Train a model of the given kind.
pub fn train(
    kind: RegressorKind,
    x: &[Vec<f64>],
    y: &[f64],
    config: &RegressorConfig,
) -> Result<RegressionModel, RegressionError> {
    match kind {
        RegressorKind::LinearSvr => Ok(RegressionModel::Svr(train_svr(x, y, SvrKernel::Linear, &config.svr)?)),
        RegressorKind::GaussianSvr => {
            Ok(RegressionModel::Svr(train_svr(x, y, SvrKernel::Rbf { gamma: config.svr.gamma }, &config.svr)?))
        }
        RegressorKind::Gpr => {
            let params = if config.gpr_grid_search { gpr::grid_search(x, y, &config.gpr)? } else { config.gpr.clone() };
            Ok(RegressionModel::Gpr(train_gpr(x, y, &params)?))
        }
    }
}

pub(crate) fn check_matrix(x: &[Vec<f64>], y: &[f64]) -> Result<usize, RegressionError> {
    if x.len() != y.len() {
        return Err(RegressionError::DimensionMismatch(format!("{} rows but {} targets", x.len(), y.len())));
    }
    if x.is_empty() {
        return Err(RegressionError::DimensionMismatch("no training rows".into()));
    }
    let d = x[0].len();
    if d == 0 {
        return Err(RegressionError::DimensionMismatch("zero-length feature vectors".into()));
    }
    if let Some(i) = x.iter().position(|r| r.len() != d) {
        return Err(RegressionError::DimensionMismatch(format!("row {i} has {} features, expected {d}", x[i].len())));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(RegressionError::DegenerateInput("non-finite value in training data".into()));
    }
    Ok(d)
}
