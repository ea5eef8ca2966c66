//! Optional TOML configuration. Every key mirrors a command-line flag; a flag
//! given on the command line wins over the file.

use std::path::Path;

use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub folds: Option<usize>,
    pub reps: Option<usize>,
    pub regressor: Option<String>,
    pub metric: Option<String>,
    pub tap: Option<String>,
    pub mos_normalization: Option<String>,
    pub train_ratios: Option<Vec<f64>>,
    #[serde(default)]
    pub svr: SvrSection,
    #[serde(default)]
    pub gpr: GprSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvrSection {
    pub c: Option<f64>,
    pub epsilon: Option<f64>,
    pub gamma: Option<f64>,
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GprSection {
    pub signal_variance: Option<f64>,
    pub length_scale: Option<f64>,
    pub mixture: Option<f64>,
    pub noise: Option<f64>,
    pub grid_search: Option<bool>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        toml::from_str(&text).map_err(|e| CliError::Config { path: path.to_path_buf(), message: e.to_string() })
    }
}
