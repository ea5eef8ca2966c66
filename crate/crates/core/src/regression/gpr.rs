//! Gaussian-process regression with a rational quadratic covariance.
//!
//! Zero prior mean; the posterior mean `k(x, X) (K + σ²I)⁻¹ y` is computed
//! once at training time through a Cholesky factor.

use super::{check_matrix, RegressionError, Standardizer};

/// `k(a, b) = σ_f² (1 + |a − b|² / (2 α ℓ²))^(−α)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RationalQuadratic {
    pub signal_variance: f64,
    pub length_scale: f64,
    pub mixture: f64,
}

impl RationalQuadratic {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        let base = 1.0 + d2 / (2.0 * self.mixture * self.length_scale * self.length_scale);
        self.signal_variance * base.powf(-self.mixture)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GprParams {
    pub signal_variance: f64,
    /// `None` uses `sqrt(d)`.
    pub length_scale: Option<f64>,
    pub mixture: f64,
    pub noise: f64,
}

impl Default for GprParams {
    fn default() -> Self {
        Self { signal_variance: 1.0, length_scale: None, mixture: 1.0, noise: 0.05 }
    }
}

impl GprParams {
    fn kernel_for(&self, d: usize) -> RationalQuadratic {
        RationalQuadratic {
            signal_variance: self.signal_variance,
            length_scale: self.length_scale.unwrap_or((d as f64).sqrt()),
            mixture: self.mixture,
        }
    }

    fn validate(&self) -> Result<(), RegressionError> {
        let ls_ok = self.length_scale.is_none_or(|l| l > 0.0 && l.is_finite());
        if !(self.signal_variance > 0.0 && self.mixture > 0.0 && self.noise > 0.0 && ls_ok) {
            return Err(RegressionError::InvalidParameter(format!("GPR parameters must be positive: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GprModel {
    pub(super) kernel: RationalQuadratic,
    pub(super) noise: f64,
    pub(super) standardizer: Standardizer,
    pub(super) inputs: Vec<Vec<f64>>,
    /// Lower Cholesky factor of `K + σ²I`, row-major `n × n`.
    pub(super) cholesky: Vec<f64>,
    pub(super) weights: Vec<f64>,
}

impl GprModel {
    pub fn dim(&self) -> usize {
        self.standardizer.dim()
    }

    pub fn kernel(&self) -> RationalQuadratic {
        self.kernel
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn cholesky_factor(&self) -> &[f64] {
        &self.cholesky
    }

    /// `(K + σ²I)⁻¹ y`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, RegressionError> {
        if x.len() != self.dim() {
            return Err(RegressionError::DimensionMismatch(format!(
                "model expects {} features, got {}",
                self.dim(),
                x.len()
            )));
        }
        let z = self.standardizer.apply(x);
        Ok(self.inputs.iter().zip(&self.weights).map(|(xi, w)| w * self.kernel.eval(xi, &z)).sum())
    }
}

/// In-place lower Cholesky factor of a symmetric `n × n` row-major matrix.
pub fn cholesky(a: &[f64], n: usize) -> Result<Vec<f64>, RegressionError> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(RegressionError::CholeskyFailure(i));
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(l)
}

/// Solve `L Lᵀ x = b`.
fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut z = b.to_vec();
    for i in 0..n {
        let mut s = z[i];
        for k in 0..i {
            s -= l[i * n + k] * z[k];
        }
        z[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s -= l[k * n + i] * z[k];
        }
        z[i] = s / l[i * n + i];
    }
    z
}

fn covariance(kernel: &RationalQuadratic, z: &[Vec<f64>], noise: f64) -> Vec<f64> {
    let n = z.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval(&z[i], &z[j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
        k[i * n + i] += noise;
    }
    k
}

pub fn train_gpr(x: &[Vec<f64>], y: &[f64], params: &GprParams) -> Result<GprModel, RegressionError> {
    let d = check_matrix(x, y)?;
    params.validate()?;
    let standardizer = Standardizer::fit(x);
    let inputs = standardizer.apply_all(x);
    let kernel = params.kernel_for(d);
    let n = inputs.len();
    let cov = covariance(&kernel, &inputs, params.noise);
    let cholesky = cholesky(&cov, n)?;
    let weights = cholesky_solve(&cholesky, n, y);
    Ok(GprModel { kernel, noise: params.noise, standardizer, inputs, cholesky, weights })
}

/// `log p(y | X)` of a trained model, given the targets it was trained on.
pub fn log_marginal_likelihood(model: &GprModel, y: &[f64]) -> f64 {
    let n = y.len();
    let fit: f64 = y.iter().zip(&model.weights).map(|(a, b)| a * b).sum();
    let log_det: f64 = (0..n).map(|i| model.cholesky[i * n + i].ln()).sum();
    -0.5 * fit - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
}

/// Length-scale and noise with the highest marginal likelihood on a fixed grid
/// around the defaults. Other parameters are kept.
pub(super) fn grid_search(x: &[Vec<f64>], y: &[f64], base: &GprParams) -> Result<GprParams, RegressionError> {
    let d = check_matrix(x, y)?;
    let center = base.length_scale.unwrap_or((d as f64).sqrt());
    let mut best: Option<(f64, GprParams)> = None;
    for factor in [0.25, 0.5, 1.0, 2.0, 4.0] {
        for noise in [0.01, 0.05, 0.1, 0.5] {
            let params = GprParams { length_scale: Some(center * factor), noise, ..base.clone() };
            let model = match train_gpr(x, y, &params) {
                Ok(m) => m,
                Err(RegressionError::CholeskyFailure(_)) => continue,
                Err(e) => return Err(e),
            };
            let lml = log_marginal_likelihood(&model, y);
            if best.as_ref().is_none_or(|(b, _)| lml > *b) {
                best = Some((lml, params));
            }
        }
    }
    best.map(|(_, p)| p).ok_or(RegressionError::CholeskyFailure(0))
}
