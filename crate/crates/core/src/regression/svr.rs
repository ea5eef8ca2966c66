//! ε-insensitive support vector regression trained by SMO.
//!
//! The dual is solved in the 2n-variable form
//!
//! ```text
//! min ½ aᵀQa + pᵀa   s.t.  sᵀa = 0,  0 ≤ a ≤ C
//! ```
//!
//! with `a = [α; α*]`, `s = [+1…; −1…]`, `Q_tu = s_t s_u K(t mod n, u mod n)`,
//! `p = [ε − y; ε + y]`. Each step updates the maximal KKT-violating pair
//! and stops once the violation drops below the tolerance. No shrinking.

use super::{check_matrix, RegressionError, Standardizer};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SvrKernel {
    Linear,
    /// `exp(-gamma * |a - b|^2)`; `None` picks `1 / (d * var(X))` on the standardized training matrix.
    Rbf {
        gamma: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvrParams {
    pub c: f64,
    pub epsilon: f64,
    /// RBF width; ignored by the linear kernel.
    pub gamma: Option<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SvrParams {
    fn default() -> Self {
        Self { c: 1.0, epsilon: 0.1, gamma: None, tolerance: 1e-3, max_iterations: 1_000_000 }
    }
}

/// Raw solver output in the units of the kernel matrix and targets it was given.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    /// `α_i − α*_i` per training row.
    pub coefficients: Vec<f64>,
    /// Added to `Σ coef_i K(x_i, x)`.
    pub bias: f64,
    /// Value of the minimized dual objective.
    pub objective: f64,
    pub iterations: usize,
}

/// Solve the ε-SVR dual for a precomputed `n × n` row-major kernel matrix.
pub fn solve_epsilon_svr(
    kernel: &[f64],
    y: &[f64],
    c: f64,
    epsilon: f64,
    tolerance: f64,
    max_iterations: usize,
) -> Result<SmoSolution, RegressionError> {
    let n = y.len();
    if kernel.len() != n * n {
        return Err(RegressionError::DimensionMismatch(format!("kernel has {} entries for {n} targets", kernel.len())));
    }
    let m = 2 * n;
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let k = |t: usize, u: usize| kernel[(t % n) * n + (u % n)];
    let p: Vec<f64> = (0..m).map(|t| if t < n { epsilon - y[t] } else { epsilon + y[t - n] }).collect();

    let mut alpha = vec![0.0; m];
    let mut grad = p.clone();
    let mut iterations = 0;

    loop {
        // i: max of -s G over I_up, j: min of -s G over I_low.
        let mut gmax = f64::NEG_INFINITY;
        let mut gmin = f64::INFINITY;
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for t in 0..m {
            let s = sign(t);
            let v = -s * grad[t];
            let up = if s > 0.0 { alpha[t] < c } else { alpha[t] > 0.0 };
            let low = if s > 0.0 { alpha[t] > 0.0 } else { alpha[t] < c };
            if up && v > gmax {
                gmax = v;
                i = t;
            }
            if low && v < gmin {
                gmin = v;
                j = t;
            }
        }
        let gap = gmax - gmin;
        if i == usize::MAX || j == usize::MAX || gap < tolerance {
            break;
        }
        if iterations >= max_iterations {
            return Err(RegressionError::ConvergenceFailure { iterations, gap });
        }
        iterations += 1;

        let (si, sj) = (sign(i), sign(j));
        let qii = k(i, i);
        let qjj = k(j, j);
        let qij = si * sj * k(i, j);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if si != sj {
            let quad = (qii + qjj + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (qii + qjj - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..m {
            let st = sign(t);
            grad[t] += st * (si * k(i, t) * di + sj * k(j, t) * dj);
        }
    }

    // Offset from free variables, or the midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free_count) = (0.0, 0usize);
    for t in 0..m {
        let s = sign(t);
        let yg = s * grad[t];
        if alpha[t] >= c {
            if s < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if s > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_count += 1;
            free_sum += yg;
        }
    }
    let rho = if free_count > 0 { free_sum / free_count as f64 } else { (ub + lb) / 2.0 };
    let objective = 0.5 * (0..m).map(|t| alpha[t] * (grad[t] + p[t])).sum::<f64>();
    let coefficients = (0..n).map(|t| alpha[t] - alpha[t + n]).collect();
    Ok(SmoSolution { coefficients, bias: -rho, objective, iterations })
}

fn kernel_value(kernel: SvrKernel, gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    match kernel {
        SvrKernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        SvrKernel::Rbf { .. } => {
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            (-gamma * d2).exp()
        }
    }
}

/// A trained ε-SVR. Targets are centered and scaled to unit variance before
/// solving; predictions are mapped back to the original units.
#[derive(Debug, Clone, PartialEq)]
pub struct SvrModel {
    pub(super) kernel: SvrKernel,
    pub(super) gamma: f64,
    pub(super) c: f64,
    pub(super) epsilon: f64,
    pub(super) standardizer: Standardizer,
    pub(super) y_center: f64,
    pub(super) y_scale: f64,
    pub(super) support_vectors: Vec<Vec<f64>>,
    pub(super) coefficients: Vec<f64>,
    pub(super) bias: f64,
}

impl SvrModel {
    pub fn kernel(&self) -> SvrKernel {
        self.kernel
    }

    /// Effective RBF width (0 for the linear kernel).
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn dim(&self) -> usize {
        self.standardizer.dim()
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Dual coefficients of the retained support vectors (standardized target units).
    pub fn dual_coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn support_vectors(&self) -> &[Vec<f64>] {
        &self.support_vectors
    }

    pub fn bias(&self) -> f64 {
        self.bias
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
        let f: f64 = self
            .support_vectors
            .iter()
            .zip(&self.coefficients)
            .map(|(sv, coef)| coef * kernel_value(self.kernel, self.gamma, sv, &z))
            .sum::<f64>()
            + self.bias;
        Ok(f * self.y_scale + self.y_center)
    }
}

pub fn train_svr(
    x: &[Vec<f64>],
    y: &[f64],
    kernel: SvrKernel,
    params: &SvrParams,
) -> Result<SvrModel, RegressionError> {
    let d = check_matrix(x, y)?;
    if x.len() < 2 {
        return Err(RegressionError::DegenerateInput("SVR needs at least two training rows".into()));
    }
    if !(params.c > 0.0) || !(params.epsilon >= 0.0) || !(params.tolerance > 0.0) {
        return Err(RegressionError::InvalidParameter(format!(
            "need C > 0, epsilon >= 0, tolerance > 0 (got {}, {}, {})",
            params.c, params.epsilon, params.tolerance
        )));
    }
    let standardizer = Standardizer::fit(x);
    let z = standardizer.apply_all(x);

    let n = y.len();
    let y_center = y.iter().sum::<f64>() / n as f64;
    let y_sd = (y.iter().map(|v| (v - y_center).powi(2)).sum::<f64>() / n as f64).sqrt();
    let y_scale = if y_sd > 0.0 { y_sd } else { 1.0 };
    let targets: Vec<f64> = y.iter().map(|v| (v - y_center) / y_scale).collect();

    let gamma = match kernel {
        SvrKernel::Linear => 0.0,
        SvrKernel::Rbf { gamma: Some(g) } => {
            if !(g > 0.0) {
                return Err(RegressionError::InvalidParameter(format!("gamma must be positive, got {g}")));
            }
            g
        }
        SvrKernel::Rbf { gamma: None } => default_gamma(&z, d),
    };

    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = kernel_value(kernel, gamma, &z[i], &z[j]);
            gram[i * n + j] = v;
            gram[j * n + i] = v;
        }
    }
    let sol = solve_epsilon_svr(&gram, &targets, params.c, params.epsilon, params.tolerance, params.max_iterations)?;

    let (support_vectors, coefficients): (Vec<_>, Vec<_>) =
        z.into_iter().zip(sol.coefficients).filter(|(_, coef)| *coef != 0.0).unzip();
    let kernel = match kernel {
        SvrKernel::Linear => SvrKernel::Linear,
        SvrKernel::Rbf { .. } => SvrKernel::Rbf { gamma: Some(gamma) },
    };
    Ok(SvrModel {
        kernel,
        gamma,
        c: params.c,
        epsilon: params.epsilon,
        standardizer,
        y_center,
        y_scale,
        support_vectors,
        coefficients,
        bias: sol.bias,
    })
}

/// `1 / (d * var(Z))` over every entry of the standardized matrix.
fn default_gamma(z: &[Vec<f64>], d: usize) -> f64 {
    let count = (z.len() * d) as f64;
    let mean = z.iter().flatten().sum::<f64>() / count;
    let var = z.iter().flatten().map(|v| (v - mean).powi(2)).sum::<f64>() / count;
    if var > 0.0 {
        1.0 / (d as f64 * var)
    } else {
        1.0 / d as f64
    }
}
