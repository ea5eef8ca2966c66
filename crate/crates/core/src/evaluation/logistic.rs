//! Five-parameter logistic mapping from predicted scores to MOS:
//!
//! ```text
//! f(s) = β1 · (1/2 − 1/(1 + exp(β2 (s − β3)))) + β4 s + β5
//! ```
//!
//! fitted by least squares with a Nelder-Mead simplex.

use super::EvalError;

const MAX_ITERATIONS: usize = 2000;
const TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Logistic5 {
    pub beta: [f64; 5],
}

impl Logistic5 {
    pub fn eval(&self, s: f64) -> f64 {
        let [b1, b2, b3, b4, b5] = self.beta;
        b1 * (0.5 - 1.0 / (1.0 + (b2 * (s - b3)).exp())) + b4 * s + b5
    }

    pub fn apply(&self, scores: &[f64]) -> Vec<f64> {
        scores.iter().map(|&s| self.eval(s)).collect()
    }

    /// Sum of squared residuals against `target`.
    pub fn sse(&self, scores: &[f64], target: &[f64]) -> f64 {
        scores.iter().zip(target).map(|(&s, t)| (self.eval(s) - t).powi(2)).sum()
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn std(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Least-squares `(slope, intercept)` of `y ≈ slope·x + intercept`.
fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

fn nelder_mead(f: impl Fn(&[f64; 5]) -> f64, start: [f64; 5], steps: [f64; 5]) -> ([f64; 5], f64) {
    let mut simplex: Vec<([f64; 5], f64)> = vec![(start, f(&start))];
    for i in 0..5 {
        let mut p = start;
        p[i] += steps[i];
        simplex.push((p, f(&p)));
    }
    let sanitize = |v: f64| if v.is_nan() { f64::INFINITY } else { v };
    for s in simplex.iter_mut() {
        s.1 = sanitize(s.1);
    }
    let lerp = |a: &[f64; 5], b: &[f64; 5], t: f64| -> [f64; 5] { std::array::from_fn(|i| a[i] + t * (b[i] - a[i])) };

    for _ in 0..MAX_ITERATIONS {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[5].1);
        if worst - best <= TOLERANCE * (best.abs() + TOLERANCE) {
            break;
        }
        let centroid: [f64; 5] = std::array::from_fn(|i| simplex[..5].iter().map(|s| s.0[i]).sum::<f64>() / 5.0);
        let worst_point = simplex[5].0;
        let reflected = lerp(&centroid, &worst_point, -1.0);
        let fr = sanitize(f(&reflected));
        if fr < simplex[0].1 {
            let expanded = lerp(&centroid, &worst_point, -2.0);
            let fe = sanitize(f(&expanded));
            simplex[5] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[4].1 {
            simplex[5] = (reflected, fr);
        } else {
            let (target, ft) = if fr < worst { (reflected, fr) } else { (worst_point, worst) };
            let contracted = lerp(&centroid, &target, 0.5);
            let fc = sanitize(f(&contracted));
            if fc < ft {
                simplex[5] = (contracted, fc);
            } else {
                let anchor = simplex[0].0;
                for s in simplex.iter_mut().skip(1) {
                    s.0 = lerp(&anchor, &s.0, 0.5);
                    s.1 = sanitize(f(&s.0));
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0]
}

/// Fit the mapping `predicted → mos`.
///
/// Three starts are refined: a sigmoid start derived from the data, a purely
/// linear start (β1 = 0, least-squares β4, β5), and the sigmoid start with β2
/// negated. The best result is finally rescaled by a least-squares affine
/// map, which stays inside the family.
pub fn fit_logistic5(mos: &[f64], predicted: &[f64]) -> Result<Logistic5, EvalError> {
    if mos.len() != predicted.len() {
        return Err(EvalError::LengthMismatch { left: mos.len(), right: predicted.len() });
    }
    if mos.len() < 5 {
        return Err(EvalError::TooFewSamples { needed: 5, got: mos.len() });
    }
    if mos.iter().chain(predicted).any(|v| !v.is_finite()) {
        return Err(EvalError::DegenerateInput("non-finite score".into()));
    }
    let (lo, hi) = mos.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let sd_pred = std(predicted);
    let sd_mos = std(mos);
    let b2 = if sd_pred > 0.0 { 1.0 / sd_pred } else { 1.0 };
    let b3 = mean(predicted);
    let (slope, intercept) = ols(predicted, mos);

    let sigmoid = [hi - lo, b2, b3, 0.0, mean(mos)];
    let linear = [0.0, b2, b3, slope, intercept];
    let flipped = [hi - lo, -b2, b3, 0.0, mean(mos)];

    let scale = |v: f64, fallback: f64| if v.abs() > 0.0 { 0.1 * v.abs() } else { fallback };
    let steps = [
        scale(hi - lo, 0.1),
        scale(b2, 0.1),
        scale(sd_pred, 0.1),
        scale(if sd_pred > 0.0 { sd_mos / sd_pred } else { 0.0 }, 0.1),
        scale(sd_mos, 0.1),
    ];
    let objective = |b: &[f64; 5]| Logistic5 { beta: *b }.sse(predicted, mos);

    let mut best = Logistic5 { beta: linear };
    let mut best_sse = objective(&linear);
    for start in [sigmoid, linear, flipped] {
        let (beta, sse) = nelder_mead(objective, start, steps);
        if sse < best_sse {
            best = Logistic5 { beta };
            best_sse = sse;
        }
    }

    let mapped = best.apply(predicted);
    let (a, b) = ols(&mapped, mos);
    let [b1, b2, b3, b4, b5] = best.beta;
    let refit = Logistic5 { beta: [a * b1, b2, b3, a * b4, a * b5 + b] };
    if refit.sse(predicted, mos) <= best_sse {
        best = refit;
    }
    Ok(best)
}
