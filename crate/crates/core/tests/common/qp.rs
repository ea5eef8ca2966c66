use actmap::regression::{solve_epsilon_svr, train_gpr, train_svr, GprParams, SvrKernel, SvrParams};

use super::{ensure, SplitMix64};

pub fn random_matrix(rng: &mut SplitMix64, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.range(-1.0, 1.0)).collect()).collect()
}

pub fn rbf_gram(x: &[Vec<f64>], gamma: f64) -> Vec<f64> {
    let n = x.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let d2: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            k[i * n + j] = (-gamma * d2).exp();
        }
    }
    k
}

pub fn linear_gram(x: &[Vec<f64>]) -> Vec<f64> {
    let n = x.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            k[i * n + j] = x[i].iter().zip(&x[j]).map(|(a, b)| a * b).sum();
        }
    }
    k
}

/// Dual objective `½βᵀKβ + εΣ|β| − yᵀβ` written in terms of `β = α − α*`.
pub fn dual_objective(k: &[f64], y: &[f64], eps: f64, beta: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += beta[i] * k[i * n + j] * beta[j];
        }
    }
    0.5 * quad + eps * beta.iter().map(|b| b.abs()).sum::<f64>() - y.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>()
}

/// Euclidean projection onto `{0 ≤ a ≤ C, Σ s_t a_t = 0}` by bisection on the multiplier.
fn project(v: &[f64], n: usize, c: f64) -> Vec<f64> {
    let s = |t: usize| if t < n { 1.0 } else { -1.0 };
    let at = |lambda: f64| -> Vec<f64> { (0..v.len()).map(|t| (v[t] - lambda * s(t)).clamp(0.0, c)).collect() };
    let residual = |a: &[f64]| -> f64 { (0..a.len()).map(|t| s(t) * a[t]).sum() };
    let bound = v.iter().map(|x| x.abs()).fold(0.0, f64::max) + c + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(&at(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Accelerated projected gradient on the 2n-variable dual; returns `β`.
pub fn projected_gradient(k: &[f64], y: &[f64], c: f64, eps: f64, iters: usize) -> Vec<f64> {
    let n = y.len();
    let m = 2 * n;
    let s = |t: usize| if t < n { 1.0 } else { -1.0 };
    let p: Vec<f64> = (0..m).map(|t| if t < n { eps - y[t] } else { eps + y[t - n] }).collect();
    let grad = |a: &[f64]| -> Vec<f64> {
        let beta: Vec<f64> = (0..n).map(|i| a[i] - a[i + n]).collect();
        (0..m)
            .map(|t| {
                let kb: f64 = (0..n).map(|j| k[(t % n) * n + j] * beta[j]).sum();
                s(t) * kb + p[t]
            })
            .collect()
    };
    // Lipschitz constant of ∇: 2·λmax(K), by power iteration.
    let mut v = vec![1.0; n];
    let mut lambda = 0.0;
    for _ in 0..500 {
        let w: Vec<f64> = (0..n).map(|i| (0..n).map(|j| k[i * n + j] * v[j]).sum()).collect();
        lambda = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = w.iter().map(|x| x / lambda).collect();
    }
    let step = 1.0 / (2.0 * lambda * 1.01);
    let mut a = vec![0.0; m];
    let mut z = a.clone();
    let mut t_k = 1.0f64;
    for _ in 0..iters {
        let g = grad(&z);
        let next = project(&(0..m).map(|t| z[t] - step * g[t]).collect::<Vec<_>>(), n, c);
        let t_next = (1.0 + (1.0 + 4.0 * t_k * t_k).sqrt()) / 2.0;
        z = (0..m).map(|t| next[t] + (t_k - 1.0) / t_next * (next[t] - a[t])).collect();
        a = next;
        t_k = t_next;
    }
    (0..n).map(|i| a[i] - a[i + n]).collect()
}

/// Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Column means and population standard deviations (zero replaced by one).
pub fn standardize(x: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len() as f64;
    let d = x[0].len();
    let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let sd: Vec<f64> = (0..d)
        .map(|j| (x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt())
        .map(|s| if s > 0.0 { s } else { 1.0 })
        .collect();
    (mean, sd)
}

/// Two points `x = 0, 1` with targets `0, 1`, linear kernel, large C and
/// ε = 0: the only feasible line is slope 1, bias 0.
pub fn check_smo_two_point() -> Result<String, String> {
    let x = vec![vec![0.0], vec![1.0]];
    let params = SvrParams { c: 1e6, epsilon: 0.0, ..Default::default() };
    let m = train_svr(&x, &[0.0, 1.0], SvrKernel::Linear, &params).map_err(|e| e.to_string())?;
    let p0 = m.predict(&[0.0]).map_err(|e| e.to_string())?;
    let p1 = m.predict(&[1.0]).map_err(|e| e.to_string())?;
    let slope = p1 - p0;
    ensure((slope - 1.0).abs() < 1e-3 && p0.abs() < 1e-3 && (p1 - 1.0).abs() < 1e-3, || {
        format!("slope {slope}, predictions [{p0}, {p1}]")
    })?;
    Ok(format!("slope {slope:.6}, bias {p0:.2e}"))
}

/// SMO against accelerated projected gradient on 10 random 40×6 problems
/// (RBF and linear kernels alternating), plus dual feasibility of each solution.
pub fn check_smo_vs_projected_gradient() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for case in 0..10u64 {
        let mut rng = SplitMix64::new(500 + case);
        let x = random_matrix(&mut rng, 40, 6);
        let w: Vec<f64> = (0..6).map(|_| rng.range(-1.0, 1.0)).collect();
        let y: Vec<f64> =
            x.iter().map(|r| r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + 0.2 * rng.range(-1.0, 1.0)).collect();
        let k = if case % 2 == 0 { rbf_gram(&x, 1.0 / 6.0) } else { linear_gram(&x) };
        let (c, eps) = (1.0, 0.1);
        let sol = solve_epsilon_svr(&k, &y, c, eps, 1e-3, 1_000_000).map_err(|e| format!("case {case}: {e}"))?;
        let beta = &sol.coefficients;
        let smo = dual_objective(&k, &y, eps, beta);
        ensure((smo - sol.objective).abs() <= 1e-9 * smo.abs().max(1.0), || {
            format!("case {case}: reported objective {} vs recomputed {smo}", sol.objective)
        })?;
        ensure(beta.iter().all(|b| b.abs() <= c + 1e-12), || format!("case {case}: coefficient outside [-C, C]"))?;
        let sum: f64 = beta.iter().sum();
        ensure(sum.abs() <= 1e-9, || format!("case {case}: coefficients sum to {sum:.3e}"))?;
        let oracle = dual_objective(&k, &y, eps, &projected_gradient(&k, &y, c, eps, 3000));
        let rel = (smo - oracle).abs() / oracle.abs();
        ensure(rel <= 1e-3, || format!("case {case}: SMO {smo} vs oracle {oracle} (rel {rel:.2e})"))?;
        worst = worst.max(rel);
    }
    Ok(format!("10 problems, max relative objective gap {worst:.2e}"))
}

/// Trained models keep `|β| ≤ C` and `Σβ = 0` for both kernels.
pub fn check_dual_feasibility() -> Result<String, String> {
    for case in 0..5u64 {
        let mut rng = SplitMix64::new(900 + case);
        let x = random_matrix(&mut rng, 50, 4);
        let y: Vec<f64> = x.iter().map(|r| (3.0 * r[0]).sin() + r[1] * r[2]).collect();
        for kernel in [SvrKernel::Linear, SvrKernel::Rbf { gamma: None }] {
            let params = SvrParams { c: 2.0, ..Default::default() };
            let m = train_svr(&x, &y, kernel, &params).map_err(|e| e.to_string())?;
            let coef = m.dual_coefficients();
            ensure(coef.iter().all(|b| b.abs() <= params.c + 1e-9), || format!("case {case}: box constraint"))?;
            let sum: f64 = coef.iter().sum();
            ensure(sum.abs() <= 1e-9, || format!("case {case}: equality constraint, sum {sum:.3e}"))?;
        }
    }
    Ok("10 trained models feasible".into())
}

/// GPR posterior mean against a dense Gaussian-elimination solve on 10
/// random 20×4 problems, 10 queries each, within 1e-8.
pub fn check_gpr_dense_solve() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for case in 0..10u64 {
        let mut rng = SplitMix64::new(77 + case);
        let x: Vec<Vec<f64>> = (0..20).map(|_| (0..4).map(|_| rng.range(0.0, 5.0)).collect()).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0].sin() + 0.3 * r[1] - r[2] * r[3] / 10.0).collect();
        let model = train_gpr(&x, &y, &GprParams::default()).map_err(|e| format!("case {case}: {e}"))?;

        let (mean, sd) = standardize(&x);
        let z = |r: &[f64]| -> Vec<f64> { r.iter().enumerate().map(|(j, v)| (v - mean[j]) / sd[j]).collect() };
        // Defaults: unit signal variance, ℓ² = d = 4, α = 1, noise 0.05.
        let ell2 = 4.0;
        let rq = |a: &[f64], b: &[f64]| {
            let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
            1.0 / (1.0 + d2 / (2.0 * ell2))
        };
        let zs: Vec<Vec<f64>> = x.iter().map(|r| z(r)).collect();
        let a: Vec<Vec<f64>> =
            (0..20).map(|i| (0..20).map(|j| rq(&zs[i], &zs[j]) + if i == j { 0.05 } else { 0.0 }).collect()).collect();
        let weights = dense_solve(a, y.clone());
        for _ in 0..10 {
            let q: Vec<f64> = (0..4).map(|_| rng.range(-1.0, 6.0)).collect();
            let zq = z(&q);
            let expected: f64 = zs.iter().zip(&weights).map(|(r, w)| w * rq(r, &zq)).sum();
            let got = model.predict(&q).map_err(|e| e.to_string())?;
            worst = worst.max((got - expected).abs());
        }
    }
    ensure(worst < 1e-8, || format!("max |gpr - dense solve| = {worst:.3e}"))?;
    Ok(format!("10 problems, max abs diff {worst:.2e}"))
}

/// One training point: mean `σf²/(σf² + σn²)·y` at the point and
/// `k(q, x)/(σf² + σn²)·y` elsewhere.
pub fn check_gpr_one_point() -> Result<String, String> {
    let x = vec![vec![2.0, 1.0]];
    let model = train_gpr(&x, &[3.0], &GprParams::default()).map_err(|e| e.to_string())?;
    let at = model.predict(&[2.0, 1.0]).map_err(|e| e.to_string())?;
    // d = 2, so ℓ² = 2 and a unit offset gives k = 1/(1 + 1/4) = 0.8.
    let off = model.predict(&[3.0, 1.0]).map_err(|e| e.to_string())?;
    ensure((at - 3.0 / 1.05).abs() < 1e-12, || format!("mean at the point {at}, expected {}", 3.0 / 1.05))?;
    ensure((off - 0.8 * 3.0 / 1.05).abs() < 1e-12, || {
        format!("mean off the point {off}, expected {}", 0.8 * 3.0 / 1.05)
    })?;
    Ok(format!("closed form reproduced ({at:.6}, {off:.6})"))
}
