use actmap::evaluation::{fit_logistic5, fractional_ranks, krocc, plcc, srocc};

use super::{ensure, SplitMix64};

/// Random vector; every third case draws from a small integer range to force ties.
pub fn sample(rng: &mut SplitMix64, n: usize, case: usize) -> Vec<f64> {
    (0..n).map(|_| if case % 3 == 0 { rng.below(7) as f64 } else { rng.range(-10.0, 10.0) }).collect()
}

/// Pearson correlation written out term by term.
pub fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mut sum_x = 0.0;
    for v in x {
        sum_x += v;
    }
    let mut sum_y = 0.0;
    for v in y {
        sum_y += v;
    }
    let (mx, my) = (sum_x / n, sum_y / n);
    let mut num = 0.0;
    let mut dx2 = 0.0;
    let mut dy2 = 0.0;
    for i in 0..x.len() {
        num += (x[i] - mx) * (y[i] - my);
        dx2 += (x[i] - mx) * (x[i] - mx);
        dy2 += (y[i] - my) * (y[i] - my);
    }
    (num / (dx2 * dy2).sqrt()).clamp(-1.0, 1.0)
}

/// Rank by counting: `1 + #smaller + (#equal − 1)/2`.
pub fn rank_oracle(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let smaller = x.iter().filter(|&&u| u < v).count();
            let equal = x.iter().filter(|&&u| u == v).count();
            1.0 + smaller as f64 + (equal as f64 - 1.0) / 2.0
        })
        .collect()
}

fn tie_pairs(sorted: &[f64]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

fn count_inversions(v: &mut Vec<f64>) -> u64 {
    if v.len() < 2 {
        return 0;
    }
    let mut right = v.split_off(v.len() / 2);
    let mut inv = count_inversions(v) + count_inversions(&mut right);
    let mut merged = Vec::with_capacity(v.len() + right.len());
    let (mut i, mut j) = (0, 0);
    while i < v.len() && j < right.len() {
        if right[j] < v[i] {
            merged.push(right[j]);
            inv += (v.len() - i) as u64;
            j += 1;
        } else {
            merged.push(v[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&v[i..]);
    merged.extend_from_slice(&right[j..]);
    *v = merged;
    inv
}

/// Knight's O(n log n) count of `n_c − n_d`, ties in either variable ignored.
pub fn kendall_merge_sort(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as u64;
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));
    let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let tied_x = tie_pairs(&xs);
    let mut joint = 0u64;
    let mut run = 1u64;
    for k in 1..idx.len() {
        if xs[k] == xs[k - 1] && ys[k] == ys[k - 1] {
            run += 1;
        } else {
            joint += run * (run - 1) / 2;
            run = 1;
        }
    }
    joint += run * (run - 1) / 2;
    let discordant = count_inversions(&mut ys);
    let tied_y = tie_pairs(&ys);
    let total = n * (n - 1) / 2;
    let concordant = total - (tied_x + tied_y - joint) - discordant;
    (concordant as i64 - discordant as i64) as f64 / total as f64
}

/// Ranks, PLCC, SROCC and KROCC equal the brute-force oracles exactly on 200
/// random vectors (n ≤ 200, a third of them heavily tied).
pub fn check_correlation_oracles() -> Result<String, String> {
    let mut rng = SplitMix64::new(2024);
    for case in 0..200 {
        let n = 3 + rng.below(198);
        let x = sample(&mut rng, n, case);
        let y = sample(&mut rng, n, case + 1);
        let rx = rank_oracle(&x);
        let ry = rank_oracle(&y);
        ensure(fractional_ranks(&x) == rx, || format!("case {case}: ranks differ"))?;
        match plcc(&x, &y) {
            Ok(r) => {
                let o = pearson_oracle(&x, &y);
                ensure(r == o, || format!("case {case}: plcc {r} vs {o}"))?;
            }
            Err(_) => ensure(x.iter().all(|v| *v == x[0]) || y.iter().all(|v| *v == y[0]), || {
                format!("case {case}: plcc rejected a non-constant input")
            })?,
        }
        if let Ok(s) = srocc(&x, &y) {
            let o = pearson_oracle(&rx, &ry);
            ensure(s == o, || format!("case {case}: srocc {s} vs {o}"))?;
        }
        let k = krocc(&x, &y).map_err(|e| format!("case {case}: {e}"))?;
        let o = kendall_merge_sort(&x, &y);
        ensure(k == o, || format!("case {case}: krocc {k} vs {o}"))?;
    }
    Ok("200 random vectors, exact agreement".into())
}

fn unwrap<T, E: std::fmt::Display>(r: Result<T, E>, case: usize) -> Result<T, String> {
    r.map_err(|e| format!("case {case}: {e}"))
}

/// SROCC under strictly increasing transforms, SROCC/KROCC sign agreement,
/// PLCC under positive affine maps, and the logistic mapping never lowering PLCC.
pub fn check_invariance_properties() -> Result<String, String> {
    let mut rng = SplitMix64::new(7);
    for case in 0..100 {
        let n = 5 + rng.below(60);
        let x: Vec<f64> = (0..n).map(|_| rng.range(-3.0, 3.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| v + rng.range(-2.0, 2.0)).collect();
        let base = unwrap(srocc(&x, &y), case)?;
        let ex: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let cy: Vec<f64> = y.iter().map(|v| v.powi(3)).collect();
        for (a, b) in [(&ex, &y), (&x, &cy), (&ex, &cy)] {
            ensure(unwrap(srocc(a, b), case)? == base, || format!("case {case}: srocc changed under a monotone map"))?;
        }
    }

    let mut rng = SplitMix64::new(99);
    for case in 0..100 {
        let n = 5 + rng.below(50);
        let x: Vec<f64> = (0..n).map(|_| rng.range(-1.0, 1.0)).collect();
        let sign = if rng.below(2) == 0 { 1.0 } else { -1.0 };
        let y: Vec<f64> = x.iter().map(|v| sign * (v * 2.0).sinh()).collect();
        let (s, k) = (unwrap(srocc(&x, &y), case)?, unwrap(krocc(&x, &y), case)?);
        ensure(s.signum() == k.signum() && s == sign, || format!("case {case}: srocc {s}, krocc {k}"))?;
    }

    let mut rng = SplitMix64::new(55);
    for case in 0..100 {
        let n = 3 + rng.below(100);
        let x: Vec<f64> = (0..n).map(|_| rng.range(-5.0, 5.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v + rng.range(-3.0, 3.0)).collect();
        let (a, b) = (rng.range(0.01, 100.0), rng.range(-50.0, 50.0));
        let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let d = (unwrap(plcc(&ax, &y), case)? - unwrap(plcc(&x, &y), case)?).abs();
        ensure(d < 1e-12, || format!("case {case}: plcc moved by {d:.2e} under an affine map"))?;
    }

    let mut rng = SplitMix64::new(314);
    for case in 0..40 {
        let n = 5 + rng.below(80);
        let pred: Vec<f64> = (0..n).map(|_| rng.range(0.0, 1.0)).collect();
        let mos: Vec<f64> = match case % 4 {
            0 => pred.iter().map(|p| p.powi(3) + 0.05 * rng.range(-1.0, 1.0)).collect(),
            1 => pred.iter().map(|p| 5.0 / (1.0 + (-8.0 * (p - 0.5)).exp()) + 0.2 * rng.range(-1.0, 1.0)).collect(),
            2 => pred.iter().map(|p| -3.0 * p + rng.range(-1.0, 1.0)).collect(),
            _ => (0..n).map(|_| rng.range(1.0, 5.0)).collect(),
        };
        let raw = unwrap(plcc(&pred, &mos), case)?;
        let fit = unwrap(fit_logistic5(&mos, &pred), case)?;
        let mapped = unwrap(plcc(&fit.apply(&pred), &mos), case)?;
        ensure(mapped >= raw.abs() - 1e-9, || format!("case {case}: logistic PLCC {mapped} < raw {raw}"))?;
    }
    Ok("340 property cases".into())
}
