//! Frozen SSIM and HaarPSI values come from `tests/oracles/metric_reference.py`
//! (scikit-image SSIM and a NumPy port of the published HaarPSI code), run on
//! the same splitmix64 streams generated here.

use actmap::metrics::{haarpsi, psnr, ssim, MapView};

use super::{ensure, SplitMix64};

pub const SSIM_REFERENCE: [f64; 20] = [
    0.995179501670,
    0.979166262896,
    0.953473434440,
    0.926263339605,
    0.888305333539,
    0.994942223001,
    0.979906953763,
    0.956047485677,
    0.925023520417,
    0.890468538560,
    0.935148052687,
    0.924261178237,
    0.904972809092,
    0.873221975706,
    0.838408401003,
    0.937576494561,
    0.931554134954,
    0.901782927842,
    0.874028421461,
    0.842286872276,
];

pub const HAARPSI_REFERENCE: [f64; 10] = [
    0.878996140521,
    0.927506367164,
    0.864065082843,
    0.885969931257,
    0.978491117194,
    0.946454404132,
    0.871417739708,
    0.787909151723,
    0.929973559994,
    0.590159103547,
];

/// Random 16×16 map (seed 42) against itself plus 10, range 1.
pub const SSIM_SHIFTED_REFERENCE: f64 = 0.110321191770;

pub fn ssim_pair(k: u64) -> (Vec<f32>, Vec<f32>, f64) {
    let mut rng = SplitMix64::new(1000 + k);
    let n = 32 * 32;
    let dyn_range = if k % 2 == 0 { 1.0 } else { 255.0 };
    let a: Vec<f64> = (0..n).map(|_| rng.uniform() * dyn_range).collect();
    let t = 0.1 + 0.1 * (k % 5) as f64;
    let shift = if k >= 10 { 0.2 * dyn_range } else { 0.0 };
    let b: Vec<f64> = a.iter().map(|&v| v + t * dyn_range * (rng.uniform() - 0.5) + shift).collect();
    (to_f32(&a), to_f32(&b), dyn_range)
}

pub fn haarpsi_pair(k: u64) -> (Vec<f32>, Vec<f32>, usize, f64) {
    let mut rng = SplitMix64::new(2000 + k);
    let size = if k < 8 { 32 } else { 12 };
    let dyn_range = if k % 2 == 0 { 255.0 } else { 1.0 };
    let base: Vec<f64> = (0..size * size).map(|_| rng.uniform() * dyn_range).collect();
    let a = box3(&base, size);
    let b = if k % 3 == 0 {
        box3(&a, size)
    } else {
        let t = 0.05 * (1 + k % 4) as f64;
        a.iter().map(|&v| v + t * dyn_range * (rng.uniform() - 0.5)).collect()
    };
    (to_f32(&a), to_f32(&b), size, dyn_range)
}

pub fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

/// 3×3 box mean, window clipped at the border.
pub fn box3(img: &[f64], size: usize) -> Vec<f64> {
    let mut out = vec![0.0; size * size];
    for y in 0..size {
        for x in 0..size {
            let (y0, y1) = (y.saturating_sub(1), (y + 2).min(size));
            let (x0, x1) = (x.saturating_sub(1), (x + 2).min(size));
            let mut sum = 0.0;
            for yy in y0..y1 {
                for xx in x0..x1 {
                    sum += img[yy * size + xx];
                }
            }
            out[y * size + x] = sum / ((y1 - y0) * (x1 - x0)) as f64;
        }
    }
    out
}

fn view(data: &[f32], w: usize, h: usize) -> MapView<'_> {
    MapView::new(data, w, h).expect("valid map")
}

type Metric = fn(MapView, MapView, f64) -> Result<f64, actmap::metrics::MetricError>;

fn eval(f: Metric, a: &[f32], b: &[f32], w: usize, h: usize, l: f64) -> Result<f64, String> {
    f(view(a, w, h), view(b, w, h), l).map_err(|e| e.to_string())
}

/// Worked examples and properties of the three metrics.
pub fn check_metric_examples() -> Result<String, String> {
    let mut checked = 0;
    let mut expect = |cond: bool, what: &str| {
        checked += 1;
        ensure(cond, || what.to_string())
    };

    let a = [0.3f32, 0.7, 0.1];
    expect(eval(psnr, &a, &a, 3, 1, 1.0)? == 100.0, "psnr(a, a) must be the 100 dB cap")?;
    expect(eval(psnr, &[0.0, 0.0], &[1.0, 1.0], 2, 1, 1.0)? == 0.0, "unit error must give 0 dB")?;
    let v = eval(psnr, &[0.0, 2.0], &[0.0, 0.0], 2, 1, 2.0)?;
    expect((v - 3.0103).abs() < 1e-4, "psnr([0,2],[0,0],2) must be 3.0103 dB")?;

    let mut rng = SplitMix64::new(42);
    let r16: Vec<f32> = (0..256).map(|_| rng.uniform() as f32).collect();
    expect(eval(ssim, &r16, &r16, 16, 16, 1.0)? == 1.0, "ssim(a, a) must be exactly 1")?;
    let c = vec![0.4f32; 144];
    expect(eval(ssim, &c, &c, 12, 12, 1.0)? == 1.0, "ssim of equal constants must be 1")?;
    let shifted: Vec<f32> = r16.iter().map(|&v| (v as f64 + 10.0) as f32).collect();
    let s = eval(ssim, &r16, &shifted, 16, 16, 1.0)?;
    expect(s < 0.5 && (s - SSIM_SHIFTED_REFERENCE).abs() <= 2e-3, "ssim under a large shift")?;

    let mut rng = SplitMix64::new(77);
    let r32: Vec<f32> = (0..1024).map(|_| rng.uniform() as f32).collect();
    let noise: Vec<f32> = (0..1024).map(|_| (rng.uniform() - 0.5) as f32).collect();
    expect((eval(haarpsi, &r32, &r32, 32, 32, 1.0)? - 1.0).abs() < 1e-9, "haarpsi(a, a) must be 1")?;
    for k in 0..10u64 {
        let (a, b, size, l) = haarpsi_pair(k);
        let v = eval(haarpsi, &a, &b, size, size, l)?;
        expect((0.0..=1.0).contains(&v), "haarpsi must lie in [0, 1]")?;
    }
    let board: Vec<f64> = (0..1024).map(|i| (((i % 32) / 4 + (i / 32) / 4) % 2) as f64).collect();
    let blurred = to_f32(&box3(&board, 32));
    let board = to_f32(&board);
    let identity = eval(haarpsi, &board, &board, 32, 32, 1.0)?;
    expect(eval(haarpsi, &board, &blurred, 32, 32, 1.0)? < identity, "blurred checkerboard must score below identity")?;

    let other: Vec<f32> = r32.iter().zip(&noise).map(|(a, n)| a + 0.3 * n).collect();
    for f in [psnr as Metric, ssim, haarpsi] {
        expect(
            eval(f, &r32, &other, 32, 32, 1.0)? == eval(f, &other, &r32, 32, 32, 1.0)?,
            "metrics must be symmetric",
        )?;
    }

    let mut last = f64::INFINITY;
    for t in [0.0, 0.1, 0.5, 1.0] {
        let b: Vec<f32> = r32.iter().zip(&noise).map(|(a, n)| a + t as f32 * n).collect();
        let v = eval(ssim, &r32, &b, 32, 32, 1.0)?;
        expect(v < last, "ssim must decrease as the noise amplitude grows")?;
        last = v;
    }

    // A 180° rotation is a different base map with the same variance.
    let rotated: Vec<f32> = r32.iter().rev().copied().collect();
    let plus = |m: &[f32]| -> Vec<f32> { m.iter().map(|v| v + 0.3).collect() };
    let s1 = eval(ssim, &r32, &plus(&r32), 32, 32, 1.0)?;
    let s2 = eval(ssim, &rotated, &plus(&rotated), 32, 32, 1.0)?;
    expect((s1 - s2).abs() < 1e-6, "ssim(a, a + c) must depend only on c")?;

    Ok(format!("{checked} worked examples and properties"))
}

/// SSIM against scikit-image on 20 random 32×32 pairs, within 2e-3.
pub fn check_ssim_reference() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for (k, &expected) in SSIM_REFERENCE.iter().enumerate() {
        let (a, b, l) = ssim_pair(k as u64);
        worst = worst.max((eval(ssim, &a, &b, 32, 32, l)? - expected).abs());
    }
    ensure(worst <= 2e-3, || format!("max |ssim - reference| = {worst:.3e} > 2e-3"))?;
    Ok(format!("20 pairs, max abs diff {worst:.2e}"))
}

/// HaarPSI against the published reference construction on 10 pairs, within 5e-3.
pub fn check_haarpsi_reference() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for (k, &expected) in HAARPSI_REFERENCE.iter().enumerate() {
        let (a, b, size, l) = haarpsi_pair(k as u64);
        worst = worst.max((eval(haarpsi, &a, &b, size, size, l)? - expected).abs());
    }
    ensure(worst <= 5e-3, || format!("max |haarpsi - reference| = {worst:.3e} > 5e-3"))?;
    Ok(format!("10 pairs, max abs diff {worst:.2e}"))
}
