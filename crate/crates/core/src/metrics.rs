//! Classical similarity metrics on pairs of single-channel maps.
//!
//! Every metric is symmetric in its two arguments and reaches its maximum
//! (100 dB for PSNR, 1 for SSIM and HaarPSI) on identical inputs. Maps are
//! `f32` but all accumulation happens in `f64`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// PSNR value reported for identical maps.
pub const PSNR_CAP_DB: f64 = 100.0;
/// Floor for pairwise-adaptive dynamic ranges, so dead channels keep a usable scale.
pub const MIN_DYNAMIC_RANGE: f64 = 1e-6;

const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_MIN_WINDOW: usize = 3;

/// Stabilizer of the reference construction, on the 0..255 scale.
const HAARPSI_C: f64 = 30.0;
const HAARPSI_ALPHA: f64 = 4.2;
const HAARPSI_SCALES: usize = 3;
const HAARPSI_SUBSAMPLE_MIN: usize = 16;
const HAARPSI_MIN_SIZE: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("map of {width}x{height} is smaller than the minimum size {min}")]
    MapTooSmall { width: usize, height: usize, min: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Borrowed row-major single-channel map.
#[derive(Debug, Clone, Copy)]
pub struct MapView<'a> {
    data: &'a [f32],
    width: usize,
    height: usize,
}

impl<'a> MapView<'a> {
    pub fn new(data: &'a [f32], width: usize, height: usize) -> Result<Self, MetricError> {
        if data.len() != width * height || width == 0 || height == 0 {
            return Err(MetricError::ShapeMismatch(format!("{width}x{height} map cannot hold {} values", data.len())));
        }
        Ok(Self { data, width, height })
    }

    pub fn data(&self) -> &'a [f32] {
        self.data
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    fn max(&self) -> f64 {
        self.data.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v as f64))
    }

    fn is_all_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    fn to_f64(self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }
}

fn check_same_shape(a: &MapView, b: &MapView) -> Result<(), MetricError> {
    if a.width != b.width || a.height != b.height {
        return Err(MetricError::ShapeMismatch(format!("{}x{} vs {}x{}", a.width, a.height, b.width, b.height)));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<(), MetricError> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(MetricError::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

/// Range used when comparing two activation maps: the larger of the two
/// maxima, floored at [`MIN_DYNAMIC_RANGE`].
pub fn adaptive_range(a: &MapView, b: &MapView) -> f64 {
    a.max().max(b.max()).max(MIN_DYNAMIC_RANGE)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SimilarityMetric {
    Psnr,
    Ssim,
    HaarPsi,
}

impl SimilarityMetric {
    pub const ALL: [SimilarityMetric; 3] = [SimilarityMetric::Psnr, SimilarityMetric::Ssim, SimilarityMetric::HaarPsi];

    /// Value attained on identical inputs.
    pub fn max_value(self) -> f64 {
        match self {
            SimilarityMetric::Psnr => PSNR_CAP_DB,
            SimilarityMetric::Ssim | SimilarityMetric::HaarPsi => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SimilarityMetric::Psnr => "psnr",
            SimilarityMetric::Ssim => "ssim",
            SimilarityMetric::HaarPsi => "haarpsi",
        }
    }

    /// Compare two maps using the pairwise-adaptive range as peak / dynamic range.
    pub fn compare(self, a: MapView, b: MapView) -> Result<f64, MetricError> {
        check_same_shape(&a, &b)?;
        let range = adaptive_range(&a, &b);
        match self {
            SimilarityMetric::Psnr => psnr(a, b, range),
            SimilarityMetric::Ssim => ssim(a, b, range),
            SimilarityMetric::HaarPsi => haarpsi(a, b, range),
        }
    }
}

impl fmt::Display for SimilarityMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SimilarityMetric {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "psnr" => Ok(SimilarityMetric::Psnr),
            "ssim" => Ok(SimilarityMetric::Ssim),
            "haarpsi" => Ok(SimilarityMetric::HaarPsi),
            other => Err(MetricError::InvalidParameter(format!("unknown metric '{other}'"))),
        }
    }
}

/// Peak signal-to-noise ratio in dB, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: MapView, b: MapView, peak: f64) -> Result<f64, MetricError> {
    check_same_shape(&a, &b)?;
    check_positive("peak", peak)?;
    let sse: f64 = a
        .data
        .iter()
        .zip(b.data)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    let mse = sse / a.data.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size / 2) as f64;
    let mut k: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - c;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable "valid" filtering: output is `(w - k + 1) x (h - k + 1)`.
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let ow = w - n + 1;
    let oh = h - n + 1;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = k.iter().zip(&line[x..x + n]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                acc += kv * rows[(y + i) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

/// Window size and Gaussian sigma used for a map of the given size.
/// Maps smaller than 11 use the largest odd window that fits, with sigma
/// scaled by `window / 11`.
pub fn ssim_window(width: usize, height: usize) -> Result<(usize, f64), MetricError> {
    let m = width.min(height);
    if m < SSIM_MIN_WINDOW {
        return Err(MetricError::MapTooSmall { width, height, min: SSIM_MIN_WINDOW });
    }
    if m >= SSIM_WINDOW {
        return Ok((SSIM_WINDOW, SSIM_SIGMA));
    }
    let win = if m % 2 == 1 { m } else { m - 1 };
    Ok((win, SSIM_SIGMA * win as f64 / SSIM_WINDOW as f64))
}

/// Mean SSIM over all valid positions of a Gaussian window.
pub fn ssim(a: MapView, b: MapView, dynamic_range: f64) -> Result<f64, MetricError> {
    check_same_shape(&a, &b)?;
    check_positive("dynamic_range", dynamic_range)?;
    let (w, h) = (a.width, a.height);
    let (win, sigma) = ssim_window(w, h)?;
    if a.is_all_zero() && b.is_all_zero() {
        return Ok(1.0);
    }
    let c1 = (SSIM_K1 * dynamic_range).powi(2);
    let c2 = (SSIM_K2 * dynamic_range).powi(2);
    let kernel = gaussian_kernel(win, sigma);

    let x = a.to_f64();
    let y = b.to_f64();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();

    let mu_x = filter_valid(&x, w, h, &kernel);
    let mu_y = filter_valid(&y, w, h, &kernel);
    let e_xx = filter_valid(&xx, w, h, &kernel);
    let e_yy = filter_valid(&yy, w, h, &kernel);
    let e_xy = filter_valid(&xy, w, h, &kernel);

    let n = mu_x.len();
    let mut total = 0.0;
    for i in 0..n {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let vx = e_xx[i] - mx * mx;
        let vy = e_yy[i] - my * my;
        let cov = e_xy[i] - mx * my;
        let num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
        let den = (mx * mx + my * my + c1) * (vx + vy + c2);
        total += num / den;
    }
    Ok(total / n as f64)
}

/// 2-D convolution with a separable kernel `col ⊗ row`, zero padding, and
/// output cropped to the input size with the same centering as MATLAB's
/// `conv2(..., 'same')`.
fn conv_same_separable(src: &[f64], w: usize, h: usize, col: &[f64], row: &[f64]) -> Vec<f64> {
    let conv_1d = |get: &dyn Fn(isize) -> f64, len: usize, k: &[f64], out: &mut dyn FnMut(usize, f64)| {
        let offset = (k.len() / 2) as isize;
        for i in 0..len {
            let mut acc = 0.0;
            for (m, kv) in k.iter().enumerate() {
                let j = i as isize + offset - m as isize;
                if j >= 0 && (j as usize) < len {
                    acc += kv * get(j);
                }
            }
            out(i, acc);
        }
    };
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        conv_1d(&|j| line[j as usize], w, row, &mut |i, v| tmp[y * w + i] = v);
    }
    let mut out = vec![0.0; w * h];
    for x in 0..w {
        conv_1d(&|j| tmp[j as usize * w + x], h, col, &mut |i, v| out[i * w + x] = v);
    }
    out
}

fn haar_subsample(src: &[f64], w: usize, h: usize) -> (Vec<f64>, usize, usize) {
    let half = [0.5, 0.5];
    let smoothed = conv_same_separable(src, w, h, &half, &half);
    let (ow, oh) = (w.div_ceil(2), h.div_ceil(2));
    let mut out = Vec::with_capacity(ow * oh);
    for y in (0..h).step_by(2) {
        for x in (0..w).step_by(2) {
            out.push(smoothed[y * w + x]);
        }
    }
    (out, ow, oh)
}

/// Haar filter responses: `[orientation][scale]`, orientation 0 responds to
/// vertical change, orientation 1 to horizontal change.
fn haar_decompose(src: &[f64], w: usize, h: usize) -> [[Vec<f64>; HAARPSI_SCALES]; 2] {
    let mut coeffs: [[Vec<f64>; HAARPSI_SCALES]; 2] = Default::default();
    for scale in 1..=HAARPSI_SCALES {
        let n = 1usize << scale;
        let amp = 0.5f64.powi(scale as i32);
        let signed: Vec<f64> = (0..n).map(|i| if i < n / 2 { -amp } else { amp }).collect();
        let ones = vec![1.0; n];
        coeffs[0][scale - 1] = conv_same_separable(src, w, h, &signed, &ones);
        coeffs[1][scale - 1] = conv_same_separable(src, w, h, &ones, &signed);
    }
    coeffs
}

fn logistic(x: f64, alpha: f64) -> f64 {
    1.0 / (1.0 + (-alpha * x).exp())
}

fn logit(p: f64, alpha: f64) -> f64 {
    (p / (1.0 - p)).ln() / alpha
}

/// Haar wavelet-based perceptual similarity index of two grayscale maps.
///
/// Maps of at least 16 pixels per side are first smoothed by a 2×2 mean and
/// subsampled by two; smaller maps skip that step. Local similarities use the
/// two finest Haar scales, weights come from the coarsest, and the weighted
/// mean of logistic-squashed similarities is mapped back through the logit
/// and squared.
pub fn haarpsi(a: MapView, b: MapView, dynamic_range: f64) -> Result<f64, MetricError> {
    check_same_shape(&a, &b)?;
    check_positive("dynamic_range", dynamic_range)?;
    let (mut w, mut h) = (a.width, a.height);
    if w.min(h) < HAARPSI_MIN_SIZE {
        return Err(MetricError::MapTooSmall { width: w, height: h, min: HAARPSI_MIN_SIZE });
    }
    if a.is_all_zero() && b.is_all_zero() {
        return Ok(1.0);
    }
    let c = HAARPSI_C * (dynamic_range / 255.0).powi(2);
    let mut x = a.to_f64();
    let mut y = b.to_f64();
    if w.min(h) >= HAARPSI_SUBSAMPLE_MIN {
        let (sx, nw, nh) = haar_subsample(&x, w, h);
        let (sy, _, _) = haar_subsample(&y, w, h);
        x = sx;
        y = sy;
        w = nw;
        h = nh;
    }
    let cx = haar_decompose(&x, w, h);
    let cy = haar_decompose(&y, w, h);

    let mut weighted = 0.0;
    let mut weight_sum = 0.0;
    let mut plain = 0.0;
    for o in 0..2 {
        for i in 0..w * h {
            let weight = cx[o][2][i].abs().max(cy[o][2][i].abs());
            let mut local = 0.0;
            for s in 0..2 {
                let (gx, gy) = (cx[o][s][i].abs(), cy[o][s][i].abs());
                local += (2.0 * gx * gy + c) / (gx * gx + gy * gy + c);
            }
            let squashed = logistic(local / 2.0, HAARPSI_ALPHA);
            weighted += squashed * weight;
            weight_sum += weight;
            plain += squashed;
        }
    }
    // No coarse-scale energy in either map: fall back to an unweighted mean.
    let pooled = if weight_sum > 0.0 { weighted / weight_sum } else { plain / (2 * w * h) as f64 };
    let value = logit(pooled, HAARPSI_ALPHA).powi(2);
    Ok(value.clamp(0.0, 1.0))
}
