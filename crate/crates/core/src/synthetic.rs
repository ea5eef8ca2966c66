//! Procedural benchmark: synthetic references, four graded distortions and a
//! deterministic pseudo-MOS.
//!
//! Every reference is distorted by every `(kind, level)` pair. The pseudo-MOS
//! is `1 − slope(kind) · level / 5`, so it decreases strictly with level.
//! All randomness comes from one seeded Xoshiro256++ stream consumed in a
//! fixed order, which makes the emitted PNG files byte-identical per seed.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::{ImageFormat, Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use rand_xoshiro::Xoshiro256PlusPlus;
use thiserror::Error;

use crate::dataset::{write_manifest, DatasetError, DatasetManifest, ManifestRow};

pub const WIDTH: u32 = 128;
pub const HEIGHT: u32 = 96;
pub const LEVELS: u32 = 5;
pub const MIN_REFERENCES: usize = 5;

#[derive(Debug, Error)]
pub enum SyntheticError {
    #[error("need at least {MIN_REFERENCES} references, got {0}")]
    TooFewReferences(usize),
    #[error("distortion level must be in 1..={LEVELS}, got {0}")]
    InvalidLevel(u32),
    #[error("unknown distortion kind '{0}'")]
    UnknownKind(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Image { path: PathBuf, source: image::ImageError },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DistortionKind {
    GaussianBlur,
    WhiteNoise,
    JpegLikeBlockQuantization,
    MeanShift,
}

impl DistortionKind {
    pub const ALL: [DistortionKind; 4] = [
        DistortionKind::GaussianBlur,
        DistortionKind::WhiteNoise,
        DistortionKind::JpegLikeBlockQuantization,
        DistortionKind::MeanShift,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistortionKind::GaussianBlur => "gaussian_blur",
            DistortionKind::WhiteNoise => "white_noise",
            DistortionKind::JpegLikeBlockQuantization => "jpeg_like_block_quantization",
            DistortionKind::MeanShift => "mean_shift",
        }
    }

    /// Pseudo-MOS drop at level 5.
    pub fn slope(self) -> f64 {
        match self {
            DistortionKind::GaussianBlur => 0.8,
            DistortionKind::WhiteNoise => 0.75,
            DistortionKind::JpegLikeBlockQuantization => 0.7,
            DistortionKind::MeanShift => 0.65,
        }
    }

    /// Strength parameter per level:
    /// blur σ in pixels, noise σ and mean shift on the `[0, 1]` scale,
    /// and the base quantization step of the block DCT on the `[0, 255]` scale.
    pub fn parameter(self, level: u32) -> Result<f64, SyntheticError> {
        if !(1..=LEVELS).contains(&level) {
            return Err(SyntheticError::InvalidLevel(level));
        }
        let table = match self {
            DistortionKind::GaussianBlur => [0.6, 1.2, 1.8, 2.6, 3.5],
            DistortionKind::WhiteNoise => [0.02, 0.045, 0.075, 0.11, 0.16],
            DistortionKind::JpegLikeBlockQuantization => [4.0, 10.0, 20.0, 35.0, 60.0],
            DistortionKind::MeanShift => [0.02, 0.04, 0.07, 0.11, 0.16],
        };
        Ok(table[level as usize - 1])
    }
}

impl fmt::Display for DistortionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistortionKind {
    type Err = SyntheticError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| SyntheticError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DistortionSpec {
    pub kind: DistortionKind,
    pub level: u32,
}

impl DistortionSpec {
    pub fn new(kind: DistortionKind, level: u32) -> Result<Self, SyntheticError> {
        kind.parameter(level)?;
        Ok(Self { kind, level })
    }

    pub fn pseudo_mos(&self) -> f64 {
        1.0 - self.kind.slope() * self.level as f64 / LEVELS as f64
    }
}

/// Planar float image, values nominally in `[0, 1]`.
struct Planes {
    w: usize,
    h: usize,
    c: [Vec<f64>; 3],
}

impl Planes {
    fn new(w: usize, h: usize) -> Self {
        Self { w, h, c: std::array::from_fn(|_| vec![0.0; w * h]) }
    }

    fn from_image(img: &RgbImage) -> Self {
        let mut p = Self::new(img.width() as usize, img.height() as usize);
        for (i, px) in img.pixels().enumerate() {
            for k in 0..3 {
                p.c[k][i] = px.0[k] as f64 / 255.0;
            }
        }
        p
    }

    fn to_image(&self) -> RgbImage {
        RgbImage::from_fn(self.w as u32, self.h as u32, |x, y| {
            let i = y as usize * self.w + x as usize;
            Rgb(std::array::from_fn(|k| (self.c[k][i].clamp(0.0, 1.0) * 255.0).round() as u8))
        })
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let k: Vec<f64> = (-radius..=radius).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable Gaussian blur with replicated borders.
fn blur_plane(src: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as i64;
    let clampi = |v: i64, n: usize| v.clamp(0, n as i64 - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] =
                k.iter().enumerate().map(|(j, kv)| kv * src[y * w + clampi(x as i64 + j as i64 - r, w)]).sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] =
                k.iter().enumerate().map(|(j, kv)| kv * tmp[clampi(y as i64 + j as i64 - r, h) * w + x]).sum();
        }
    }
    out
}

/// A random reference: a color gradient, a partially masked checkerboard,
/// low-pass filtered noise texture and a few flat shapes.
pub fn generate_reference(rng: &mut Xoshiro256PlusPlus) -> RgbImage {
    let (w, h) = (WIDTH as usize, HEIGHT as usize);
    let mut p = Planes::new(w, h);

    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let (dx, dy) = (angle.cos(), angle.sin());
    let c0: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.1..0.6));
    let c1: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.4..0.9));
    let norm = (w as f64).hypot(h as f64);
    for y in 0..h {
        for x in 0..w {
            let t =
                (((x as f64 - w as f64 / 2.0) * dx + (y as f64 - h as f64 / 2.0) * dy) / norm + 0.5).clamp(0.0, 1.0);
            for k in 0..3 {
                p.c[k][y * w + x] = c0[k] + t * (c1[k] - c0[k]);
            }
        }
    }

    let cell = [4usize, 6, 8, 12, 16][rng.random_range(0..5)];
    let contrast = rng.random_range(0.08..0.25);
    let (mx0, my0) = (rng.random_range(0..w / 2), rng.random_range(0..h / 2));
    let (mx1, my1) = (mx0 + rng.random_range(w / 4..w / 2), my0 + rng.random_range(h / 4..h / 2));
    for y in my0..my1.min(h) {
        for x in mx0..mx1.min(w) {
            let sign = if (x / cell + y / cell) % 2 == 0 { 1.0 } else { -1.0 };
            for k in 0..3 {
                p.c[k][y * w + x] += sign * contrast;
            }
        }
    }

    let sigma = rng.random_range(1.0..3.0);
    let amplitude = rng.random_range(0.15..0.4);
    let raw: Vec<f64> = (0..w * h).map(|_| rng.random_range(-1.0..1.0)).collect();
    let texture = blur_plane(&raw, w, h, sigma);
    let tint: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.6..1.0));
    for (i, t) in texture.iter().enumerate() {
        for k in 0..3 {
            p.c[k][i] += amplitude * tint[k] * t * 3.0;
        }
    }

    for _ in 0..rng.random_range(2..5) {
        let color: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..1.0));
        let (cx, cy) = (rng.random_range(0.0..w as f64), rng.random_range(0.0..h as f64));
        let radius = rng.random_range(6.0..20.0);
        let disc = rng.random_bool(0.5);
        for y in 0..h {
            for x in 0..w {
                let (ox, oy) = (x as f64 - cx, y as f64 - cy);
                let inside = if disc { ox.hypot(oy) < radius } else { ox.abs() < radius && oy.abs() < radius * 0.6 };
                if inside {
                    for k in 0..3 {
                        p.c[k][y * w + x] = 0.5 * p.c[k][y * w + x] + 0.5 * color[k];
                    }
                }
            }
        }
    }
    p.to_image()
}

/// Orthonormal 8-point DCT-II basis, `basis[u][x]`.
fn dct_basis() -> [[f64; 8]; 8] {
    std::array::from_fn(|u| {
        let scale = if u == 0 { (1.0f64 / 8.0).sqrt() } else { (2.0f64 / 8.0).sqrt() };
        std::array::from_fn(|x| scale * (std::f64::consts::PI * (2 * x + 1) as f64 * u as f64 / 16.0).cos())
    })
}

/// Quantize every 8×8 block's DCT coefficients with step `base · (1 + (u + v) / 2)`.
fn block_quantize(plane: &mut [f64], w: usize, h: usize, base: f64) {
    let basis = dct_basis();
    for by in (0..h).step_by(8) {
        for bx in (0..w).step_by(8) {
            let (bw, bh) = ((w - bx).min(8), (h - by).min(8));
            if bw < 8 || bh < 8 {
                continue;
            }
            let mut block = [[0.0; 8]; 8];
            for (y, row) in block.iter_mut().enumerate() {
                for (x, v) in row.iter_mut().enumerate() {
                    *v = plane[(by + y) * w + bx + x] * 255.0;
                }
            }
            let mut coef = [[0.0; 8]; 8];
            for u in 0..8 {
                for v in 0..8 {
                    let mut s = 0.0;
                    for y in 0..8 {
                        for x in 0..8 {
                            s += basis[u][y] * basis[v][x] * block[y][x];
                        }
                    }
                    let step = base * (1.0 + (u + v) as f64 / 2.0);
                    coef[u][v] = (s / step).round() * step;
                }
            }
            for y in 0..8 {
                for x in 0..8 {
                    let mut s = 0.0;
                    for u in 0..8 {
                        for v in 0..8 {
                            s += basis[u][y] * basis[v][x] * coef[u][v];
                        }
                    }
                    plane[(by + y) * w + bx + x] = s / 255.0;
                }
            }
        }
    }
}

pub fn apply_distortion(img: &RgbImage, spec: DistortionSpec, rng: &mut Xoshiro256PlusPlus) -> RgbImage {
    let mut p = Planes::from_image(img);
    let (w, h) = (p.w, p.h);
    let param = spec.kind.parameter(spec.level).expect("validated level");
    match spec.kind {
        DistortionKind::GaussianBlur => {
            for k in 0..3 {
                p.c[k] = blur_plane(&p.c[k], w, h, param);
            }
        }
        DistortionKind::WhiteNoise => {
            let normal = Normal::new(0.0, param).expect("positive sigma");
            for i in 0..w * h {
                for k in 0..3 {
                    p.c[k][i] += normal.sample(rng);
                }
            }
        }
        DistortionKind::JpegLikeBlockQuantization => {
            for k in 0..3 {
                block_quantize(&mut p.c[k], w, h, param);
            }
        }
        DistortionKind::MeanShift => {
            for k in 0..3 {
                p.c[k].iter_mut().for_each(|v| *v += param);
            }
        }
    }
    p.to_image()
}

fn save_png(img: &RgbImage, path: &Path) -> Result<(), SyntheticError> {
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|source| SyntheticError::Image { path: path.to_path_buf(), source })
}

/// Write `n_references` references and all their distortions as PNG files
/// under `out_dir` (`ref/`, `dist/`) together with `manifest.csv`.
pub fn generate_dataset(
    out_dir: impl AsRef<Path>,
    n_references: usize,
    seed: u64,
) -> Result<DatasetManifest, SyntheticError> {
    if n_references < MIN_REFERENCES {
        return Err(SyntheticError::TooFewReferences(n_references));
    }
    let out_dir = out_dir.as_ref();
    for sub in ["ref", "dist"] {
        let d = out_dir.join(sub);
        std::fs::create_dir_all(&d).map_err(|source| SyntheticError::Io { path: d, source })?;
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n_references * DistortionKind::ALL.len() * LEVELS as usize);
    for r in 0..n_references {
        let reference_id = format!("ref_{r:03}");
        let reference = generate_reference(&mut rng);
        let reference_path = format!("ref/{reference_id}.png");
        save_png(&reference, &out_dir.join(&reference_path))?;
        for kind in DistortionKind::ALL {
            for level in 1..=LEVELS {
                let spec = DistortionSpec::new(kind, level)?;
                let pair_id = format!("{reference_id}_{kind}_{level}");
                let distorted_path = format!("dist/{pair_id}.png");
                save_png(&apply_distortion(&reference, spec, &mut rng), &out_dir.join(&distorted_path))?;
                rows.push(ManifestRow {
                    pair_id,
                    reference_id: reference_id.clone(),
                    reference_path: reference_path.clone(),
                    distorted_path,
                    mos: spec.pseudo_mos(),
                    distortion_type: Some(kind.name().to_string()),
                    distortion_level: Some(level),
                });
            }
        }
    }
    let manifest = DatasetManifest::new(out_dir, rows)?;
    write_manifest(out_dir.join("manifest.csv"), &manifest)?;
    Ok(manifest)
}
