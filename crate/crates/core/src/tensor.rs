//! Dense activation volumes and the forward operators needed to run
//! AlexNet-family convolutional stacks on images of any resolution.
//!
//! Data is stored channel-major: element `(c, y, x)` lives at
//! `c * height * width + y * width + x`. All arithmetic is `f32`.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("degenerate output: {0}")]
    DegenerateOutput(String),
    #[error("invalid layer parameters: {0}")]
    InvalidSpec(String),
}

/// A `width × height × depth` activation volume.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    width: usize,
    height: usize,
    depth: usize,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(width: usize, height: usize, depth: usize, data: Vec<f32>) -> Result<Self, TensorError> {
        if width == 0 || height == 0 || depth == 0 {
            return Err(TensorError::ShapeMismatch(format!(
                "dimensions must be positive, got {width}x{height}x{depth}"
            )));
        }
        if data.len() != width * height * depth {
            return Err(TensorError::ShapeMismatch(format!(
                "{width}x{height}x{depth} tensor needs {} values, got {}",
                width * height * depth,
                data.len()
            )));
        }
        Ok(Self { width, height, depth, data })
    }

    pub fn zeros(width: usize, height: usize, depth: usize) -> Self {
        assert!(width > 0 && height > 0 && depth > 0, "tensor dimensions must be positive");
        Self { width, height, depth, data: vec![0.0; width * height * depth] }
    }

    pub fn filled(width: usize, height: usize, depth: usize, value: f32) -> Self {
        let mut t = Self::zeros(width, height, depth);
        t.data.fill(value);
        t
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    fn plane_len(&self) -> usize {
        self.width * self.height
    }

    /// Row-major slice holding channel `c`.
    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.width == other.width && self.height == other.height && self.depth == other.depth
    }
}

/// Convolution parameters. Weights are laid out
/// `out × (in / groups) × kernel_h × kernel_w`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl ConvSpec {
    pub fn expected_weight_len(in_channels: usize, out_channels: usize, kh: usize, kw: usize, groups: usize) -> usize {
        out_channels * (in_channels / groups.max(1)) * kh * kw
    }

    pub fn validate(&self) -> Result<(), TensorError> {
        if self.in_channels == 0 || self.out_channels == 0 || self.kernel_h == 0 || self.kernel_w == 0 {
            return Err(TensorError::InvalidSpec("conv dimensions must be positive".into()));
        }
        if self.stride == 0 {
            return Err(TensorError::InvalidSpec("conv stride must be >= 1".into()));
        }
        if self.groups == 0 || self.in_channels % self.groups != 0 || self.out_channels % self.groups != 0 {
            return Err(TensorError::InvalidSpec(format!(
                "groups={} must divide in_channels={} and out_channels={}",
                self.groups, self.in_channels, self.out_channels
            )));
        }
        let expected =
            Self::expected_weight_len(self.in_channels, self.out_channels, self.kernel_h, self.kernel_w, self.groups);
        if self.weights.len() != expected {
            return Err(TensorError::ShapeMismatch(format!(
                "conv weights need {expected} values, got {}",
                self.weights.len()
            )));
        }
        if self.bias.len() != self.out_channels {
            return Err(TensorError::ShapeMismatch(format!(
                "conv bias needs {} values, got {}",
                self.out_channels,
                self.bias.len()
            )));
        }
        Ok(())
    }

    /// Output `(width, height)` for an input of the given size.
    pub fn output_size(&self, width: usize, height: usize) -> Result<(usize, usize), TensorError> {
        let w = window_output(width, self.kernel_w, self.stride, self.padding);
        let h = window_output(height, self.kernel_h, self.stride, self.padding);
        match (w, h) {
            (Some(w), Some(h)) => Ok((w, h)),
            _ => Err(TensorError::DegenerateOutput(format!(
                "{}x{} kernel (stride {}, pad {}) does not fit a {width}x{height} input",
                self.kernel_w, self.kernel_h, self.stride, self.padding
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolSpec {
    pub window: usize,
    pub stride: usize,
}

impl PoolSpec {
    pub fn validate(&self) -> Result<(), TensorError> {
        if self.window == 0 || self.stride == 0 {
            return Err(TensorError::InvalidSpec("pool window and stride must be >= 1".into()));
        }
        Ok(())
    }

    pub fn output_size(&self, width: usize, height: usize) -> Result<(usize, usize), TensorError> {
        match (window_output(width, self.window, self.stride, 0), window_output(height, self.window, self.stride, 0)) {
            (Some(w), Some(h)) => Ok((w, h)),
            _ => Err(TensorError::DegenerateOutput(format!(
                "pool window {} does not fit a {width}x{height} input",
                self.window
            ))),
        }
    }
}

/// Cross-channel local response normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrnSpec {
    pub size: usize,
    pub alpha: f32,
    pub beta: f32,
    pub k: f32,
}

impl LrnSpec {
    // alpha = 0 and k = 0 are accepted: both appear in meaningful limit cases.
    pub fn validate(&self) -> Result<(), TensorError> {
        if self.size == 0 || self.size % 2 == 0 {
            return Err(TensorError::InvalidSpec(format!("lrn size must be odd, got {}", self.size)));
        }
        if !(self.alpha >= 0.0 && self.beta > 0.0 && self.k >= 0.0) {
            return Err(TensorError::InvalidSpec(format!(
                "lrn needs alpha >= 0, beta > 0, k >= 0 (got {}, {}, {})",
                self.alpha, self.beta, self.k
            )));
        }
        Ok(())
    }
}

fn window_output(len: usize, window: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = len + 2 * pad;
    if padded < window {
        return None;
    }
    Some((padded - window) / stride + 1)
}

pub fn conv2d(input: &Tensor, spec: &ConvSpec) -> Result<Tensor, TensorError> {
    spec.validate()?;
    if input.depth != spec.in_channels {
        return Err(TensorError::ShapeMismatch(format!(
            "conv expects {} input channels, got {}",
            spec.in_channels, input.depth
        )));
    }
    let (out_w, out_h) = spec.output_size(input.width, input.height)?;
    let in_per_group = spec.in_channels / spec.groups;
    let out_per_group = spec.out_channels / spec.groups;
    let (kh, kw) = (spec.kernel_h, spec.kernel_w);
    let pad = spec.padding as isize;
    let stride = spec.stride;
    let (in_w, in_h) = (input.width as isize, input.height as isize);

    let mut out = Tensor::zeros(out_w, out_h, spec.out_channels);
    let plane = out_w * out_h;
    for oc in 0..spec.out_channels {
        let group = oc / out_per_group;
        let acc = &mut out.data[oc * plane..(oc + 1) * plane];
        acc.fill(spec.bias[oc]);
        for icg in 0..in_per_group {
            let ic = group * in_per_group + icg;
            let src = input.channel(ic);
            let wbase = (oc * in_per_group + icg) * kh * kw;
            for ky in 0..kh {
                for kx in 0..kw {
                    let w = spec.weights[wbase + ky * kw + kx];
                    for oy in 0..out_h {
                        let iy = (oy * stride) as isize + ky as isize - pad;
                        if iy < 0 || iy >= in_h {
                            continue;
                        }
                        let row = &src[iy as usize * input.width..(iy as usize + 1) * input.width];
                        let dst = &mut acc[oy * out_w..(oy + 1) * out_w];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let ix = (ox * stride) as isize + kx as isize - pad;
                            if ix >= 0 && ix < in_w {
                                *d += w * row[ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn relu(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    relu_in_place(&mut out);
    out
}

pub fn relu_in_place(t: &mut Tensor) {
    for v in t.data.iter_mut() {
        *v = v.max(0.0);
    }
}

pub fn maxpool(input: &Tensor, spec: &PoolSpec) -> Result<Tensor, TensorError> {
    spec.validate()?;
    let (out_w, out_h) = spec.output_size(input.width, input.height)?;
    let mut out = Tensor::zeros(out_w, out_h, input.depth);
    for c in 0..input.depth {
        let src = input.channel(c);
        for oy in 0..out_h {
            for ox in 0..out_w {
                let mut m = f32::NEG_INFINITY;
                for y in oy * spec.stride..oy * spec.stride + spec.window {
                    for x in ox * spec.stride..ox * spec.stride + spec.window {
                        m = m.max(src[y * input.width + x]);
                    }
                }
                out.set(c, oy, ox, m);
            }
        }
    }
    Ok(out)
}

pub fn lrn(input: &Tensor, spec: &LrnSpec) -> Result<Tensor, TensorError> {
    spec.validate()?;
    let half = spec.size / 2;
    let scale = spec.alpha / spec.size as f32;
    let plane = input.plane_len();
    let mut out = Tensor::zeros(input.width, input.height, input.depth);
    for c in 0..input.depth {
        let lo = c.saturating_sub(half);
        let hi = (c + half).min(input.depth - 1);
        for p in 0..plane {
            let mut sq = 0.0f32;
            for n in lo..=hi {
                let v = input.data[n * plane + p];
                sq += v * v;
            }
            let x = input.data[c * plane + p];
            let denom = (spec.k + scale * sq).powf(spec.beta);
            out.data[c * plane + p] = if denom == 0.0 { 0.0 } else { x / denom };
        }
    }
    Ok(out)
}
