//! On-disk network archives and the executor that taps activations.
//!
//! An archive is a directory holding `network.json` plus one raw
//! little-endian `f32` blob per conv weight/bias tensor (no header, OIHW
//! order). The descriptor lists conv / relu / maxpool / lrn layers; every
//! conv layer is a slice point and contributes one tapped activation tensor.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{self, ConvSpec, LrnSpec, PoolSpec, Tensor, TensorError};

pub const DESCRIPTOR_FILE: &str = "network.json";

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("malformed descriptor: {0}")]
    MalformedDescriptor(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("channel chain broken at layer {layer}: expected {expected} input channels, found {found}")]
    ChannelChainBroken { layer: usize, expected: usize, found: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Per-channel normalization applied after scaling pixels to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputNormalization {
    pub means: [f32; 3],
    pub stds: [f32; 3],
}

impl Default for InputNormalization {
    fn default() -> Self {
        Self { means: [0.0; 3], stds: [1.0; 3] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub spec: ConvSpec,
    pub weights_file: String,
    pub bias_file: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv(ConvLayer),
    Relu,
    MaxPool(PoolSpec),
    Lrn(LrnSpec),
}

/// Where each slice point taps the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TapPoint {
    /// Output of the ReLU directly following a conv (the conv output if no ReLU follows).
    #[default]
    PostRelu,
    PreRelu,
}

impl std::str::FromStr for TapPoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "post_relu" => Ok(TapPoint::PostRelu),
            "pre_relu" => Ok(TapPoint::PreRelu),
            other => Err(format!("unknown tap point '{other}' (expected post_relu or pre_relu)")),
        }
    }
}

/// A validated, fully resident network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDescriptor {
    name: String,
    normalization: InputNormalization,
    layers: Vec<Layer>,
    metadata: Option<serde_json::Value>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DescriptorFile {
    name: String,
    #[serde(default)]
    input_normalization: InputNormalization,
    layers: Vec<LayerRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metadata: Option<serde_json::Value>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum LayerRecord {
    Conv {
        #[serde(rename = "in")]
        in_channels: usize,
        #[serde(rename = "out")]
        out_channels: usize,
        kh: usize,
        kw: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        pad: usize,
        #[serde(default = "one")]
        groups: usize,
        weights_file: String,
        bias_file: String,
    },
    Relu {},
    Maxpool {
        window: usize,
        stride: usize,
    },
    Lrn {
        n: usize,
        alpha: f32,
        beta: f32,
        k: f32,
    },
}

fn one() -> usize {
    1
}

impl NetworkDescriptor {
    pub fn new(
        name: impl Into<String>,
        normalization: InputNormalization,
        layers: Vec<Layer>,
    ) -> Result<Self, ArchiveError> {
        let net = Self { name: name.into(), normalization, layers, metadata: None };
        net.validate()?;
        Ok(net)
    }

    pub fn with_metadata(mut self, metadata: serde_json::Value) -> Self {
        self.metadata = Some(metadata);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn normalization(&self) -> &InputNormalization {
        &self.normalization
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn metadata(&self) -> Option<&serde_json::Value> {
        self.metadata.as_ref()
    }

    /// Number of slice points (conv layers), `L`.
    pub fn conv_layer_count(&self) -> usize {
        self.conv_layers().count()
    }

    pub fn conv_layers(&self) -> impl Iterator<Item = &ConvLayer> {
        self.layers.iter().filter_map(|l| match l {
            Layer::Conv(c) => Some(c),
            _ => None,
        })
    }

    /// Output depth of every conv layer, in network order.
    pub fn tap_depths(&self) -> Vec<usize> {
        self.conv_layers().map(|c| c.spec.out_channels).collect()
    }

    /// Length of the feature vector produced per image pair.
    pub fn feature_length(&self) -> usize {
        self.tap_depths().iter().sum()
    }

    fn validate(&self) -> Result<(), ArchiveError> {
        let mut depth = 3;
        let mut convs = 0;
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Conv(c) => {
                    if c.spec.in_channels != depth {
                        return Err(ArchiveError::ChannelChainBroken {
                            layer: i,
                            expected: depth,
                            found: c.spec.in_channels,
                        });
                    }
                    c.spec.validate()?;
                    depth = c.spec.out_channels;
                    convs += 1;
                }
                Layer::Relu => {}
                Layer::MaxPool(p) => p.validate()?,
                Layer::Lrn(l) => l.validate()?,
            }
        }
        if convs == 0 {
            return Err(ArchiveError::MalformedDescriptor("network has no conv layers".into()));
        }
        let n = &self.normalization;
        if n.stds.iter().any(|&s| !(s > 0.0) || !s.is_finite()) || n.means.iter().any(|m| !m.is_finite()) {
            return Err(ArchiveError::MalformedDescriptor("normalization stds must be positive and finite".into()));
        }
        Ok(())
    }
}

fn read_blob(dir: &Path, file: &str, expected: usize) -> Result<Vec<f32>, ArchiveError> {
    let path = dir.join(file);
    if !path.is_file() {
        return Err(ArchiveError::MissingFile(path));
    }
    let bytes = fs::read(&path).map_err(|source| ArchiveError::Io { path: path.clone(), source })?;
    if bytes.len() != 4 * expected {
        return Err(ArchiveError::ShapeMismatch(format!(
            "{} holds {} bytes, expected {} ({} floats)",
            path.display(),
            bytes.len(),
            4 * expected,
            expected
        )));
    }
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

fn write_blob(dir: &Path, file: &str, values: &[f32]) -> Result<(), ArchiveError> {
    let path = dir.join(file);
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(&path, bytes).map_err(|source| ArchiveError::Io { path, source })
}

/// Load and validate an archive directory.
pub fn load_archive(dir: impl AsRef<Path>) -> Result<NetworkDescriptor, ArchiveError> {
    let dir = dir.as_ref();
    let json_path = dir.join(DESCRIPTOR_FILE);
    if !json_path.is_file() {
        return Err(ArchiveError::MissingFile(json_path));
    }
    let text = fs::read_to_string(&json_path).map_err(|source| ArchiveError::Io { path: json_path.clone(), source })?;
    let file: DescriptorFile =
        serde_json::from_str(&text).map_err(|e| ArchiveError::MalformedDescriptor(e.to_string()))?;

    let mut layers = Vec::with_capacity(file.layers.len());
    let mut depth = 3;
    for (i, record) in file.layers.into_iter().enumerate() {
        let layer = match record {
            LayerRecord::Conv { in_channels, out_channels, kh, kw, stride, pad, groups, weights_file, bias_file } => {
                // Chain is checked before touching blobs so the error names the real cause.
                if in_channels != depth {
                    return Err(ArchiveError::ChannelChainBroken { layer: i, expected: depth, found: in_channels });
                }
                if groups == 0 || in_channels % groups != 0 {
                    return Err(ArchiveError::MalformedDescriptor(format!(
                        "layer {i}: groups={groups} does not divide in={in_channels}"
                    )));
                }
                depth = out_channels;
                let n_weights = ConvSpec::expected_weight_len(in_channels, out_channels, kh, kw, groups);
                let weights = read_blob(dir, &weights_file, n_weights)?;
                let bias = read_blob(dir, &bias_file, out_channels)?;
                Layer::Conv(ConvLayer {
                    spec: ConvSpec {
                        in_channels,
                        out_channels,
                        kernel_h: kh,
                        kernel_w: kw,
                        stride,
                        padding: pad,
                        groups,
                        weights,
                        bias,
                    },
                    weights_file,
                    bias_file,
                })
            }
            LayerRecord::Relu {} => Layer::Relu,
            LayerRecord::Maxpool { window, stride } => Layer::MaxPool(PoolSpec { window, stride }),
            LayerRecord::Lrn { n, alpha, beta, k } => Layer::Lrn(LrnSpec { size: n, alpha, beta, k }),
        };
        layers.push(layer);
    }
    let net = NetworkDescriptor::new(file.name, file.input_normalization, layers)?;
    Ok(match file.metadata {
        Some(m) => net.with_metadata(m),
        None => net,
    })
}

/// Write `net` as an archive directory (created if absent).
pub fn save_archive(net: &NetworkDescriptor, dir: impl AsRef<Path>) -> Result<(), ArchiveError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| ArchiveError::Io { path: dir.to_path_buf(), source })?;
    let mut records = Vec::with_capacity(net.layers.len());
    for layer in &net.layers {
        records.push(match layer {
            Layer::Conv(c) => {
                write_blob(dir, &c.weights_file, &c.spec.weights)?;
                write_blob(dir, &c.bias_file, &c.spec.bias)?;
                LayerRecord::Conv {
                    in_channels: c.spec.in_channels,
                    out_channels: c.spec.out_channels,
                    kh: c.spec.kernel_h,
                    kw: c.spec.kernel_w,
                    stride: c.spec.stride,
                    pad: c.spec.padding,
                    groups: c.spec.groups,
                    weights_file: c.weights_file.clone(),
                    bias_file: c.bias_file.clone(),
                }
            }
            Layer::Relu => LayerRecord::Relu {},
            Layer::MaxPool(p) => LayerRecord::Maxpool { window: p.window, stride: p.stride },
            Layer::Lrn(l) => LayerRecord::Lrn { n: l.size, alpha: l.alpha, beta: l.beta, k: l.k },
        });
    }
    let file = DescriptorFile {
        name: net.name.clone(),
        input_normalization: net.normalization.clone(),
        layers: records,
        metadata: net.metadata.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file).map_err(|e| ArchiveError::MalformedDescriptor(e.to_string()))?;
    text.push('\n');
    let path = dir.join(DESCRIPTOR_FILE);
    fs::write(&path, text).map_err(|source| ArchiveError::Io { path, source })
}

/// Apply the archive's input normalization to an RGB tensor with values in `[0, 1]`.
pub fn normalize_input(net: &NetworkDescriptor, image: &Tensor) -> Result<Tensor, TensorError> {
    if image.depth() != 3 {
        return Err(TensorError::ShapeMismatch(format!("expected an RGB image, got depth {}", image.depth())));
    }
    let mut out = image.clone();
    for c in 0..3 {
        let (m, s) = (net.normalization.means[c], net.normalization.stds[c]);
        for v in out.channel_mut(c) {
            *v = (*v - m) / s;
        }
    }
    Ok(out)
}

/// Run `image` (RGB, `[0, 1]`) through the network and return one tapped
/// tensor per conv layer, in network order. Layers after the last tap are
/// not executed.
pub fn run_network(net: &NetworkDescriptor, image: &Tensor, tap: TapPoint) -> Result<Vec<Tensor>, TensorError> {
    let mut x = normalize_input(net, image)?;
    let total = net.conv_layer_count();
    let mut taps = Vec::with_capacity(total);
    let mut pending = false;
    for layer in &net.layers {
        if taps.len() == total {
            break;
        }
        match layer {
            Layer::Conv(c) => {
                if pending {
                    taps.push(x.clone());
                }
                x = tensor::conv2d(&x, &c.spec)?;
                pending = true;
                if tap == TapPoint::PreRelu {
                    taps.push(x.clone());
                    pending = false;
                }
            }
            Layer::Relu => {
                tensor::relu_in_place(&mut x);
                if pending {
                    taps.push(x.clone());
                    pending = false;
                }
            }
            Layer::MaxPool(p) => {
                if pending {
                    taps.push(x.clone());
                    pending = false;
                }
                x = tensor::maxpool(&x, p)?;
            }
            Layer::Lrn(l) => {
                if pending {
                    taps.push(x.clone());
                    pending = false;
                }
                x = tensor::lrn(&x, l)?;
            }
        }
    }
    if pending {
        taps.push(x);
    }
    Ok(taps)
}
