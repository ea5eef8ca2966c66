//! Per-pair feature vectors built from activation-map similarities.
//!
//! For every tapped conv layer, channel `i` of the reference activations is
//! compared with channel `i` of the distorted activations; the per-layer
//! vectors are concatenated in network order. The resulting length is the
//! sum of conv output depths and does not depend on the input resolution.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use thiserror::Error;

use crate::archive::{run_network, NetworkDescriptor, TapPoint};
use crate::metrics::{MapView, MetricError, SimilarityMetric};
use crate::tensor::{Tensor, TensorError};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("reference is {ref_w}x{ref_h} but distorted image is {dist_w}x{dist_h}")]
    ResolutionMismatch { ref_w: usize, ref_h: usize, dist_w: usize, dist_h: usize },
    #[error("non-finite feature at index {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("malformed feature file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    layer_offsets: Vec<usize>,
    metric: SimilarityMetric,
}

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Index of each layer's first element; starts at 0 and strictly increases.
    pub fn layer_offsets(&self) -> &[usize] {
        &self.layer_offsets
    }

    pub fn metric(&self) -> SimilarityMetric {
        self.metric
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Compare the channels of two activation tensors of identical shape.
pub fn layer_features(ref_act: &Tensor, dist_act: &Tensor, metric: SimilarityMetric) -> Result<Vec<f64>, FeatureError> {
    if !ref_act.same_shape(dist_act) {
        return Err(FeatureError::ShapeMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            ref_act.width(),
            ref_act.height(),
            ref_act.depth(),
            dist_act.width(),
            dist_act.height(),
            dist_act.depth()
        )));
    }
    let (w, h) = (ref_act.width(), ref_act.height());
    (0..ref_act.depth())
        .map(|c| {
            let a = MapView::new(ref_act.channel(c), w, h)?;
            let b = MapView::new(dist_act.channel(c), w, h)?;
            Ok(metric.compare(a, b)?)
        })
        .collect()
}

/// Build the full feature vector of a reference/distorted pair.
pub fn extract_pair(
    net: &NetworkDescriptor,
    ref_img: &Tensor,
    dist_img: &Tensor,
    metric: SimilarityMetric,
    tap: TapPoint,
) -> Result<FeatureVector, FeatureError> {
    if ref_img.width() != dist_img.width() || ref_img.height() != dist_img.height() {
        return Err(FeatureError::ResolutionMismatch {
            ref_w: ref_img.width(),
            ref_h: ref_img.height(),
            dist_w: dist_img.width(),
            dist_h: dist_img.height(),
        });
    }
    let ref_taps = run_network(net, ref_img, tap)?;
    let dist_taps = run_network(net, dist_img, tap)?;
    let mut values = Vec::with_capacity(net.feature_length());
    let mut layer_offsets = Vec::with_capacity(ref_taps.len());
    for (r, d) in ref_taps.iter().zip(&dist_taps) {
        layer_offsets.push(values.len());
        values.extend(layer_features(r, d, metric)?);
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(FeatureError::NonFinite(i));
    }
    Ok(FeatureVector { values, layer_offsets, metric })
}

/// One row of the feature cache.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub pair_id: String,
    pub reference_id: String,
    pub mos: f64,
    pub distortion_type: Option<String>,
    pub distortion_level: Option<u32>,
    pub features: Vec<f64>,
}

const FIXED_COLUMNS: [&str; 5] = ["pair_id", "reference_id", "mos", "distortion_type", "distortion_level"];

/// Nine significant digits, scientific notation.
pub fn format_feature(v: f64) -> String {
    format!("{v:.8e}")
}

/// Incremental writer for the feature cache.
pub struct FeatureCsvWriter {
    inner: csv::Writer<BufWriter<File>>,
    n_features: usize,
}

impl FeatureCsvWriter {
    /// Create (or truncate) `path` and write the header.
    pub fn create(path: impl AsRef<Path>, n_features: usize) -> Result<Self, FeatureError> {
        let mut inner = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        let header: Vec<String> =
            FIXED_COLUMNS.iter().map(|s| s.to_string()).chain((0..n_features).map(|i| format!("f_{i}"))).collect();
        inner.write_record(&header)?;
        Ok(Self { inner, n_features })
    }

    /// Append rows to an existing cache whose header is already written.
    pub fn append(path: impl AsRef<Path>, n_features: usize) -> Result<Self, FeatureError> {
        let file = std::fs::OpenOptions::new().append(true).open(path)?;
        Ok(Self { inner: csv::Writer::from_writer(BufWriter::new(file)), n_features })
    }

    pub fn write_row(&mut self, r: &FeatureRow) -> Result<(), FeatureError> {
        if r.features.len() != self.n_features {
            return Err(FeatureError::Malformed(format!(
                "pair {} has {} features, expected {}",
                r.pair_id,
                r.features.len(),
                self.n_features
            )));
        }
        let mut rec = vec![
            r.pair_id.clone(),
            r.reference_id.clone(),
            r.mos.to_string(),
            r.distortion_type.clone().unwrap_or_default(),
            r.distortion_level.map(|l| l.to_string()).unwrap_or_default(),
        ];
        rec.extend(r.features.iter().map(|&v| format_feature(v)));
        self.inner.write_record(&rec)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), FeatureError> {
        self.inner.flush()?;
        Ok(())
    }
}

pub fn write_feature_csv(path: impl AsRef<Path>, rows: &[FeatureRow]) -> Result<(), FeatureError> {
    let n = rows.first().map_or(0, |r| r.features.len());
    let mut w = FeatureCsvWriter::create(path, n)?;
    for r in rows {
        w.write_row(r)?;
    }
    w.flush()
}

pub fn read_feature_csv(path: impl AsRef<Path>) -> Result<Vec<FeatureRow>, FeatureError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let header = rdr.headers()?.clone();
    if header.len() < FIXED_COLUMNS.len() || header.iter().zip(FIXED_COLUMNS).any(|(h, e)| h != e) {
        return Err(FeatureError::Malformed(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    for (i, name) in header.iter().skip(FIXED_COLUMNS.len()).enumerate() {
        if name != format!("f_{i}") {
            return Err(FeatureError::Malformed(format!("feature column {i} is named '{name}'")));
        }
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| FeatureError::Malformed(format!("row {}: bad {what}", line + 1));
        let mos: f64 = rec[2].parse().map_err(|_| bad("mos"))?;
        let distortion_type = Some(rec[3].to_string()).filter(|s| !s.is_empty());
        let distortion_level =
            if rec[4].is_empty() { None } else { Some(rec[4].parse().map_err(|_| bad("distortion_level"))?) };
        let features = rec
            .iter()
            .skip(FIXED_COLUMNS.len())
            .map(|s| s.parse::<f64>().map_err(|_| bad("feature value")))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(FeatureRow {
            pair_id: rec[0].to_string(),
            reference_id: rec[1].to_string(),
            mos,
            distortion_type,
            distortion_level,
            features,
        });
    }
    Ok(rows)
}
