//! Dataset manifests, image decoding and MOS normalization.
//!
//! A manifest is a CSV file with the header
//! `pair_id,reference_id,reference_path,distorted_path,mos,distortion_type,distortion_level`.
//! Image paths are relative to the directory holding the manifest.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter};
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageFormat, ImageReader};
use thiserror::Error;

use crate::tensor::Tensor;

pub const MANIFEST_COLUMNS: [&str; 7] =
    ["pair_id", "reference_id", "reference_path", "distorted_path", "mos", "distortion_type", "distortion_level"];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("manifest is missing column '{0}'")]
    MissingColumn(String),
    #[error("row {row} (pair {pair_id}): image file not found: {path}")]
    MissingImageFile { row: usize, pair_id: String, path: PathBuf },
    #[error("duplicate pair_id '{0}'")]
    DuplicatePairId(String),
    #[error("reference '{reference_id}' maps to both {first} and {second}")]
    InconsistentReference { reference_id: String, first: String, second: String },
    #[error("row {row}: invalid {column} '{value}'")]
    InvalidValue { row: usize, column: &'static str, value: String },
    #[error("{path}: unsupported image format ({detail})")]
    UnsupportedFormat { path: PathBuf, detail: String },
    #[error("{path}: corrupt image ({detail})")]
    CorruptFile { path: PathBuf, detail: String },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub pair_id: String,
    pub reference_id: String,
    /// As written in the manifest, relative to its directory.
    pub reference_path: String,
    pub distorted_path: String,
    pub mos: f64,
    pub distortion_type: Option<String>,
    pub distortion_level: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    base_dir: PathBuf,
    rows: Vec<ManifestRow>,
}

impl DatasetManifest {
    /// Validate rows in memory. Image files are not checked.
    pub fn new(base_dir: impl Into<PathBuf>, rows: Vec<ManifestRow>) -> Result<Self, DatasetError> {
        let mut ids = HashSet::new();
        let mut refs: HashMap<&str, &str> = HashMap::new();
        for (i, r) in rows.iter().enumerate() {
            if !ids.insert(r.pair_id.as_str()) {
                return Err(DatasetError::DuplicatePairId(r.pair_id.clone()));
            }
            if r.reference_id.is_empty() {
                return Err(DatasetError::InvalidValue { row: i + 1, column: "reference_id", value: String::new() });
            }
            if !r.mos.is_finite() {
                return Err(DatasetError::InvalidValue { row: i + 1, column: "mos", value: r.mos.to_string() });
            }
            let known = refs.entry(&r.reference_id).or_insert(&r.reference_path);
            if *known != r.reference_path {
                return Err(DatasetError::InconsistentReference {
                    reference_id: r.reference_id.clone(),
                    first: known.to_string(),
                    second: r.reference_path.clone(),
                });
            }
        }
        Ok(Self { base_dir: base_dir.into(), rows })
    }

    pub fn rows(&self) -> &[ManifestRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn resolve(&self, relative: &str) -> PathBuf {
        self.base_dir.join(relative)
    }

    /// Distinct reference ids in sorted order.
    pub fn reference_ids(&self) -> Vec<String> {
        self.by_reference().into_keys().map(str::to_string).collect()
    }

    /// Row indices grouped by reference id.
    pub fn by_reference(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.rows.iter().enumerate() {
            groups.entry(&r.reference_id).or_default().push(i);
        }
        groups
    }

    /// Fails on the first row whose reference or distorted image is missing.
    pub fn check_images(&self) -> Result<(), DatasetError> {
        for (i, r) in self.rows.iter().enumerate() {
            for p in [&r.reference_path, &r.distorted_path] {
                let path = self.resolve(p);
                if !path.is_file() {
                    return Err(DatasetError::MissingImageFile { row: i + 1, pair_id: r.pair_id.clone(), path });
                }
            }
        }
        Ok(())
    }
}

fn parse_rows(path: &Path) -> Result<Vec<ManifestRow>, DatasetError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(BufReader::new(file));
    let header = rdr.headers()?.clone();
    let mut col = [0usize; 7];
    for (slot, name) in col.iter_mut().zip(MANIFEST_COLUMNS) {
        *slot = header.iter().position(|h| h == name).ok_or_else(|| DatasetError::MissingColumn(name.to_string()))?;
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let field = |k: usize| rec.get(col[k]).unwrap_or("").to_string();
        let mos_text = field(4);
        let mos = mos_text.parse().map_err(|_| DatasetError::InvalidValue { row, column: "mos", value: mos_text })?;
        let level_text = field(6);
        let distortion_level = if level_text.is_empty() {
            None
        } else {
            Some(level_text.parse().map_err(|_| DatasetError::InvalidValue {
                row,
                column: "distortion_level",
                value: level_text,
            })?)
        };
        rows.push(ManifestRow {
            pair_id: field(0),
            reference_id: field(1),
            reference_path: field(2),
            distorted_path: field(3),
            mos,
            distortion_type: Some(field(5)).filter(|s| !s.is_empty()),
            distortion_level,
        });
    }
    Ok(rows)
}

/// Parse and validate a manifest, including the existence of every image.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest, DatasetError> {
    let path = path.as_ref();
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let manifest = DatasetManifest::new(base, parse_rows(path)?)?;
    manifest.check_images()?;
    Ok(manifest)
}

/// Write rows with their paths as stored.
pub fn write_manifest(path: impl AsRef<Path>, manifest: &DatasetManifest) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(MANIFEST_COLUMNS)?;
    for r in &manifest.rows {
        w.write_record([
            r.pair_id.as_str(),
            &r.reference_id,
            &r.reference_path,
            &r.distorted_path,
            &r.mos.to_string(),
            r.distortion_type.as_deref().unwrap_or(""),
            &r.distortion_level.map(|l| l.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Decode an 8-bit grayscale or RGB PNG/BMP file into a 3-channel tensor with values `x / 255`.
/// Grayscale is replicated across the three channels.
pub fn decode_image(path: impl AsRef<Path>) -> Result<Tensor, DatasetError> {
    let path = path.as_ref();
    let unsupported = |detail: String| DatasetError::UnsupportedFormat { path: path.to_path_buf(), detail };
    let corrupt = |detail: String| DatasetError::CorruptFile { path: path.to_path_buf(), detail };
    let reader = ImageReader::open(path).map_err(io_err(path))?.with_guessed_format().map_err(io_err(path))?;
    match reader.format() {
        Some(ImageFormat::Png | ImageFormat::Bmp) => {}
        Some(other) => return Err(unsupported(format!("{other:?}"))),
        None => return Err(unsupported("unrecognized file signature".into())),
    }
    let img = reader.decode().map_err(|e| match e {
        image::ImageError::Unsupported(u) => unsupported(u.to_string()),
        other => corrupt(other.to_string()),
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let plane = w * h;
    let mut data = vec![0f32; 3 * plane];
    match img {
        DynamicImage::ImageLuma8(buf) => {
            for (i, p) in buf.pixels().enumerate() {
                let v = p.0[0] as f32 / 255.0;
                data[i] = v;
                data[plane + i] = v;
                data[2 * plane + i] = v;
            }
        }
        DynamicImage::ImageRgb8(buf) => {
            for (i, p) in buf.pixels().enumerate() {
                for c in 0..3 {
                    data[c * plane + i] = p.0[c] as f32 / 255.0;
                }
            }
        }
        other => return Err(unsupported(format!("{:?} pixels; only 8-bit grayscale or RGB", other.color()))),
    }
    Tensor::new(w, h, 3, data).map_err(|e| corrupt(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MosNormalization {
    #[default]
    None,
    /// Linear map of the database's MOS range onto `[0, 1]`.
    MinMaxPerDb,
}

impl std::str::FromStr for MosNormalization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "minmax_per_db" => Ok(Self::MinMaxPerDb),
            other => Err(format!("unknown MOS normalization '{other}' (expected none or minmax_per_db)")),
        }
    }
}

pub fn normalize_mos(manifest: &DatasetManifest, mode: MosNormalization) -> Result<DatasetManifest, DatasetError> {
    let mut out = manifest.clone();
    if mode == MosNormalization::None {
        return Ok(out);
    }
    let scores: Vec<f64> = manifest.rows.iter().map(|r| r.mos).collect();
    let (lo, hi) = min_max(&scores)?;
    for r in &mut out.rows {
        r.mos = (r.mos - lo) / (hi - lo);
    }
    Ok(out)
}

/// Smallest and largest value; fails unless at least two distinct values exist.
pub fn min_max(values: &[f64]) -> Result<(f64, f64), DatasetError> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(DatasetError::DegenerateInput("min-max normalization needs two distinct MOS values".into()));
    }
    Ok((lo, hi))
}

/// Build a manifest from the KADID-10k score file (`dist_img,ref_img,dmos,var`),
/// whose distorted file names follow `I<ref>_<type>_<level>.png`. The score
/// column is stored as given. Image paths are made relative to `out_dir`, where
/// the manifest is expected to be written.
pub fn kadid10k_manifest(
    scores_csv: impl AsRef<Path>,
    image_dir: impl AsRef<Path>,
    out_dir: impl AsRef<Path>,
) -> Result<DatasetManifest, DatasetError> {
    let scores_csv = scores_csv.as_ref();
    let file = File::open(scores_csv).map_err(io_err(scores_csv))?;
    let rel_dir = relative_path(out_dir.as_ref(), image_dir.as_ref());
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(scores_csv))?;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if i == 0 || line.trim().is_empty() {
            if i == 0 && !fields.iter().any(|f| *f == "dist_img") {
                return Err(DatasetError::MissingColumn("dist_img".into()));
            }
            continue;
        }
        if fields.len() < 3 {
            return Err(DatasetError::InvalidValue { row: i, column: "dist_img", value: line.clone() });
        }
        let (dist, reference, score) = (fields[0], fields[1], fields[2]);
        let stem = dist.trim_end_matches(".png");
        let parts: Vec<&str> = stem.split('_').collect();
        let bad_name = || DatasetError::InvalidValue { row: i, column: "dist_img", value: dist.to_string() };
        if parts.len() != 3 {
            return Err(bad_name());
        }
        let level: u32 = parts[2].parse().map_err(|_| bad_name())?;
        let mos =
            score.parse().map_err(|_| DatasetError::InvalidValue { row: i, column: "mos", value: score.into() })?;
        rows.push(ManifestRow {
            pair_id: stem.to_string(),
            reference_id: reference.trim_end_matches(".png").to_string(),
            reference_path: join_rel(&rel_dir, reference),
            distorted_path: join_rel(&rel_dir, dist),
            mos,
            distortion_type: Some(format!("t{}", parts[1])),
            distortion_level: Some(level),
        });
    }
    DatasetManifest::new(out_dir.as_ref(), rows)
}

/// The KADID-10k file layout (81 references × 25 types × 5 levels) without
/// scores or images, for protocol checks when the database is absent.
pub fn kadid10k_layout() -> DatasetManifest {
    let mut rows = Vec::with_capacity(81 * 125);
    for r in 1..=81 {
        for t in 1..=25 {
            for l in 1..=5u32 {
                let stem = format!("I{r:02}_{t:02}_{l:02}");
                rows.push(ManifestRow {
                    distorted_path: format!("images/{stem}.png"),
                    pair_id: stem,
                    reference_id: format!("I{r:02}"),
                    reference_path: format!("images/I{r:02}.png"),
                    mos: 0.0,
                    distortion_type: Some(format!("t{t:02}")),
                    distortion_level: Some(l),
                });
            }
        }
    }
    DatasetManifest { base_dir: PathBuf::new(), rows }
}

fn join_rel(dir: &str, file: &str) -> String {
    if dir.is_empty() {
        file.to_string()
    } else {
        format!("{dir}/{file}")
    }
}

/// `target` expressed relative to `base` when both are absolute or both relative;
/// otherwise the absolute target.
fn relative_path(base: &Path, target: &Path) -> String {
    let abs = |p: &Path| std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
    let (base, target) = (abs(base), abs(target));
    let b: Vec<_> = base.components().collect();
    let t: Vec<_> = target.components().collect();
    let common = b.iter().zip(&t).take_while(|(x, y)| x == y).count();
    if common == 0 {
        return target.to_string_lossy().into_owned();
    }
    let mut parts: Vec<String> = vec!["..".to_string(); b.len() - common];
    parts.extend(t[common..].iter().map(|c| c.as_os_str().to_string_lossy().into_owned()));
    parts.join("/")
}
