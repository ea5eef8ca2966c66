//! Study drivers: feature extraction over a manifest, repeated
//! cross-validation, training-ratio sweeps, cross-database runs and the
//! metric × regressor grid.
//!
//! Work is spread over the current rayon pool. Results are collected in task
//! order, so outputs do not depend on the number of threads.

use std::collections::{BTreeSet, HashSet};
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::archive::{NetworkDescriptor, TapPoint};
use crate::dataset::{decode_image, min_max, DatasetError, DatasetManifest, ManifestRow, MosNormalization};
use crate::evaluation::{
    aggregate, evaluate, make_splits, ratio_splits, AggregateReport, EvalError, EvaluationReport, GroupLabel,
};
use crate::features::{extract_pair, read_feature_csv, FeatureCsvWriter, FeatureError, FeatureRow};
use crate::metrics::SimilarityMetric;
use crate::regression::{train, RegressionError, RegressorConfig, RegressorKind};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("pair {pair_id}: {source}")]
    Pair { pair_id: String, source: Box<ProtocolError> },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Regression(#[from] RegressionError),
    #[error(transparent)]
    Evaluation(#[from] EvalError),
    #[error("feature cache does not match: {0}")]
    CacheMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ProtocolError {
    /// The innermost error, looking through pair context.
    pub fn root(&self) -> &ProtocolError {
        match self {
            ProtocolError::Pair { source, .. } => source.root(),
            other => other,
        }
    }
}

/// Feature row of one manifest pair.
pub fn extract_row(
    net: &NetworkDescriptor,
    manifest: &DatasetManifest,
    row: &ManifestRow,
    metric: SimilarityMetric,
    tap: TapPoint,
) -> Result<FeatureRow, ProtocolError> {
    let with_context = |e: ProtocolError| ProtocolError::Pair { pair_id: row.pair_id.clone(), source: Box::new(e) };
    let reference = decode_image(manifest.resolve(&row.reference_path)).map_err(|e| with_context(e.into()))?;
    let distorted = decode_image(manifest.resolve(&row.distorted_path)).map_err(|e| with_context(e.into()))?;
    let fv = extract_pair(net, &reference, &distorted, metric, tap).map_err(|e| with_context(e.into()))?;
    Ok(FeatureRow {
        pair_id: row.pair_id.clone(),
        reference_id: row.reference_id.clone(),
        mos: row.mos,
        distortion_type: row.distortion_type.clone(),
        distortion_level: row.distortion_level,
        features: fv.into_values(),
    })
}

/// Features for every manifest row, in manifest order.
pub fn extract_all(
    net: &NetworkDescriptor,
    manifest: &DatasetManifest,
    metric: SimilarityMetric,
    tap: TapPoint,
) -> Result<Vec<FeatureRow>, ProtocolError> {
    manifest.rows().par_iter().map(|r| extract_row(net, manifest, r, metric, tap)).collect()
}

/// Rows processed between flushes of the cache file.
const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtractSummary {
    pub computed: usize,
    pub skipped: usize,
}

/// Extract into a feature cache, skipping pairs already present in `out`.
/// New rows are appended in manifest order and flushed chunk by chunk, so an
/// interrupted run can be resumed.
pub fn extract_to_cache(
    net: &NetworkDescriptor,
    manifest: &DatasetManifest,
    metric: SimilarityMetric,
    tap: TapPoint,
    out: &Path,
) -> Result<ExtractSummary, ProtocolError> {
    let n_features = net.feature_length();
    let existing = if out.exists() { read_feature_csv(out)? } else { Vec::new() };
    if let Some(r) = existing.iter().find(|r| r.features.len() != n_features) {
        return Err(ProtocolError::CacheMismatch(format!(
            "{} has {} features per row but the network yields {n_features}",
            r.pair_id,
            r.features.len()
        )));
    }
    let done: HashSet<&str> = existing.iter().map(|r| r.pair_id.as_str()).collect();
    let missing: Vec<&ManifestRow> = manifest.rows().iter().filter(|r| !done.contains(r.pair_id.as_str())).collect();
    let mut writer = if out.exists() {
        FeatureCsvWriter::append(out, n_features)?
    } else {
        FeatureCsvWriter::create(out, n_features)?
    };
    for chunk in missing.chunks(CHUNK) {
        let rows: Vec<FeatureRow> =
            chunk.par_iter().map(|r| extract_row(net, manifest, r, metric, tap)).collect::<Result<_, _>>()?;
        for r in &rows {
            writer.write_row(r)?;
        }
        writer.flush()?;
    }
    writer.flush()?;
    Ok(ExtractSummary { computed: missing.len(), skipped: manifest.len() - missing.len() })
}

fn labels(rows: &[&FeatureRow]) -> Vec<GroupLabel> {
    rows.iter()
        .map(|r| GroupLabel { distortion_type: r.distortion_type.clone(), distortion_level: r.distortion_level })
        .collect()
}

fn check_dims(rows: &[FeatureRow]) -> Result<usize, ProtocolError> {
    let d = rows.first().map_or(0, |r| r.features.len());
    if d == 0 {
        return Err(ProtocolError::CacheMismatch("no feature rows".into()));
    }
    if let Some(r) = rows.iter().find(|r| r.features.len() != d) {
        return Err(ProtocolError::CacheMismatch(format!(
            "{} has {} features, expected {d}",
            r.pair_id,
            r.features.len()
        )));
    }
    Ok(d)
}

/// Train on `train`, predict and evaluate on `test`.
pub fn train_and_evaluate(
    train_rows: &[&FeatureRow],
    test_rows: &[&FeatureRow],
    kind: RegressorKind,
    config: &RegressorConfig,
) -> Result<EvaluationReport, ProtocolError> {
    let x: Vec<Vec<f64>> = train_rows.iter().map(|r| r.features.clone()).collect();
    let y: Vec<f64> = train_rows.iter().map(|r| r.mos).collect();
    let model = train(kind, &x, &y, config)?;
    let predictions = test_rows.iter().map(|r| model.predict(&r.features)).collect::<Result<Vec<_>, _>>()?;
    let mos: Vec<f64> = test_rows.iter().map(|r| r.mos).collect();
    Ok(evaluate(&predictions, &mos, Some(&labels(test_rows)))?)
}

fn partition<'a>(rows: &'a [FeatureRow], test_refs: &BTreeSet<&str>) -> (Vec<&'a FeatureRow>, Vec<&'a FeatureRow>) {
    rows.iter().partition(|r| !test_refs.contains(r.reference_id.as_str()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossvalOptions {
    pub kind: RegressorKind,
    pub config: RegressorConfig,
    pub folds: usize,
    pub repetitions: usize,
    pub seed: u64,
}

/// Repeated reference-disjoint k-fold cross-validation. Every test fold is
/// evaluated separately; the report aggregates over all folds of all repetitions.
pub fn crossval(rows: &[FeatureRow], opts: &CrossvalOptions) -> Result<AggregateReport, ProtocolError> {
    check_dims(rows)?;
    let refs: Vec<String> = rows.iter().map(|r| r.reference_id.clone()).collect();
    let plans = make_splits(&refs, opts.folds, opts.repetitions, opts.seed)?;
    let tasks: Vec<(usize, usize)> = (0..plans.len()).flat_map(|p| (0..opts.folds).map(move |k| (p, k))).collect();
    let reports = tasks
        .par_iter()
        .map(|&(p, k)| {
            let (_, test_refs) = plans[p].train_test(k);
            let (train_rows, test_rows) = partition(rows, &test_refs);
            train_and_evaluate(&train_rows, &test_rows, opts.kind, &opts.config)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(aggregate(&reports, opts.repetitions, opts.seed))
}

/// Random splits at each training share (percent of references); one report per ratio.
pub fn sweep(
    rows: &[FeatureRow],
    kind: RegressorKind,
    config: &RegressorConfig,
    train_percents: &[f64],
    repetitions: usize,
    seed: u64,
) -> Result<Vec<(f64, AggregateReport)>, ProtocolError> {
    check_dims(rows)?;
    let refs: Vec<String> = rows.iter().map(|r| r.reference_id.clone()).collect();
    train_percents
        .iter()
        .map(|&pct| {
            let splits = ratio_splits(&refs, pct, repetitions, seed)?;
            let reports = splits
                .par_iter()
                .map(|s| {
                    let test_refs: BTreeSet<&str> = s.test.iter().map(String::as_str).collect();
                    let (train_rows, test_rows) = partition(rows, &test_refs);
                    train_and_evaluate(&train_rows, &test_rows, kind, config)
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok((pct, aggregate(&reports, repetitions, seed)))
        })
        .collect()
}

/// Train on every row of one database and test on every row of another.
pub fn crossdb(
    train_rows: &[FeatureRow],
    test_rows: &[FeatureRow],
    kind: RegressorKind,
    config: &RegressorConfig,
) -> Result<EvaluationReport, ProtocolError> {
    let d = check_dims(train_rows)?;
    let d_test = check_dims(test_rows)?;
    if d != d_test {
        return Err(ProtocolError::CacheMismatch(format!(
            "training features have {d} columns, test features {d_test}"
        )));
    }
    let train_refs: Vec<&FeatureRow> = train_rows.iter().collect();
    let test_refs: Vec<&FeatureRow> = test_rows.iter().collect();
    train_and_evaluate(&train_refs, &test_refs, kind, config)
}

/// Apply a MOS normalization to the rows of one database in place.
pub fn normalize_rows_mos(rows: &mut [FeatureRow], mode: MosNormalization) -> Result<(), ProtocolError> {
    if mode == MosNormalization::None {
        return Ok(());
    }
    let scores: Vec<f64> = rows.iter().map(|r| r.mos).collect();
    let (lo, hi) = min_max(&scores)?;
    for r in rows {
        r.mos = (r.mos - lo) / (hi - lo);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub metric: SimilarityMetric,
    pub regressor: RegressorKind,
    pub report: AggregateReport,
}

/// Cross-validate every similarity metric with every regressor.
pub fn paramstudy(
    net: &NetworkDescriptor,
    manifest: &DatasetManifest,
    tap: TapPoint,
    opts: &CrossvalOptions,
) -> Result<Vec<GridCell>, ProtocolError> {
    let mut cells = Vec::with_capacity(9);
    for metric in SimilarityMetric::ALL {
        let rows = extract_all(net, manifest, metric, tap)?;
        for regressor in RegressorKind::ALL {
            let report = crossval(&rows, &CrossvalOptions { kind: regressor, ..opts.clone() })?;
            cells.push(GridCell { metric, regressor, report });
        }
    }
    Ok(cells)
}

fn fixed(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.6}")
    }
}

/// `# seed=S`, then `train_ratio,n,plcc,srocc,krocc,plcc_std,srocc_std,krocc_std` (overall scope).
pub fn write_sweep_csv(mut w: impl Write, seed: u64, results: &[(f64, AggregateReport)]) -> std::io::Result<()> {
    writeln!(w, "# seed={seed}")?;
    writeln!(w, "train_ratio,n,plcc,srocc,krocc,plcc_std,srocc_std,krocc_std")?;
    for (pct, report) in results {
        if let Some(r) = report.overall() {
            writeln!(
                w,
                "{pct},{},{},{},{},{},{},{}",
                r.n,
                fixed(r.mean.plcc),
                fixed(r.mean.srocc),
                fixed(r.mean.krocc),
                fixed(r.std.plcc),
                fixed(r.std.srocc),
                fixed(r.std.krocc)
            )?;
        }
    }
    Ok(())
}

/// `# seed=S`, then `metric,regressor,n,plcc,srocc,krocc,plcc_std,srocc_std,krocc_std`.
pub fn write_grid_csv(mut w: impl Write, seed: u64, cells: &[GridCell]) -> std::io::Result<()> {
    writeln!(w, "# seed={seed}")?;
    writeln!(w, "metric,regressor,n,plcc,srocc,krocc,plcc_std,srocc_std,krocc_std")?;
    for c in cells {
        if let Some(r) = c.report.overall() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                c.metric.name(),
                c.regressor,
                r.n,
                fixed(r.mean.plcc),
                fixed(r.mean.srocc),
                fixed(r.mean.krocc),
                fixed(r.std.plcc),
                fixed(r.std.srocc),
                fixed(r.std.krocc)
            )?;
        }
    }
    Ok(())
}
