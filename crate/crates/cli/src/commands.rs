use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use actmap::archive::{load_archive, TapPoint};
use actmap::dataset::{
    kadid10k_layout, kadid10k_manifest, load_manifest, write_manifest, DatasetManifest, MosNormalization,
};
use actmap::evaluation::{make_splits, significance, Scope};
use actmap::features::read_feature_csv;
use actmap::protocol::{
    crossdb, crossval, extract_to_cache, normalize_rows_mos, paramstudy, sweep, write_grid_csv, write_sweep_csv,
    CrossvalOptions,
};
use actmap::regression::{load_model, save_model, train, RegressorConfig, RegressorKind};
use actmap::synthetic::generate_dataset;
use actmap::SimilarityMetric;

use crate::config::Config;
use crate::error::CliError;
use crate::{Command, RegressorArgs, StudyArgs};

const DEFAULT_SEED: u64 = 7;
const DEFAULT_FOLDS: usize = 5;
const DEFAULT_REPS: usize = 100;
const DEFAULT_TRAIN_RATIOS: [f64; 8] = [5.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 80.0];

/// KADID-10k shape: distorted pairs, reference images, folds.
const KADID_PAIRS: usize = 10_125;
const KADID_REFERENCES: usize = 81;
const KADID_FOLDS: usize = 5;
/// Published KADID-10k correlations of the method: PLCC, SROCC, KROCC.
const KADID_PUBLISHED: [(&str, f64); 3] = [("plcc", 0.959), ("srocc", 0.957), ("krocc", 0.819)];

fn parse<T: std::str::FromStr>(value: &str, what: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| CliError::Invalid(format!("{what}: {e}")))
}

fn regressor_config(args: &RegressorArgs, config: &Config) -> Result<(RegressorKind, RegressorConfig), CliError> {
    let kind = match args.regressor.as_deref().or(config.regressor.as_deref()) {
        Some(s) => parse(s, "--regressor")?,
        None => RegressorKind::GaussianSvr,
    };
    let mut rc = RegressorConfig::default();
    let svr = &config.svr;
    rc.svr.c = args.svr_c.or(svr.c).unwrap_or(rc.svr.c);
    rc.svr.epsilon = args.svr_epsilon.or(svr.epsilon).unwrap_or(rc.svr.epsilon);
    rc.svr.gamma = args.svr_gamma.or(svr.gamma);
    rc.svr.tolerance = svr.tolerance.unwrap_or(rc.svr.tolerance);
    rc.svr.max_iterations = svr.max_iterations.unwrap_or(rc.svr.max_iterations);
    let gpr = &config.gpr;
    rc.gpr.signal_variance = gpr.signal_variance.unwrap_or(rc.gpr.signal_variance);
    rc.gpr.length_scale = args.gpr_length_scale.or(gpr.length_scale);
    rc.gpr.mixture = gpr.mixture.unwrap_or(rc.gpr.mixture);
    rc.gpr.noise = args.gpr_noise.or(gpr.noise).unwrap_or(rc.gpr.noise);
    rc.gpr_grid_search = args.gpr_grid_search || gpr.grid_search.unwrap_or(false);
    Ok((kind, rc))
}

fn crossval_options(study: &StudyArgs, args: &RegressorArgs, config: &Config) -> Result<CrossvalOptions, CliError> {
    let (kind, rc) = regressor_config(args, config)?;
    Ok(CrossvalOptions {
        kind,
        config: rc,
        folds: study.folds.or(config.folds).unwrap_or(DEFAULT_FOLDS),
        repetitions: study.reps.or(config.reps).unwrap_or(DEFAULT_REPS),
        seed: study.seed.or(config.seed).unwrap_or(DEFAULT_SEED),
    })
}

fn metric(flag: Option<&str>, config: &Config) -> Result<SimilarityMetric, CliError> {
    match flag.or(config.metric.as_deref()) {
        Some(s) => parse(s, "--metric"),
        None => Ok(SimilarityMetric::HaarPsi),
    }
}

fn tap(flag: Option<&str>, config: &Config) -> Result<TapPoint, CliError> {
    match flag.or(config.tap.as_deref()) {
        Some(s) => parse(s, "--tap"),
        None => Ok(TapPoint::PostRelu),
    }
}

/// Render into memory, then write the file in one go (or print to stdout).
fn emit(out: Option<&Path>, render: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<(), CliError> {
    let mut buf = Vec::new();
    render(&mut buf).expect("writing to memory");
    match out {
        Some(path) => std::fs::write(path, &buf).map_err(|source| CliError::Io { path: path.to_path_buf(), source }),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(&buf)
                .and_then(|_| lock.flush())
                .map_err(|source| CliError::Io { path: "<stdout>".into(), source })
        }
    }
}

pub fn dispatch(command: Command, config: &Config) -> Result<(), CliError> {
    match command {
        Command::Generate { out, references, seed } => {
            let seed = seed.or(config.seed).unwrap_or(DEFAULT_SEED);
            let manifest = generate_dataset(&out, references, seed)?;
            eprintln!("wrote {} pairs to {}", manifest.len(), out.join("manifest.csv").display());
            Ok(())
        }
        Command::Extract { net, manifest, metric: m, tap: t, out } => {
            let metric = metric(m.as_deref(), config)?;
            let tap = tap(t.as_deref(), config)?;
            let net = load_archive(&net)?;
            let manifest = load_manifest(&manifest)?;
            let summary = extract_to_cache(&net, &manifest, metric, tap, &out)?;
            eprintln!("computed {} rows, skipped {} cached rows", summary.computed, summary.skipped);
            Ok(())
        }
        Command::Crossval { features, study, regressor, out } => {
            let opts = crossval_options(&study, &regressor, config)?;
            let rows = read_feature_csv(&features)?;
            let report = crossval(&rows, &opts)?;
            eprint!("{}", report.to_table());
            emit(out.as_deref(), |w| report.write_csv(w))
        }
        Command::Sweep { features, train_ratios, reps, seed, regressor, out } => {
            let (kind, rc) = regressor_config(&regressor, config)?;
            let ratios = train_ratios.or_else(|| config.train_ratios.clone()).unwrap_or(DEFAULT_TRAIN_RATIOS.to_vec());
            let reps = reps.or(config.reps).unwrap_or(DEFAULT_REPS);
            let seed = seed.or(config.seed).unwrap_or(DEFAULT_SEED);
            let rows = read_feature_csv(&features)?;
            let results = sweep(&rows, kind, &rc, &ratios, reps, seed)?;
            for (pct, report) in &results {
                if let Some(r) = report.overall() {
                    eprintln!("{pct:>5}%  srocc {:.4}  plcc {:.4}", r.mean.srocc, r.mean.plcc);
                }
            }
            emit(out.as_deref(), |w| write_sweep_csv(w, seed, &results))
        }
        Command::Paramstudy { net, manifest, tap: t, study, regressor, out } => {
            let opts = crossval_options(&study, &regressor, config)?;
            let tap = tap(t.as_deref(), config)?;
            let net = load_archive(&net)?;
            let manifest = load_manifest(&manifest)?;
            let cells = paramstudy(&net, &manifest, tap, &opts)?;
            for c in &cells {
                if let Some(r) = c.report.overall() {
                    eprintln!("{:<8} {:<7} srocc {:.4}", c.metric.name(), c.regressor, r.mean.srocc);
                }
            }
            emit(out.as_deref(), |w| write_grid_csv(w, opts.seed, &cells))
        }
        Command::Crossdb { train_features, test_features, mos_normalization, regressor, out } => {
            let (kind, rc) = regressor_config(&regressor, config)?;
            let mode = match mos_normalization.as_deref().or(config.mos_normalization.as_deref()) {
                Some(s) => parse(s, "--mos-normalization")?,
                None => MosNormalization::MinMaxPerDb,
            };
            let mut train_rows = read_feature_csv(&train_features)?;
            let mut test_rows = read_feature_csv(&test_features)?;
            normalize_rows_mos(&mut train_rows, mode)?;
            normalize_rows_mos(&mut test_rows, mode)?;
            let report = crossdb(&train_rows, &test_rows, kind, &rc)?;
            if let Ok(c) = &report.overall().outcome {
                eprintln!("plcc {:.4}  srocc {:.4}  krocc {:.4}", c.plcc, c.srocc, c.krocc);
            }
            emit(out.as_deref(), |w| report.write_csv(w))
        }
        Command::Train { features, regressor, out } => {
            let (kind, rc) = regressor_config(&regressor, config)?;
            let rows = read_feature_csv(&features)?;
            let x: Vec<Vec<f64>> = rows.iter().map(|r| r.features.clone()).collect();
            let y: Vec<f64> = rows.iter().map(|r| r.mos).collect();
            let model = train(kind, &x, &y, &rc)?;
            save_model(&out, &model)?;
            eprintln!("trained {kind} on {} rows, {} features", rows.len(), model.dim());
            Ok(())
        }
        Command::Predict { model, features, out } => {
            let model = load_model(&model)?;
            let rows = read_feature_csv(&features)?;
            let mut lines = Vec::with_capacity(rows.len());
            for r in &rows {
                lines.push((r.pair_id.as_str(), model.predict(&r.features)?));
            }
            emit(out.as_deref(), |w| {
                writeln!(w, "pair_id,prediction")?;
                for (id, p) in &lines {
                    writeln!(w, "{id},{p}")?;
                }
                Ok(())
            })
        }
        Command::Significance { r1, r2, n } => {
            let s = significance(r1, r2, n)?;
            emit(None, |w| {
                writeln!(w, "z,p_value,significant_at_05")?;
                writeln!(w, "{:.6},{:.6},{}", s.z_stat, s.p_value, s.significant_at_05)
            })
        }
        Command::ReproKadid10k { scores, images, net, workdir, reps, seed } => {
            let reps = reps.or(config.reps).unwrap_or(DEFAULT_REPS);
            let seed = seed.or(config.seed).unwrap_or(DEFAULT_SEED);
            match (scores, images, net, workdir) {
                (Some(scores), Some(images), Some(net), Some(workdir)) => {
                    repro_with_data(&scores, &images, &net, &workdir, reps, seed, config)
                }
                _ => {
                    println!("no database supplied: checking the protocol on the documented layout");
                    check_protocol_shape(&kadid10k_layout(), reps, seed)
                }
            }
        }
    }
}

/// Pair count, reference count and fold sizes of every repetition.
fn check_protocol_shape(manifest: &DatasetManifest, reps: usize, seed: u64) -> Result<(), CliError> {
    let refs = manifest.reference_ids();
    let mut failures = Vec::new();
    let mut report = |name: &str, got: String, expected: String| {
        let ok = got == expected;
        println!("{name:<12} {got:<20} expected {expected:<20} {}", if ok { "ok" } else { "MISMATCH" });
        if !ok {
            failures.push(name.to_string());
        }
    };
    report("pairs", manifest.len().to_string(), KADID_PAIRS.to_string());
    report("references", refs.len().to_string(), KADID_REFERENCES.to_string());
    let row_refs: Vec<String> = manifest.rows().iter().map(|r| r.reference_id.clone()).collect();
    let plans = make_splits(&row_refs, KADID_FOLDS, reps, seed)?;
    let base = refs.len() / KADID_FOLDS;
    let extra = refs.len() % KADID_FOLDS;
    let expected: Vec<usize> = (0..KADID_FOLDS).map(|k| base + usize::from(k < extra)).collect();
    let consistent = plans.iter().all(|p| p.fold_sizes() == expected);
    let sizes = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
    report("fold sizes", if consistent { sizes(&expected) } else { "varies".into() }, sizes(&[17, 16, 16, 16, 16]));
    report("repetitions", plans.len().to_string(), reps.to_string());
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(format!("protocol check failed: {}", failures.join(", "))))
    }
}

fn repro_with_data(
    scores: &Path,
    images: &Path,
    net: &Path,
    workdir: &Path,
    reps: usize,
    seed: u64,
    config: &Config,
) -> Result<(), CliError> {
    std::fs::create_dir_all(workdir).map_err(|source| CliError::Io { path: workdir.to_path_buf(), source })?;
    let manifest = kadid10k_manifest(scores, images, workdir)?;
    write_manifest(workdir.join("manifest.csv"), &manifest)?;
    check_protocol_shape(&manifest, reps, seed)?;
    let net = load_archive(net)?;
    let features: PathBuf = workdir.join("features_haarpsi.csv");
    let summary = extract_to_cache(&net, &manifest, SimilarityMetric::HaarPsi, TapPoint::PostRelu, &features)?;
    eprintln!("computed {} rows, skipped {} cached rows", summary.computed, summary.skipped);
    let rows = read_feature_csv(&features)?;
    let args = RegressorArgs {
        regressor: Some("gsvr".into()),
        svr_c: None,
        svr_epsilon: None,
        svr_gamma: None,
        gpr_length_scale: None,
        gpr_noise: None,
        gpr_grid_search: false,
    };
    let (kind, rc) = regressor_config(&args, config)?;
    let opts = CrossvalOptions { kind, config: rc, folds: KADID_FOLDS, repetitions: reps, seed };
    let report = crossval(&rows, &opts)?;
    let path = workdir.join("report.csv");
    let file = File::create(&path).map_err(|source| CliError::Io { path: path.clone(), source })?;
    let mut w = BufWriter::new(file);
    report.write_csv(&mut w).and_then(|_| w.flush()).map_err(|source| CliError::Io { path: path.clone(), source })?;
    let overall = report.get(&Scope::All).ok_or_else(|| CliError::Check("every evaluation was degenerate".into()))?;
    let measured = [overall.mean.plcc, overall.mean.srocc, overall.mean.krocc];
    println!("{:<6} {:>9} {:>9} {:>9}", "", "measured", "published", "delta");
    for ((name, published), got) in KADID_PUBLISHED.iter().zip(measured) {
        println!("{name:<6} {got:>9.4} {published:>9.4} {:>+9.4}", got - published);
    }
    Ok(())
}
