mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Config;
use crate::error::CliError;

/// Full-reference image quality assessment from CNN activation-map similarities.
#[derive(Debug, Parser)]
#[command(name = "actmap", version)]
pub struct Cli {
    /// Worker threads for extraction and repetitions (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// TOML file supplying defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the synthetic benchmark (PNGs and manifest.csv).
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        references: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compute activation-map similarity features into a resumable CSV cache.
    Extract {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// psnr, ssim or haarpsi.
        #[arg(long)]
        metric: Option<String>,
        /// post_relu or pre_relu.
        #[arg(long)]
        tap: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeated reference-disjoint k-fold cross-validation.
    Crossval {
        #[arg(long)]
        features: PathBuf,
        #[command(flatten)]
        study: StudyArgs,
        #[command(flatten)]
        regressor: RegressorArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Correlations as a function of the training share of references.
    Sweep {
        #[arg(long)]
        features: PathBuf,
        /// Comma-separated percentages, each in (0, 95].
        #[arg(long, value_delimiter = ',')]
        train_ratios: Option<Vec<f64>>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        regressor: RegressorArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validate every metric with every regressor (9 rows).
    Paramstudy {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        tap: Option<String>,
        #[command(flatten)]
        study: StudyArgs,
        #[command(flatten)]
        regressor: RegressorArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train on all rows of one database, test on all rows of another.
    Crossdb {
        #[arg(long)]
        train_features: PathBuf,
        #[arg(long)]
        test_features: PathBuf,
        /// none or minmax_per_db (default).
        #[arg(long)]
        mos_normalization: Option<String>,
        #[command(flatten)]
        regressor: RegressorArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a regressor on a feature cache and save the model.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[command(flatten)]
        regressor: RegressorArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict quality scores for a feature cache with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two correlation coefficients measured on the same n samples.
    Significance {
        #[arg(long, allow_hyphen_values = true)]
        r1: f64,
        #[arg(long, allow_hyphen_values = true)]
        r2: f64,
        #[arg(long)]
        n: usize,
    },
    /// KADID-10k protocol check, or the full run when the database is supplied.
    #[command(name = "repro-kadid10k")]
    ReproKadid10k {
        /// The database score file (dmos.csv).
        #[arg(long, requires_all = ["images", "net", "workdir"])]
        scores: Option<PathBuf>,
        /// Directory holding the reference and distorted images.
        #[arg(long)]
        images: Option<PathBuf>,
        /// Pretrained network archive.
        #[arg(long)]
        net: Option<PathBuf>,
        /// Where the manifest, feature cache and report are written.
        #[arg(long)]
        workdir: Option<PathBuf>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct StudyArgs {
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct RegressorArgs {
    /// linsvr, gsvr or gpr.
    #[arg(long)]
    pub regressor: Option<String>,
    #[arg(long)]
    pub svr_c: Option<f64>,
    #[arg(long)]
    pub svr_epsilon: Option<f64>,
    #[arg(long)]
    pub svr_gamma: Option<f64>,
    #[arg(long)]
    pub gpr_length_scale: Option<f64>,
    #[arg(long)]
    pub gpr_noise: Option<f64>,
    #[arg(long)]
    pub gpr_grid_search: bool,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let threads = cli.threads.or(config.threads).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Invalid(format!("cannot start thread pool: {e}")))?;
    pool.install(|| commands::dispatch(cli.command, &config))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
