use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod error;
mod output;

use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "dsdist", version, about = "Dataset distances from PCA-projected feature vectors")]
struct Cli {
    /// Worker threads (0 = one per core). Results do not depend on this.
    #[arg(long, global = true, env = "DSDIST_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Gaussian,
    LowRank,
    TwoCluster,
}

#[derive(Args, Debug)]
pub struct PairArgs {
    /// Primary (reference) dataset, FVEC1 or CSV
    #[arg(long)]
    pub primary: PathBuf,
    /// Number of principal components
    #[arg(long = "components", short = 'z', default_value_t = dsdist_core::DEFAULT_COMPONENTS)]
    pub components: usize,
}

#[derive(Args, Debug)]
pub struct ThresholdArgs {
    /// Threshold grid is k/steps for k = 1..steps
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    /// Score each image at its own best threshold instead of the dataset ODS threshold
    #[arg(long)]
    pub per_image_best: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Convert between CSV and FVEC1 (direction from file extensions)
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// CSV input has a header row (first cell "id" marks an id column)
        #[arg(long)]
        has_header: bool,
        /// Override the dataset id
        #[arg(long)]
        dataset_id: Option<String>,
    },
    /// Jointly center and project a dataset pair; caches the result
    Project {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long)]
        secondary: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Per-image and dataset distance of a secondary from the primary
    Distance {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long)]
        secondary: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Row-normalized table of dataset distances
    Table {
        /// Distance reports (JSON); rows are primaries, columns secondaries
        #[arg(long, num_args = 1.., conflicts_with = "raw")]
        input: Vec<PathBuf>,
        /// Raw table CSV: header of column labels, first column row labels
        #[arg(long)]
        raw: Option<PathBuf>,
        /// How many farthest columns to list per row
        #[arg(long, default_value_t = 2)]
        top: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Dataset distance for several component counts
    Sweep {
        #[arg(long)]
        primary: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        secondary: Vec<PathBuf>,
        #[arg(long = "z", num_args = 1.., default_values_t = [5, 10, 15, 20, 25])]
        z_values: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split distance-sorted images into parts and summarize each
    Splits {
        /// Distance report (JSON)
        #[arg(long)]
        distance: PathBuf,
        #[arg(long, default_value_t = 2)]
        parts: usize,
        /// Allow part counts other than 2 and 3
        #[arg(long)]
        allow_any_parts: bool,
        /// Report raw instead of min-max scaled distances
        #[arg(long)]
        unscaled: bool,
        /// Per-image scores CSV (image_id,f_score); parts get the mean score
        #[arg(long, conflicts_with = "pred_dir")]
        scores: Option<PathBuf>,
        /// Prediction PGMs; parts get the ODS of their images
        #[arg(long, requires = "gt_dir")]
        pred_dir: Option<PathBuf>,
        #[arg(long, requires = "pred_dir")]
        gt_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// ODS F-score over paired prediction and mask PGMs
    Ods {
        #[arg(long)]
        pred_dir: PathBuf,
        #[arg(long)]
        gt_dir: PathBuf,
        #[command(flatten)]
        thresholds: ThresholdArgs,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-image F-scores as CSV
        #[arg(long)]
        per_image: Option<PathBuf>,
    },
    /// F-score vs scaled distance curve, smoothed
    Curves {
        #[arg(long)]
        distance: PathBuf,
        /// Per-image scores CSV (image_id,f_score)
        #[arg(long)]
        scores: PathBuf,
        /// Moving-average window (default: a tenth of the images)
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Pick adaptation images inside a scaled-distance band
    Select {
        #[arg(long)]
        distance: PathBuf,
        /// Number of images to pick (1, 3 and 7 are the usual choices)
        #[arg(long)]
        count: usize,
        #[arg(long, num_args = 2, value_names = ["LOW", "HIGH"], default_values_t = [0.6, 1.0])]
        band: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank secondaries by dataset distance
    Rank {
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
        /// Size of the closest/farthest slices
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Also list this many closest/farthest images per secondary
        #[arg(long)]
        images: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic feature matrix
    Synth {
        #[arg(long, value_enum, default_value_t = KindArg::Gaussian)]
        kind: KindArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        q: usize,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        shift: f64,
        #[arg(long, default_value_t = 1)]
        rank: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        basis_seed: Option<u64>,
        #[arg(long, default_value = "synthetic")]
        dataset_id: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full pipeline: distances, ODS, per-image scores, splits and curves
    Report {
        #[command(flatten)]
        pair: PairArgs,
        #[arg(long, num_args = 1.., required = true)]
        secondary: Vec<PathBuf>,
        #[arg(long)]
        pred_dir: PathBuf,
        #[arg(long)]
        gt_dir: PathBuf,
        #[command(flatten)]
        thresholds: ThresholdArgs,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::usage(format!("cannot start {} threads: {e}", cli.threads)))?;
    pool.install(|| commands::execute(cli.command))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
