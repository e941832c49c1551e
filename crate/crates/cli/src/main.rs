//! `wsmom`: calibrate Ising ground truths, sample, fit and apply label
//! models, decompose their error, evaluate bounds, and run the experiment
//! suites and the keyword case study.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use wsmom::estimators::Aggregation;
use wsmom::experiments::{AlphaMode, Estimator, DEFAULT_SEED};
use wsmom::label_model::Smoothing;
use wsmom::ws::KeywordSource;

#[derive(Debug, Parser)]
#[command(name = "wsmom", version, about = "Method-of-moments label models for weak supervision")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Root seed for every random draw
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Report format on stdout
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Run manifest path (default: next to the output, else ./wsmom-run.json)
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit canonical parameters to target accuracies and edge misspecification
    Calibrate(CalibrateArgs),
    /// Draw a vote matrix (with labels unless --unlabeled) from a model
    Sample(SampleArgs),
    /// Estimate source parameters from a vote matrix
    Fit(FitArgs),
    /// Soft labels for a vote matrix under a fitted model
    Infer(InferArgs),
    /// Exact four-term error decomposition of a fit against its true model
    Decompose(DecomposeArgs),
    /// Evaluate the generalisation bounds and approximate data value ratios
    Bounds(BoundsArgs),
    /// Monte-Carlo excess-error curves
    Curves(ExperimentArgs),
    /// Monte-Carlo data value ratio search
    Dvr(DvrArgs),
    /// Labelled/unlabelled combination sweep
    Combine(CombineArgs),
    /// Keyword weak-supervision pipeline
    #[command(subcommand)]
    Ws(WsCommand),
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("target").required(true).args(["targets", "reference"])))]
pub struct CalibrateArgs {
    /// Target file: {"accuracies": [...], "edges": [[i, j], ...], "eps": [...], "class_balance": p}
    #[arg(long)]
    pub targets: Option<PathBuf>,
    /// Use the reference 10-source model with this many edges (0-5)
    #[arg(long, value_name = "D")]
    pub reference: Option<usize>,
    /// Model output (JSON)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Model file (JSON, from calibrate)
    #[arg(long)]
    pub model: PathBuf,
    /// Number of rows
    #[arg(long)]
    pub n: usize,
    /// Drop the label column
    #[arg(long)]
    pub unlabeled: bool,
    /// Vote matrix output (.csv, or .bin for the binary format)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitMethod {
    /// Mean agreement with the labels
    Labeled,
    /// Class-conditional vote frequencies from labels
    LabeledClass,
    /// Symmetric triplet method
    Triplet,
    /// Class-conditional quadratic triplets
    Quadratic,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Vote matrix (CSV or binary)
    #[arg(long)]
    pub data: PathBuf,
    /// Estimation method
    #[arg(long, value_enum)]
    pub method: FitMethod,
    /// Triplet aggregation: single, mean or median
    #[arg(long, default_value = "median")]
    pub agg: Aggregation,
    /// Pr(Y = 1)
    #[arg(long, default_value_t = 0.5)]
    pub class_balance: f64,
    /// Known dependent pairs excluded from triplets, e.g. 0-1,2-3
    #[arg(long, value_delimiter = ',', value_parser = parse_edge)]
    pub known_edges: Vec<(usize, usize)>,
    /// Fit output (JSON)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Normalized,
    Empirical,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    /// Fit file (JSON, from fit)
    #[arg(long)]
    pub fit: PathBuf,
    /// Vote matrix (CSV or binary)
    #[arg(long)]
    pub data: PathBuf,
    /// Posterior: normalized naive Bayes, or empirical with the observed configuration distribution
    #[arg(long, value_enum, default_value_t = Mode::Normalized)]
    pub mode: Mode,
    /// Smoothing of the empirical configuration distribution: none, laplace or laplace:K
    #[arg(long, default_value = "none")]
    pub smoothing: Smoothing,
    /// Soft-label output (CSV: row_id,p_y1,soft_label)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// True model (JSON)
    #[arg(long)]
    pub model: PathBuf,
    /// Sample used for the fit and for the configuration distribution
    #[arg(long)]
    pub data: PathBuf,
    /// Fitted parameters; fitted from --data with --method when absent
    #[arg(long)]
    pub fit: Option<PathBuf>,
    /// Estimation method
    #[arg(long, value_enum, default_value_t = FitMethod::Triplet)]
    pub method: FitMethod,
    /// Triplet aggregation: single, mean or median
    #[arg(long, default_value = "median")]
    pub agg: Aggregation,
    /// Smoothing of the empirical configuration distribution: none, laplace or laplace:K
    #[arg(long, default_value = "laplace:1")]
    pub smoothing: Smoothing,
    /// Report output; stdout when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Model file (JSON, from calibrate)
    #[arg(long)]
    pub model: PathBuf,
    /// Unlabelled sample size
    #[arg(long = "n-u")]
    pub n_u: u64,
    /// Labelled sample size
    #[arg(long = "n-l")]
    pub n_l: u64,
    /// Worst per-source MSE of median aggregation
    #[arg(long, conflicts_with = "rho_trials")]
    pub rho: Option<f64>,
    /// Estimate rho by Monte Carlo at n_U with this many trials (>= 30)
    #[arg(long)]
    pub rho_trials: Option<usize>,
    /// Output file
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Experiment config (JSON); the reference model when absent
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Edges of the reference model when no config is given
    #[arg(long, default_value_t = 5)]
    pub d: usize,
    /// Trials per point
    #[arg(long)]
    pub trials: Option<usize>,
    /// Sample sizes, e.g. 250,500,1000
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Vec<u64>,
    /// Estimators, e.g. labeled,triplet-mean
    #[arg(long, value_delimiter = ',')]
    pub estimators: Vec<Estimator>,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DvrArgs {
    #[command(flatten)]
    pub common: ExperimentArgs,
    /// Unlabelled sizes (default: the n grid)
    #[arg(long = "n-u", value_delimiter = ',')]
    pub n_u: Vec<u64>,
    /// Unlabelled estimators (default: triplet-mean,triplet-median)
    #[arg(long, value_delimiter = ',')]
    pub unlabeled: Vec<Estimator>,
}

#[derive(Debug, Args)]
pub struct CombineArgs {
    #[command(flatten)]
    pub common: ExperimentArgs,
    /// Unlabelled sample size
    #[arg(long = "n-u", default_value_t = 1000)]
    pub n_u: u64,
    /// Labelled sizes
    #[arg(long = "n-l", value_delimiter = ',', default_values_t = [50u64, 100, 200, 400])]
    pub n_l: Vec<u64>,
    /// Unlabelled estimator
    #[arg(long, default_value = "triplet-mean")]
    pub unlabeled: Estimator,
    /// Weight rules: grid, gs, gs:R or a fixed weight in [0, 1]
    #[arg(long, value_delimiter = ',', default_value = "grid,gs", value_parser = parse_alpha)]
    pub alpha: Vec<AlphaMode>,
}

#[derive(Debug, Subcommand)]
pub enum WsCommand {
    /// Convert a review dataset into corpus JSONL plus a split manifest
    Ingest(WsIngestArgs),
    /// Vote matrix of a corpus under keyword sources
    Apply(WsApplyArgs),
    /// Fit and evaluate the case-study models
    Run(WsRunArgs),
}

#[derive(Debug, Args)]
pub struct WsIngestArgs {
    /// Root of the aclImdb directory layout
    #[arg(long, conflicts_with = "csv", required_unless_present = "csv")]
    pub aclimdb: Option<PathBuf>,
    /// CSV with text and label columns
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Text column of the CSV
    #[arg(long, default_value = "review")]
    pub text_column: String,
    /// Label column of the CSV
    #[arg(long, default_value = "sentiment")]
    pub label_column: String,
    /// Share of documents assigned to the training split
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    /// Corpus output (JSONL)
    #[arg(long)]
    pub out: PathBuf,
    /// Split manifest output (JSON)
    #[arg(long)]
    pub split: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Subset {
    Train,
    Test,
    All,
}

#[derive(Debug, Args)]
pub struct WsApplyArgs {
    /// Corpus (JSONL)
    #[arg(long)]
    pub corpus: PathBuf,
    /// Split manifest (JSON)
    #[arg(long)]
    pub split: PathBuf,
    /// Keyword sources, e.g. good:+,bad:- (default: the 12-word roster)
    #[arg(long, value_delimiter = ',')]
    pub sources: Vec<KeywordSource>,
    /// Documents to label: train, test or all
    #[arg(long, value_enum, default_value_t = Subset::Train)]
    pub subset: Subset,
    /// Output file
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct WsRunArgs {
    /// Corpus (JSONL)
    #[arg(long)]
    pub corpus: PathBuf,
    /// Split manifest (JSON)
    #[arg(long)]
    pub split: PathBuf,
    /// Case-study config (JSON)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Subsamples per sample size (overrides the config)
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Metrics table output (CSV)
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_edge(s: &str) -> Result<(usize, usize), String> {
    let (i, j) = s.split_once('-').ok_or_else(|| format!("expected I-J, got {s:?}"))?;
    let idx = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("{x:?}: {e}"));
    Ok((idx(i)?, idx(j)?))
}

fn parse_alpha(s: &str) -> Result<AlphaMode, String> {
    match s {
        "grid" | "grid-optimal" => Ok(AlphaMode::GridOptimal),
        "gs" => Ok(AlphaMode::GreenStrawderman { radius: None }),
        _ => {
            if let Some(r) = s.strip_prefix("gs:") {
                let radius = r.parse::<f64>().map_err(|e| format!("radius {r:?}: {e}"))?;
                return Ok(AlphaMode::GreenStrawderman { radius: Some(radius) });
            }
            let alpha = s
                .parse::<f64>()
                .map_err(|_| format!("expected grid, gs, gs:R or a weight, got {s:?}"))?;
            if !(0.0..=1.0).contains(&alpha) {
                return Err(format!("weight {alpha} outside [0, 1]"));
            }
            Ok(AlphaMode::Fixed { alpha })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            if code == 2 {
                eprintln!("hint: run `wsmom --help` or `wsmom <command> --help` for usage");
            }
            return ExitCode::from(code as u8);
        }
    };
    let result = match cli.global.jobs {
        Some(0) => Err(wsmom::Error::InvalidInput("--jobs must be at least 1".into())),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| wsmom::Error::InvalidInput(format!("thread pool: {e}")))
            .and_then(|pool| pool.install(|| commands::dispatch(&cli))),
        None => commands::dispatch(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.name());
            ExitCode::from(1)
        }
    }
}
