//! Command-line front end for the traffic predictability pipeline.
//!
//! `vtraffic ingest|synth` build a series cache, `analyze` and `predict`
//! read it, and `report` tabulates what `predict` wrote. Every command
//! writes under `--out`.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
mod output;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NO_INPUT: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("internal error: {0:#}")]
    Internal(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Internal(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Internal(e.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::MissingInput(_) => EXIT_NO_INPUT,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "vtraffic", version, about = "Predictability of daily voice traffic")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default, Clone)]
pub struct GlobalArgs {
    /// TOML file with defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse CDR files into a daily series cache.
    Ingest(IngestArgs),
    /// Generate a synthetic population into a series cache.
    Synth(SynthArgs),
    /// Entropy, predictability and stationarity per user.
    Analyze(AnalyzeArgs),
    /// Online prediction accuracy per user and predictor.
    Predict(PredictArgs),
    /// Accuracy against predictability table from `predict` output.
    Report(ReportArgs),
}

#[derive(Debug, Args, Default, Clone)]
pub struct IngestArgs {
    /// CDR files or directories.
    #[arg(long, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub first_day: Option<String>,
    #[arg(long)]
    pub last_day: Option<String>,
    /// Single character, or `tab`.
    #[arg(long)]
    pub delimiter: Option<String>,
    /// `default`, `compact`, or `columns=N,service_nbr=I,...`.
    #[arg(long)]
    pub layout: Option<String>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct SynthArgs {
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub days: Option<usize>,
    /// `default`, `dependent`, `periodic`, `zero`, or a TOML profile file.
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long)]
    pub first_day: Option<String>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct AnalyzeArgs {
    /// Series cache directory; defaults to `<out>/cache`.
    #[arg(long)]
    pub cache: Option<PathBuf>,
    /// Quantization intervals in seconds.
    #[arg(long, value_delimiter = ',')]
    pub t_list: Option<Vec<u64>>,
    /// `lz` or `exact:K`.
    #[arg(long, default_value = "lz")]
    pub estimator: String,
}

#[derive(Debug, Args, Default, Clone)]
pub struct PredictArgs {
    #[arg(long)]
    pub cache: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub t_list: Option<Vec<u64>>,
    /// Markov orders.
    #[arg(long, value_delimiter = ',')]
    pub orders: Option<Vec<usize>>,
    /// Extra predictors: `mf`, `diffusion`, or `none`.
    #[arg(long, value_delimiter = ',')]
    pub baselines: Option<Vec<String>>,
    /// Diffusion kernel strength.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub warmup: Option<usize>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct ReportArgs {
    /// Divides error ranges in seconds to give Erlang figures.
    #[arg(long)]
    pub seconds_per_erlang: Option<f64>,
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.global.config {
        Some(path) => config::FileConfig::load(path)?,
        None => config::FileConfig::default(),
    };
    let jobs = cli.global.jobs.or(file.jobs);
    if jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Internal(anyhow::anyhow!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Ingest(a) => commands::ingest(&cli.global, &file, a),
        Command::Synth(a) => commands::synth(&cli.global, &file, a),
        Command::Analyze(a) => commands::analyze(&cli.global, &file, a),
        Command::Predict(a) => commands::predict(&cli.global, &file, a),
        Command::Report(a) => commands::report(&cli.global, &file, a),
    })
}
