//! `hedge` command-line driver.
//!
//! Exit codes: 0 success, 1 internal error, 2 configuration or usage error,
//! 3 training divergence, 4 I/O failure.

mod commands;
mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hedge_core::training::{DataRole, ExperimentConfig};
use hedge_core::HedgeError;

pub use commands::{evaluate_run, price_quotes, simulate_summary, train_run, PriceRow, SimulationSummary};
pub use manifest::{load_experiment, Artifact, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "hedge", version, about = "Deep hedging of a 10-year lookback option")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Fixed-order gradient reduction. Always on; recorded in manifests.
    #[arg(long, global = true)]
    pub deterministic: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate market paths and export them as CSV.
    Simulate(SimulateArgs),
    /// Quote vanilla options and the lookback option.
    Price(PriceArgs),
    /// Train a hedging policy.
    Train(TrainArgs),
    /// Evaluate a policy on the test set.
    Evaluate(EvaluateArgs),
    /// Compare evaluated runs with the published statistics.
    Report(ReportArgs),
}

/// Where the experiment configuration comes from.
#[derive(Debug, Clone, Args)]
#[group(required = false, multiple = false)]
pub struct ExperimentSource {
    /// Shipped preset, e.g. `bsm-six-options-qdh` or `bsm-six-options-qdh-desk`.
    #[arg(long)]
    pub preset: Option<String>,
    /// Configuration TOML, or a run manifest.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub source: ExperimentSource,
    /// Replaces both the data seed and the initialization seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ExperimentArgs {
    pub fn resolve(&self) -> Result<(ExperimentConfig, Option<String>), CliError> {
        let (mut config, preset) = match (&self.source.preset, &self.source.config) {
            (Some(name), None) => (ExperimentConfig::preset(name)?, Some(name.clone())),
            (None, Some(path)) => load_experiment(path)?,
            _ => return Err(CliError::Usage("give exactly one of --preset or --config".into())),
        };
        if let Some(seed) = self.seed {
            config.seeds.data = seed;
            config.seeds.init = seed;
        }
        config.validate()?;
        Ok((config, preset))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RoleArg {
    Train,
    Validation,
    Test,
}

impl From<RoleArg> for DataRole {
    fn from(r: RoleArg) -> Self {
        match r {
            RoleArg::Train => DataRole::Train,
            RoleArg::Validation => DataRole::Validation,
            RoleArg::Test => DataRole::Test,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeasureArg {
    Physical,
    RiskNeutral,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    #[arg(long, value_enum, default_value = "test")]
    pub role: RoleArg,
    #[arg(long, value_enum, default_value = "physical")]
    pub measure: MeasureArg,
    /// Number of paths (defaults to the role's budget).
    #[arg(long)]
    pub paths: Option<usize>,
    /// Output directory for `paths.csv` and `manifest.toml`.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Call,
    Put,
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct PriceArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Strike (defaults to spot).
    #[arg(long)]
    pub strike: Option<f64>,
    /// Time to expiry in years.
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    #[arg(long, value_enum, default_value = "both")]
    pub kind: KindArg,
    /// Risk-neutral paths for the lookback price; 0 skips it.
    #[arg(long, default_value_t = 500_000)]
    pub lookback_paths: usize,
    /// Directory for `quotes.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Run directory (defaults to `runs/<experiment>`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Continue from `checkpoint.json` in the run directory.
    #[arg(long)]
    pub resume: bool,
    /// Also evaluate the selected policy on the test set.
    #[arg(long)]
    pub evaluate: bool,
    /// No per-epoch progress lines.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Run directory written by `train`; supplies config and parameters.
    #[arg(long)]
    pub run: Option<PathBuf>,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Parameter file (with --preset or --config).
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Evaluate the zero policy, which keeps everything in the bank account.
    #[arg(long)]
    pub baseline: bool,
    /// Output directory (defaults to the run directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Run directories or `stats.csv` files; directories are searched one
    /// level deep.
    pub runs: Vec<PathBuf>,
    /// Directory for `report.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Errors with their process exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Engine(HedgeError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Engine(e) => match e {
                HedgeError::Config(_) | HedgeError::Parse(_) | HedgeError::InvalidInput { .. } => 2,
                HedgeError::Diverged(_) => 3,
                HedgeError::Io(_) => 4,
                HedgeError::Contract(_) | HedgeError::SeriesTruncation { .. } => 1,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Engine(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<HedgeError> for CliError {
    fn from(e: HedgeError) -> Self {
        CliError::Engine(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Engine(HedgeError::Io(e))
    }
}

/// Settings shared by every subcommand.
#[derive(Debug, Clone, Copy)]
pub struct Runtime {
    pub threads: usize,
    pub deterministic: bool,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let threads = match cli.threads {
        Some(0) => return Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => {
            // a second call in the same process keeps the first pool
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            n
        }
        None => rayon::current_num_threads(),
    };
    let rt = Runtime { threads, deterministic: cli.deterministic };
    match cli.command {
        Command::Simulate(a) => commands::simulate(&a, rt),
        Command::Price(a) => commands::price(&a),
        Command::Train(a) => commands::train(&a, rt),
        Command::Evaluate(a) => commands::evaluate(&a, rt),
        Command::Report(a) => commands::report(&a),
    }
}
