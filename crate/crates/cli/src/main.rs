//! `cdeforest`: simulate data, train forests, predict conditional densities
//! on grids and evaluate the held-out density loss.
//!
//! Exit codes: 0 success, 2 input error, 3 degenerate data, 4 unsupported
//! combination of options.

mod commands;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cdeforest::{Criterion, Error};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Degenerate(String),
    #[error("{0}")]
    Unsupported(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Degenerate(_) => 3,
            CliError::Unsupported(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::DegenerateResponse { .. } => CliError::Degenerate(e.to_string()),
            Error::UnsupportedCriterion { .. } => CliError::Unsupported(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "cdeforest", version, about = "Random forests for conditional density estimation")]
struct Cli {
    /// Worker threads (0 = one per core). Results do not depend on this value.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a simulated data set as CSV.
    Simulate(SimulateArgs),
    /// Fit a forest and save it as a model file.
    Train(TrainArgs),
    /// Write conditional densities on a grid for every query row.
    Predict(PredictArgs),
    /// Report the held-out density loss of a model on a test CSV.
    Evaluate(EvaluateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SimModel {
    Univariate,
    Joint,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SecondLaw {
    /// z2 ~ Uniform(z1, x)
    Between,
    /// z2 ~ Uniform(x, 1)
    Above,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub model: SimModel,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Noise level of the univariate design.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Law of the second response in the joint design.
    #[arg(long, value_enum, default_value = "between")]
    pub z2_law: SecondLaw,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated response column names (default: `z`, else `z1,z2,...`).
    #[arg(long, value_delimiter = ',')]
    pub response_cols: Option<Vec<String>>,
    #[arg(long, default_value_t = 100)]
    pub ntrees: usize,
    /// Covariates tried per split (default: ceil(sqrt(p))).
    #[arg(long)]
    pub mtry: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub node_size: usize,
    #[arg(long, default_value_t = 15)]
    pub n_basis: usize,
    #[arg(long, default_value = "cde", value_parser = parse_criterion)]
    pub criterion: Criterion,
    #[arg(long, value_enum, default_value = "on")]
    pub bootstrap: Switch,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct GridArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Per-dimension `min:max:steps`, comma-separated for several responses.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: String,
    /// A number, a comma-separated per-dimension list, or `adaptive`.
    #[arg(long, default_value = "adaptive")]
    pub bandwidth: String,
}

#[derive(Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: GridArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: GridArgs,
    /// Score the uniform density over the grid instead of the model.
    #[arg(long)]
    pub reference_uniform: bool,
    /// Also write the report as a one-row CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_criterion(s: &str) -> Result<Criterion, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| CliError::Input(format!("cannot start {} threads: {e}", cli.threads)))?;
    pool.install(|| match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Train(a) => commands::train(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
