//! `shiftspec` command-line front end.

mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::CliError;

#[derive(Parser, Debug)]
#[command(name = "shiftspec", version, about = "Simulate spurious-correlation shifts and audit accuracy on the line")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Domain-general vs. full classifiers under sampled shifts, plus the
    /// ID/OOD scatter of a classifier sweep.
    Simulate(SimulateArgs),
    /// Probit-scale accuracy-on-the-line audit of an accuracy table.
    Audit(AuditArgs),
    /// Bootstrap minimum number of models for a stable correlation.
    Mincount(MincountArgs),
    /// ColoredMNIST factor-level sweep and audit.
    Cmnist(CmnistArgs),
    /// Fraction of random shifts that are well-specified and on the line.
    ZeroMeasure(ZeroMeasureArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// TOML configuration; defaults are used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the seed of the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// ID accuracy is the mean over all other environments.
    Loo,
    /// ID accuracy is the accuracy on `--id-env`.
    Pairwise,
}

#[derive(Args, Debug)]
pub struct PairArgs {
    /// Accuracy table CSV (`model_id,<env...>[,meta:...]`).
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long, value_enum, default_value = "loo")]
    pub mode: Mode,
    #[arg(long)]
    pub ood_env: String,
    /// Required with `--mode pairwise`.
    #[arg(long)]
    pub id_env: Option<String>,
    #[arg(long, default_value_t = 1e-4)]
    pub clip_alpha: f64,
}

#[derive(Args, Debug)]
pub struct AuditArgs {
    #[command(flatten)]
    pub pairs: PairArgs,
    #[arg(long, default_value_t = 0.3)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct MincountArgs {
    #[command(flatten)]
    pub pairs: PairArgs,
    #[arg(long, default_value_t = 0.01)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub resamples: usize,
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
    #[arg(long, default_value_t = 10)]
    pub start: usize,
    #[arg(long, default_value_t = 100)]
    pub step: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CmnistArgs {
    #[arg(long, default_value_t = 0.25)]
    pub label_noise: f64,
    /// Color/label agreement of the training environment.
    #[arg(long, default_value_t = 0.9)]
    pub train_pe: f64,
    /// Comma-separated test environments.
    #[arg(long, value_delimiter = ',', default_value = "0.8,0.85,0.9,0.95,0.99")]
    pub test_grid: Vec<f64>,
    #[arg(long, default_value_t = 50_000)]
    pub n: usize,
    #[arg(long, default_value_t = 30)]
    pub models: usize,
    #[arg(long, default_value_t = 0.3)]
    pub threshold: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub clip_alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ZeroMeasureArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("SHIFTSPEC_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("SHIFTSPEC_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Audit(a) => commands::audit(&a),
        Command::Mincount(a) => commands::mincount(&a),
        Command::Cmnist(a) => commands::cmnist(&a),
        Command::ZeroMeasure(a) => commands::zero_measure(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
