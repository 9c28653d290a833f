//! `passauth`: generate synthetic corpora, train per-modality Siamese LSTM
//! models and evaluate them fold by fold.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "passauth", version, about = "Passive authentication from smartphone sensor streams")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic corpus: one record file per (user, modality).
    Generate(GenerateArgs),
    /// Train models for one or all modalities on a fold's training users.
    Train(TrainArgs),
    /// Score checkpoints fold by fold and write metric reports.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 8)]
    pub n_users: usize,
    #[arg(long, default_value_t = 2)]
    pub days: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus_dir: PathBuf,
    /// Modality name, or `all`.
    #[arg(long)]
    pub modality: String,
    /// Training config file (`key = value` lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Checkpoint path; only when training a single (fold, modality).
    #[arg(long, conflicts_with = "checkpoints_dir")]
    pub out_checkpoint: Option<PathBuf>,
    /// Writes `fold<k>/<modality>.ckpt` under this directory.
    #[arg(long)]
    pub checkpoints_dir: Option<PathBuf>,
    /// Fold to train; all folds when omitted.
    #[arg(long)]
    pub fold: Option<usize>,
    #[arg(long, default_value_t = 4)]
    pub folds: usize,
    /// Overrides `rng_seed` from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `window` from the config.
    #[arg(short = 'T', long)]
    pub window: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub corpus_dir: PathBuf,
    #[arg(long)]
    pub checkpoints_dir: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub folds: usize,
    /// Overrides `window` from the config.
    #[arg(short = 'T', long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides `rng_seed` from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Modalities to evaluate (repeatable); all in the corpus by default.
    #[arg(long)]
    pub modality: Vec<String>,
    /// Genuine test pairs per user (impostors match them one for one).
    #[arg(long, default_value_t = 500)]
    pub eval_pairs: usize,
    /// JSON-lines report path.
    #[arg(long)]
    pub out_report: PathBuf,
    /// Aligned text report; defaults to the JSONL path with a `.txt` extension.
    #[arg(long)]
    pub out_table: Option<PathBuf>,
    /// Sum-score fusion over every modality subset.
    #[arg(long)]
    pub fusion: bool,
    /// Leave-one-out contribution of each modality to the full fusion.
    #[arg(long)]
    pub contribution: bool,
    /// Retrain and rescore at T = 3, 5, 10 and 20 seconds.
    #[arg(long)]
    pub sweep: bool,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    // configured from flags only; RUST_LOG is deliberately ignored
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_logging(cli.verbose);
    let result = match &cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
