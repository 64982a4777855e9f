//! `effseg`: generate phantoms, preprocess, train, cross-validate and report.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "effseg", version, about = "Pleural effusion segmentation on ultrasound phantoms")]
struct Cli {
    /// JSON run configuration; omitted fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configuration's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset (images/, masks/, meta.csv).
    Phantom,
    /// Mask the field of view, remove calipers and crop a dataset.
    Preprocess {
        /// Dataset directory to read.
        input: PathBuf,
    },
    /// Train the model of one cross-validation fold.
    Train {
        dataset: PathBuf,
        #[arg(long)]
        fold: usize,
        /// Append coordinate channels to the input.
        #[arg(long)]
        coordconv: bool,
    },
    /// Cross-validate both variants and write metrics, report and histograms.
    Cv { dataset: PathBuf },
    /// Re-render the report from stored metrics files.
    Report {
        #[arg(required = true)]
        metrics: Vec<PathBuf>,
        /// Inter-observer DSC table; defaults to interobserver.csv beside the first metrics file.
        #[arg(long)]
        interobserver: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(effseg::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Core(effseg::Error::Config(_)) => 1,
            CliError::Core(effseg::Error::NonFinite(_)) => 3,
            CliError::Core(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<effseg::Error> for CliError {
    fn from(e: effseg::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::load(cli.config.as_deref())?.resolve(cli.seed)?;
    std::fs::create_dir_all(&cli.out)?;
    let resolved = serde_json::to_string_pretty(&cfg).expect("config serializes");
    std::fs::write(cli.out.join("resolved_config.json"), resolved + "\n")?;
    match cli.command {
        Command::Phantom => commands::phantom(&cfg, &cli.out),
        Command::Preprocess { input } => commands::preprocess(&cfg, &input, &cli.out),
        Command::Train {
            dataset,
            fold,
            coordconv,
        } => commands::train(&cfg, &dataset, fold, coordconv, &cli.out),
        Command::Cv { dataset } => commands::cv(&cfg, &dataset, &cli.out),
        Command::Report {
            metrics,
            interobserver,
        } => commands::report(&cfg, &metrics, interobserver.as_deref(), &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
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
