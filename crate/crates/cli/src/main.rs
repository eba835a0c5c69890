//! Command-line front end: dataset generation or ingestion, POD, constrained
//! sensor placement, and noise-sweep evaluation, driven by one config file.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sparsense_cli::commands;
use sparsense_cli::config::PipelineConfig;

#[derive(Parser)]
#[command(
    name = "sparsense",
    version,
    about = "Sparse sensor placement and field reconstruction from snapshot data"
)]
struct Cli {
    /// Pipeline configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the master seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the output directory from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured dataset (packed binary plus coordinate sidecar).
    Generate,
    /// Decompose the training set and write the energy table.
    Pod,
    /// Select sensor locations under the configured constraints.
    Place,
    /// Noise-sweep evaluation of optimal and random placements.
    Evaluate,
}

fn main() -> ExitCode {
    // die quietly when a downstream pipe closes, like other table emitters
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config_path = cli
        .config
        .ok_or_else(|| anyhow::anyhow!("--config <file> is required"))?;
    let mut cfg = PipelineConfig::from_file(&config_path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    match cli.command {
        Command::Generate => commands::cmd_generate(&cfg),
        Command::Pod => commands::cmd_pod(&cfg),
        Command::Place => commands::cmd_place(&cfg),
        Command::Evaluate => commands::cmd_evaluate(&cfg),
    }
}

/// 2 = parse/input error, 3 = infeasible placement, 4 = numerical failure.
fn exit_code(err: &anyhow::Error) -> u8 {
    use sparsense::Error;
    match err.downcast_ref::<Error>() {
        Some(
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::DimensionMismatch(_)
            | Error::NonFinite { .. }
            | Error::InvalidArgument(_),
        ) => 2,
        Some(Error::Infeasible { .. }) => 3,
        Some(
            Error::DegenerateSpectrum(_)
            | Error::UnderDetermined { .. }
            | Error::IllConditioned { .. }
            | Error::NoConvergence(_),
        ) => 4,
        None => 2,
    }
}
