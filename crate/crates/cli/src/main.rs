use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;
mod montage;

/// Analysis operator learning experiments.
#[derive(Parser)]
#[command(name = "aol", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn operators from synthetic cosparse signals.
    TrainSynthetic { config: PathBuf },
    /// Learn an operator from image patches.
    TrainImage { config: PathBuf },
    /// Denoise an image with learned operators over a parameter grid.
    Denoise { config: PathBuf },
    /// Print the version.
    Version,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::TrainSynthetic { config } => commands::train_synthetic(config),
        Command::TrainImage { config } => commands::train_image(config),
        Command::Denoise { config } => commands::denoise(config),
        Command::Version => {
            println!("aol {}", commands::VERSION);
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
