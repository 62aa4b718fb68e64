mod commands;
mod config;
mod dataset;

use clap::Parser;
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = config::Cli::parse();
    let (mode, mut config) = cli.command.into_parts();
    let outcome = config
        .apply_seed_env(std::env::var(config::SEED_ENV).ok())
        .and_then(|seed_from_env| commands::run(&commands::Invocation { mode, config, seed_from_env }));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
