mod args;
mod commands;
mod error;
mod manifest;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use serde_json::json;

use crate::args::Cli;
use crate::error::{CliError, Result};
use crate::manifest::Manifest;

fn report(e: &CliError) {
    eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
}

fn run(cli: &Cli, argv: Vec<String>) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    let config = serde_json::to_value(&cli.command)?;
    let manifest = Manifest::new(cli.command.name(), argv, cli.threads, config);
    commands::run(cli, manifest)
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report(&CliError::Usage(e.to_string().trim_end().to_string()));
            return ExitCode::from(2);
        }
    };
    match run(&cli, argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            ExitCode::FAILURE
        }
    }
}
