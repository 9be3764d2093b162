//! `dpc` command-line front end.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 runtime or
//! numeric failure during training.

mod args;
mod commands;
mod files;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;
use dpc::DpcError;

use args::{Cli, Command};
use commands::Globals;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(DpcError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_runtime() => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => f.write_str(msg),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<DpcError> for CliError {
    fn from(e: DpcError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

fn main() -> ExitCode {
    // clap exits 2 on usage errors and 0 on --help / --version.
    let cli = Cli::parse();
    let g = Globals {
        seed: cli.seed,
        json: cli.json,
        out_dir: cli.out_dir,
        properties: cli.properties,
    };
    let result = match &cli.command {
        Command::Synth(a) => commands::synth(&g, a),
        Command::Train(a) => commands::train(&g, a),
        Command::Eval(a) => commands::eval(&g, a),
        Command::Curve(a) => commands::curve(&g, a),
        Command::Compare(a) => commands::compare(&g, a),
        Command::Rank(a) => commands::rank(&g, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
