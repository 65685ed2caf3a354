use std::process::ExitCode;

use clap::Parser;

mod args;
mod commands;
mod output;

use args::{Cli, Command};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] tanhforge::Error),
    #[error("bound violation: {0}")]
    Violation(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(_) | CliError::Io(_) => 1,
            CliError::Violation(_) => 3,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Build(a) => commands::build(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::Bounds(a) => commands::bounds(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::LemmaCheck(a) => commands::lemma_check(&a),
        Command::Catalog => commands::catalog(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tanhforge: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
