use std::process::ExitCode;

use clap::Parser;
use coca_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::FAILURE
        }
    }
}
