use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = lfmc::cli::Cli::parse();
    match lfmc::cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
