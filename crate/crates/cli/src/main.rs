use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = pint_cli::Cli::parse();
    let result = pint_cli::configure_workers().and_then(|()| pint_cli::execute(cli));
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
