use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = wicklab::Cli::parse();
    match wicklab::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}
