mod cli;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cfg = cli::RunConfig::parse();
    match cli::run(&cfg) {
        Ok(cli::Outcome::Ok) => ExitCode::SUCCESS,
        Ok(cli::Outcome::CheckFailed) => ExitCode::from(1),
        Err(e) if e.is::<cli::Usage>() => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
