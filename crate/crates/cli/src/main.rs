mod commands;
mod quantizer;
mod report;
mod settings;

use std::process::ExitCode;

use clap::Parser;

use commands::Usage;
use settings::{resolve, split_tolerances, Cli};

fn main() -> ExitCode {
    let (args, tols) = match split_tolerances(std::env::args().collect()) {
        Ok(split) => split,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    let settings = match resolve(cli, tols) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match commands::run(&settings) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.is::<Usage>() => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
