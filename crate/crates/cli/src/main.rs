use std::process::ExitCode;

use clap::Parser;

mod commands;
mod output;

use commands::{Cli, Failure};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(t) = std::env::var("AQC_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if !qvalued::par::init_threads(t) {
            log::warn!("AQC_THREADS ignored: worker pool unavailable");
        }
    }
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Refused(msg)) => {
            eprintln!("certificate refused: {msg}");
            ExitCode::from(4)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
