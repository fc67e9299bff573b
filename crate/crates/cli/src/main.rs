//! `ema`: command-line front end for the critical-threshold library.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use crate::error::CliError;
use crate::output::Format;

#[derive(Debug, Parser)]
#[command(name = "ema", version, about = "Critical thresholds of the damped radial Euler-Monge-Ampere system")]
struct Args {
    /// TOML run configuration.
    config: PathBuf,

    /// Output directory; stdout when neither this nor `[output].dir` is set.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Output format (default csv).
    #[arg(long, value_enum)]
    format: Option<Format>,

    /// Worker threads for sweeps and rays.
    #[arg(long)]
    threads: Option<usize>,
}

fn run(args: &Args) -> Result<(), CliError> {
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::config("--threads", "--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config("--threads", e.to_string()))?;
    }
    let cfg = config::load(&args.config)?;
    let format = args.format.or(cfg.output.format).unwrap_or(Format::Csv);
    let dir = args.out.clone().or_else(|| cfg.output.dir.clone());
    let outcome = commands::run(&cfg)?;
    outcome.report.emit(format, dir.as_deref())?;
    match outcome.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
