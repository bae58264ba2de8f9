use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use carleman_lab::cli::{default_out_dir, parse_config, run_command, Command};

/// Numerical verification suites for the fractional anomalous-diffusion
/// Carleman laboratory.
#[derive(Parser)]
#[command(name = "carleman-lab", version)]
struct Args {
    /// Suite to run.
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV/JSON artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the configured RNG seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = match parse_config(&args.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(2);
        }
    };
    let out_dir = args.out.unwrap_or_else(default_out_dir);
    match run_command(args.command, &config, &out_dir, args.seed) {
        Ok(true) => {
            println!("all checks passed; artifacts in {}", out_dir.display());
            ExitCode::SUCCESS
        }
        Ok(false) => {
            eprintln!("one or more checks failed; artifacts in {}", out_dir.display());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
