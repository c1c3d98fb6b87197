use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ptsoliton_cli::{parse_config, run, Mode};

/// Exact PT-symmetric two-component solitons: amplitudes, linear stability,
/// stability maps, noisy propagation and adiabatic excitation.
///
/// Exit status: 0 ok, 1 i/o error, 2 config error, 3 numerical failure,
/// 4 blow-up (outputs still written).
#[derive(Debug, Parser)]
#[command(name = "ptsoliton", version)]
struct Cli {
    /// One of: solve, stability, map, evolve, excite.
    mode: String,
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set w1=0.55` or `--set schedule.a1=[0.1,1.0]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (overrides `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = cli
        .mode
        .parse::<Mode>()
        .and_then(|m| parse_config(Some(m), cli.config.as_deref(), &cli.set, cli.out.as_deref()));
    let config = match config {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&config) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            ExitCode::from(outcome.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
