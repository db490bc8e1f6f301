use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use otrates::bounds::DEFAULT_ALPHA_GRID_POINTS;
use otrates::runner::{batch, load_config};

/// Discrete entropic optimal transport solver with certified convergence
/// and stability diagnostics.
#[derive(Parser)]
#[command(name = "otrates", version)]
struct Cli {
    /// Default alpha-grid size for the concentration constants; scenarios
    /// may override it individually.
    #[arg(
        long,
        env = "OTRATES_ALPHA_GRID_POINTS",
        default_value_t = DEFAULT_ALPHA_GRID_POINTS,
        global = true
    )]
    alpha_grid_points: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every scenario in a config and export rate tables and reports.
    Run {
        /// Batch config (single JSON document).
        #[arg(long)]
        config: PathBuf,
        /// Output directory; one subdirectory per scenario.
        #[arg(long)]
        out: PathBuf,
        /// Scenarios to run concurrently (0 = one per core).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Validate a config without running anything.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> otrates::Result<bool> {
    match cli.command {
        Command::Run { config, out, jobs } => {
            let cfg = load_config(&config)?;
            let summary = batch(&cfg, &out, jobs, cli.alpha_grid_points)?;
            for s in &summary.scenarios {
                match (&s.error, s.all_pass) {
                    (Some(e), _) => println!("{}: ERROR {e}", s.name),
                    (None, true) => println!("{}: pass", s.name),
                    (None, false) => {
                        let failed: Vec<&str> = s
                            .verdicts
                            .iter()
                            .filter(|v| !v.pass)
                            .map(|v| v.check.as_str())
                            .collect();
                        println!("{}: FAIL [{}]", s.name, failed.join(", "));
                    }
                }
            }
            Ok(summary.all_pass)
        }
        Command::Check { config } => {
            let cfg = load_config(&config)?;
            cfg.validate()?;
            println!("ok: {} scenario(s)", cfg.scenarios.len());
            Ok(true)
        }
    }
}
