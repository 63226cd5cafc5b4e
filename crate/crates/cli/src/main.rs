use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use clifford_l2_cli::{run, Command, Options, RunConfig};

/// Verification suites and weighted minimum-norm solves for the Clifford
/// Dirac operator.
///
/// Exit status: 0 when every check passes, 1 when a check fails, 2 on
/// usage, configuration or I/O errors.
#[derive(Debug, Parser)]
#[command(name = "clifford-l2", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for report.json and tables.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the number of ladder rungs.
    #[arg(long)]
    ladder: Option<usize>,
    /// Also write the operator matrix in coordinate format (solve only).
    #[arg(long)]
    export_matrix: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = RunConfig::load(&cli.config).and_then(|mut config| {
        if let Some(seed) = cli.seed {
            config.seed = seed;
        }
        if let Some(rungs) = cli.ladder {
            config.ladder.rungs = Some(rungs);
        }
        let opts = Options {
            export_matrix: cli.export_matrix,
        };
        run(cli.command, &config, &cli.out, opts)
    });
    match result {
        Ok(report) => {
            for r in &report.records {
                println!("{:4} {}", r.verdict.to_string().to_uppercase(), r.id);
            }
            println!("summary: {}", report.summary);
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
