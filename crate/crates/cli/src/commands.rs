//! Subcommand drivers: run a suite and write its artifacts.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use anyhow::{ensure, Context, Result};
use clap::ValueEnum;
use clifford_l2::identity::write_certificates_csv;

use crate::config::RunConfig;
use crate::report::RunReport;
use crate::suites::{self, solve::SolveSettings};

/// Largest `n` for commands that build grid fields.
pub const FIELD_MAX_N: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Algebra,
    Identities,
    Operators,
    Convergence,
    Solve,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Algebra => "algebra",
            Command::Identities => "identities",
            Command::Operators => "operators",
            Command::Convergence => "convergence",
            Command::Solve => "solve",
        }
    }

    fn needs_fields(self) -> bool {
        matches!(
            self,
            Command::Operators | Command::Convergence | Command::Solve
        )
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Options {
    /// Also write the assembled operator in coordinate format.
    pub export_matrix: bool,
}

/// Checks that need no computation: run before any work so usage errors
/// surface immediately.
pub fn preflight(cmd: Command, config: &RunConfig) -> Result<()> {
    config.validate()?;
    if cmd.needs_fields() {
        ensure!(
            config.n <= FIELD_MAX_N,
            "{} supports n <= {FIELD_MAX_N}, got n = {}",
            cmd.name(),
            config.n
        );
        config.grid_spec()?;
    }
    if cmd == Command::Convergence {
        suites::convergence::check_budget(
            config.n,
            config.ladder.base_count,
            config.ladder_rungs(),
        )?;
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

pub fn run(cmd: Command, config: &RunConfig, out: &Path, opts: Options) -> Result<RunReport> {
    preflight(cmd, config)?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let (n, seed, trials) = (config.n, config.seed, config.trials);
    let records = match cmd {
        Command::Algebra => suites::algebra::records(n, trials, seed),
        Command::Identities => {
            let certs = suites::identities::certificates(n, trials, seed);
            write_certificates_csv(&certs, create(&out.join("certificates.csv"))?)?;
            suites::identities::records(&certs)
        }
        Command::Operators => {
            let grid = config.grid_spec()?;
            let w = config.weight_spec()?;
            suites::operators::records(n, &grid, &w, trials, seed)?
        }
        Command::Convergence => {
            let w = config.weight_spec()?;
            let run =
                suites::convergence::run(n, &w, config.ladder.base_count, config.ladder_rungs())?;
            suites::convergence::write_csv(&run.studies, create(&out.join("convergence.csv"))?)?;
            run.records
        }
        Command::Solve => {
            let grid = config.grid_spec()?;
            let w = config.weight_spec()?;
            let f = config.source_field(&grid)?;
            let settings = SolveSettings {
                tol: config.tolerances.solver,
                slack: config.tolerances.certificate_slack,
                variant: config.bound_variant(),
                trials,
                seed,
            };
            let run = suites::solve::run(&grid, n, &w, f, &settings)?;
            let mut json = serde_json::to_string_pretty(&run.report)?;
            json.push('\n');
            fs::write(out.join("solve_report.json"), json)?;
            run.solution
                .u
                .write_csv(create(&out.join("solution.fields"))?)?;
            run.source.write_csv(create(&out.join("source.fields"))?)?;
            if opts.export_matrix {
                run.operator
                    .matrix()
                    .write_coordinate(create(&out.join("operator.coo"))?)?;
            }
            run.records
        }
    };
    let report = RunReport::new(cmd.name(), n, seed, records);
    fs::write(out.join("report.json"), report.to_json())?;
    Ok(report)
}
