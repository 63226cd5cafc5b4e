//! Verification suites and solver front end for `clifford-l2`.
//!
//! Each subcommand reads a JSON [`config::RunConfig`], runs one suite of
//! checks and writes `report.json` plus suite-specific tables into the
//! output directory. Identical config and seed give byte-identical output.

pub mod commands;
pub mod config;
pub mod report;
pub mod suites;

pub use commands::{run, Command, Options};
pub use config::RunConfig;
pub use report::{Record, RunReport};
