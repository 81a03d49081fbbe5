//! File formats, figure emitters and the `tessera` command-line driver.
//!
//! Networks and all structured outputs are JSON with every float written to
//! 17 significant digits, datasets and tables are CSV, figures are SVG (plus
//! plain-text PGM for density grids). Every command writes a run manifest
//! with SHA-256 hashes of its inputs and outputs.

pub mod args;
pub mod commands;
pub mod dataset_io;
pub mod error;
pub mod files;
pub mod json;
pub mod manifest;
pub mod network_io;
pub mod svg;
pub mod tessellation_io;

use clap::Parser;

pub use error::{CliError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Runs one command line and returns the process exit code: 0 on success,
/// 1 on usage or validation errors, 2 on capacity or divergence errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use args::Command;
    let cli = match args::Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Init(a) => commands::init(a),
        Command::Train(a) => commands::train(a),
        Command::Tessellate(a) => commands::tessellate(a),
        Command::Lc(a) => commands::lc(a),
        Command::BnDensity(a) => commands::bn_density(a),
        Command::Sample(a) => commands::sample(a),
        Command::ProbeLandscape(a) => commands::probe_landscape(a),
        Command::Version => {
            commands::version();
            Ok(())
        }
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
