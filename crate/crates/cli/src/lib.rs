//! Command-line front end: simulate corpora, classify, evaluate, tune and
//! compare algorithms, and summarize tuning runs.
//!
//! [`run`] parses arguments and returns the process exit code, so the whole
//! tool can be driven in-process from tests.

pub mod args;
pub mod classify;
pub mod error;
pub mod evaluate;
pub mod files;
pub mod simulate;
pub mod tables;
pub mod tune;

use std::ffi::OsString;

use clap::Parser;

pub use args::Cli;
pub use error::{CliError, CliResult, EXIT_DATA, EXIT_INTERNAL, EXIT_OK, EXIT_USAGE};

use args::Command;

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Classify(a) => classify::run(a),
        Command::Evaluate(a) => evaluate::run(a),
        Command::Tune(a) => tune::run(a, cli.quiet),
        Command::Compare(a) => evaluate::run_compare(a),
        Command::Report(a) => tune::run_report(a),
    }
}

/// Runs a parsed command on a pool of `cli.workers` threads.
pub fn execute(cli: &Cli) -> CliResult<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Internal(e.to_string()))?;
    pool.install(|| dispatch(cli))
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        2 => tracing::Level::DEBUG,
        _ => tracing::Level::TRACE,
    };
    // A subscriber may already be installed when running in-process.
    let _ = tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .with_target(false)
        .try_init();
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Errors are printed to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.verbose);
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
