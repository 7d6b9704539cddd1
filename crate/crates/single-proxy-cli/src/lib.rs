//! Command-line front end: simulate synthetic data, fit estimators,
//! evaluate dose-response curves, and run the replicated benchmark.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error (I/O, parsing,
//! malformed inputs), 3 numerical failure.

use std::fmt;

use clap::error::ErrorKind;
use clap::Parser;

pub mod args;
pub mod bench;
pub mod commands;
pub mod model_io;

#[derive(Debug)]
pub enum CliError {
    Core(single_proxy::Error),
    Io { path: std::path::PathBuf, message: String },
    Json { path: std::path::PathBuf, message: String },
    Usage(String),
    /// Benchmark cells with no successful replication.
    EmptyCells(Vec<String>),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { path, message } => write!(f, "{}: {message}", path.display()),
            CliError::Json { path, message } => write!(f, "{}: {message}", path.display()),
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::EmptyCells(cells) => write!(
                f,
                "no replication succeeded for: {}",
                cells.join(", ")
            ),
        }
    }
}

impl From<single_proxy::Error> for CliError {
    fn from(e: single_proxy::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use single_proxy::ErrorClass;
        match self {
            CliError::Core(e) => match e.class() {
                ErrorClass::Usage => 1,
                ErrorClass::Data => 2,
                ErrorClass::Numerical => 3,
            },
            CliError::Io { .. } | CliError::Json { .. } => 2,
            CliError::Usage(_) => 1,
            CliError::EmptyCells(_) => 3,
        }
    }
}

fn dispatch(cli: args::Cli) -> Result<(), CliError> {
    match &cli.command {
        args::Command::Simulate(a) => commands::cmd_simulate(a),
        args::Command::Fit(a) => commands::cmd_fit(a),
        args::Command::Evaluate(a) => commands::cmd_evaluate(a),
        args::Command::Benchmark(a) => commands::cmd_benchmark(a),
    }
}

/// Parses arguments, runs the selected command, and returns the process
/// exit code.
pub fn run() -> i32 {
    let cli = match args::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    single_proxy::linalg::set_sequential_backend();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
