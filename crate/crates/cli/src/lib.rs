//! The `wicklab` command line tool: runs scenario files against the
//! wicklab-core solvers and writes CSV/JSON artifacts with a checksummed
//! manifest.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub mod export;
pub mod runner;
pub mod scenario;

use scenario::{Diagnostic, Scenario};

/// Everything that can make a run fail, with the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// The scenario file could not be parsed or validated. Exit code 2.
    Scenario { path: PathBuf, problems: Vec<Diagnostic> },
    /// A solver finished without reaching its tolerance. Exit code 3.
    NotConverged { iterations: usize, residual: f64 },
    /// A physical or numerical failure inside the solvers. Exit code 4.
    Physics(wicklab_core::Error),
    /// Filesystem trouble. Exit code 1.
    Io { path: PathBuf, source: std::io::Error },
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Scenario { path, problems } => {
                writeln!(f, "{} is not a valid scenario:", path.display())?;
                for p in problems {
                    writeln!(f, "  {p}")?;
                }
                Ok(())
            }
            Self::NotConverged { iterations, residual } => write!(
                f,
                "did not converge after {iterations} iterations (residual {residual:.3e})"
            ),
            Self::Physics(err) => write!(f, "{err}"),
            Self::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            Self::Io { .. } => ExitCode::from(1),
            Self::Scenario { .. } => ExitCode::from(2),
            Self::NotConverged { .. } => ExitCode::from(3),
            Self::Physics(_) => ExitCode::from(4),
        }
    }
}

#[derive(Parser)]
#[command(name = "wicklab", version, about = "Contour and real-time propagation on periodic grids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Execute a scenario file and write its artifacts.
    Run {
        /// Path to the scenario file.
        scenario: PathBuf,
        /// Where to write outputs; overrides `output.directory` in the file.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Suppress progress output.
        #[arg(long)]
        quiet: bool,
        /// Size of the worker thread pool (0 keeps the library default).
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Parse a scenario file and report every problem found.
    Validate {
        /// Path to the scenario file.
        scenario: PathBuf,
    },
    /// Print version and build information.
    Version,
}

fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    Scenario::parse(&text)
        .map_err(|problems| CliError::Scenario { path: path.to_path_buf(), problems })
}

#[cfg(feature = "parallel")]
fn configure_threads(threads: usize) {
    if threads == 0 {
        return;
    }
    if let Err(err) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        eprintln!("warning: could not set thread pool size: {err}");
    }
}

#[cfg(not(feature = "parallel"))]
fn configure_threads(threads: usize) {
    if threads != 0 {
        eprintln!("warning: built without the parallel feature; --threads is ignored");
    }
}

/// Run one subcommand to completion.
pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { scenario, output_dir, quiet, threads } => {
            configure_threads(threads);
            let parsed = load_scenario(&scenario)?;
            let out_dir = output_dir
                .or_else(|| parsed.output_directory.clone())
                .unwrap_or_else(|| PathBuf::from("wicklab-out"));
            runner::execute(&parsed, &out_dir, quiet)?;
            if !quiet {
                println!("done");
            }
            Ok(())
        }
        Command::Validate { scenario } => {
            let parsed = load_scenario(&scenario)?;
            println!("{} is a valid {} scenario", scenario.display(), parsed.run_kind.as_str());
            Ok(())
        }
        Command::Version => {
            println!(
                "{} {} (parallel: {})",
                env!("CARGO_PKG_NAME"),
                env!("CARGO_PKG_VERSION"),
                cfg!(feature = "parallel"),
            );
            Ok(())
        }
    }
}
