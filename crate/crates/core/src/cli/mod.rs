//! Command-line front end: scenario files in, deterministic JSON and CSV out.
//!
//! ```text
//! taap potential-map|trap-params|simulate|sweep|check <scenario.json> [--out DIR] [--jobs N]
//! ```
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 some
//! sweep runs failed. `TAAP_JOBS` overrides `--jobs`.

pub mod commands;
pub mod output;
pub mod scenario;

use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::path::PathBuf;

pub use scenario::Scenario;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("cannot parse scenario ({context}): {message}")]
    Parse { context: String, message: String },

    #[error("invalid scenario:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    #[error("numerical failure: {0}")]
    Numeric(crate::Error),

    #[error("output error: {0}")]
    Output(String),

    #[error("{failed} of {total} sweep runs failed")]
    PartialSweep { failed: usize, total: usize },
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        match e {
            crate::Error::InvalidConfig(v) => CliError::Validation(v),
            e if e.is_validation() => CliError::Validation(vec![e.to_string()]),
            e => CliError::Numeric(e),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation(_) => 2,
            CliError::Numeric(_) | CliError::Io { .. } | CliError::Output(_) => 3,
            CliError::PartialSweep { .. } => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "taap",
    version,
    about = "Ring TAAP traps and Sagnac interferometer sequences"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Scenario file (JSON).
    pub scenario: PathBuf,
    /// Output directory; defaults to the scenario's outputs.directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps and maps.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Time-averaged potential of both branches on a grid.
    PotentialMap(CommonArgs),
    /// Closed-form and numerically extracted trap parameters.
    TrapParams(CommonArgs),
    /// Run the interferometer sequence once.
    Simulate(CommonArgs),
    /// Run the sequence for every value of the scenario's sweep.
    Sweep(CommonArgs),
    /// Validate the scenario and print the diagnostics report.
    Check(CommonArgs),
}

/// Worker count: `TAAP_JOBS`, then `--jobs`, then the scenario, then the
/// number of CPUs; never more than the amount of work.
pub fn resolve_jobs(cli: Option<usize>, scenario: Option<usize>, work: usize) -> Result<usize, CliError> {
    let env =
        match std::env::var("TAAP_JOBS") {
            Ok(s) => Some(s.trim().parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| {
                CliError::Validation(vec![format!("TAAP_JOBS must be a positive integer, got {s:?}")])
            })?),
            Err(_) => None,
        };
    if cli == Some(0) {
        return Err(CliError::Validation(vec!["--jobs must be positive".into()]));
    }
    let n = env
        .or(cli)
        .or(scenario)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    Ok(n.min(work.max(1)))
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let (name, args) = match &cli.command {
        Command::PotentialMap(a) => ("potential-map", a),
        Command::TrapParams(a) => ("trap-params", a),
        Command::Simulate(a) => ("simulate", a),
        Command::Sweep(a) => ("sweep", a),
        Command::Check(a) => ("check", a),
    };
    let scenario = Scenario::from_path(&args.scenario)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| scenario.file.outputs.directory.clone());
    match name {
        "potential-map" => commands::potential_map(&scenario, &out, args.jobs).map(|_| ()),
        "trap-params" => commands::trap_params(&scenario, &out).map(|_| ()),
        "simulate" => commands::simulate(&scenario, &out).map(|_| ()),
        "sweep" => commands::sweep(&scenario, &out, args.jobs).map(|_| ()),
        _ => {
            let report = commands::check(&scenario)?;
            print!("{}", output::pretty_json(&report));
            Ok(())
        }
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("taap: {e}");
            e.exit_code()
        }
    }
}
