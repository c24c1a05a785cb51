//! `ionpump` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 numerical
//! failure.

mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::Error;
pub use config::RunConfig;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numerical(m) | CliError::Io(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidHilbert(_)
            | Error::LevelMismatch { .. }
            | Error::InvalidParams(_)
            | Error::InvalidState(_)
            | Error::NoDetectedChannels
            | Error::DegenerateFit => CliError::Config(e.to_string()),
            Error::NumericalAbort { .. }
            | Error::TraceIncrease { .. }
            | Error::UndefinedPostJump
            | Error::GridMismatch
            | Error::TooFewRecords { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "ionpump", version, about = "Dissipative Bell-state preparation of two trapped ions")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat key = value configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (overrides the `out` key).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for sweeps and ensembles.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Base random seed (overrides the `seed` key).
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Master-equation run to the steady state.
    Steady,
    /// Detection-conditioned trajectories.
    Trajectory,
    /// Conditional fidelity after a detection, plus the fidelity table.
    Conditional,
    /// Steady-state error over a two-parameter grid.
    Sweep,
    /// Full against eliminated model on a shared time grid.
    CompareModels,
}

impl Cli {
    fn config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for kv in &self.set {
            cfg.apply_override(kv)?;
        }
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }

    fn execute(&self) -> Result<PathBuf, CliError> {
        let cfg = self.config()?;
        std::fs::create_dir_all(&cfg.out)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", cfg.out.display())))?;
        let out = cfg.out.as_path();
        let work = || match self.command {
            Command::Steady => commands::steady(&cfg, out),
            Command::Trajectory => commands::trajectory(&cfg, out),
            Command::Conditional => commands::conditional(&cfg, out),
            Command::Sweep => commands::sweep_cmd(&cfg, out),
            Command::CompareModels => commands::compare(&cfg, out),
        };
        match self.threads {
            Some(0) => return Err(CliError::Config("--threads must be at least 1".into())),
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))?
                .install(work)?,
            None => work()?,
        }
        Ok(cfg.out.clone())
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match cli.execute() {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            0
        }
        Err(e) => {
            let kind = match e {
                CliError::Config(_) => "configuration error",
                CliError::Numerical(_) => "numerical error",
                CliError::Io(_) => "i/o error",
            };
            eprintln!("ionpump: {kind}: {}", e.message());
            e.exit_code()
        }
    }
}
