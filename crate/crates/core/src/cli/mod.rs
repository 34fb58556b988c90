//! Batch command-line front end.
//!
//! Four subcommands share one flag set:
//!
//! ```text
//! ada2ms train|verify-stats|sweep|align --config <path> [--out <dir>] [--seed <u64>]
//! ada2ms align --fixture table2 [--model <m>] [--opt <o>]
//! ```
//!
//! Exit codes are stable: see [`ExitStatus`].

pub mod align;
pub mod config;
pub mod records;
pub mod sweep;
pub mod train;
pub mod verify;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;

pub use config::{LrSpec, OptimizerSpec, ProblemSpec, ResolvedRun, RunConfig};

/// Environment variable that overrides the output directory of a config.
pub const OUT_DIR_ENV: &str = "ADA2MS_OUT_DIR";

/// Output directory used when neither flag, environment nor config set one.
pub const DEFAULT_OUT_DIR: &str = "out";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ExitStatus {
    Success = 0,
    /// Unreadable, malformed or invalid configuration or arguments.
    ConfigError = 1,
    /// A training run produced a non-finite loss or gradient.
    Diverged = 2,
    /// At least one statistical check failed or was underpowered.
    VerificationFailed = 3,
    /// Missing input file or failed output write.
    IoError = 4,
}

impl ExitStatus {
    pub fn code(self) -> u8 {
        self as u8
    }
}

impl From<&Error> for ExitStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => ExitStatus::IoError,
            Error::ProbeDiverged { .. } | Error::NonFiniteGradient { .. } => ExitStatus::Diverged,
            _ => ExitStatus::ConfigError,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ada2ms", version, about = "Ada2MS optimizer experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one problem with one optimizer and persist the record stream.
    Train(CommonArgs),
    /// Compare Monte Carlo estimates against closed-form moments.
    VerifyStats(CommonArgs),
    /// Run every cell of a parameter grid as an independent seeded run.
    Sweep(CommonArgs),
    /// Transfer a learning rate and weight decay between optimizers.
    Align(AlignArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides the environment and the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fixture {
    Table2,
}

#[derive(Debug, Clone, Args)]
pub struct AlignArgs {
    #[arg(long, required_unless_present = "fixture")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print published values instead of measuring.
    #[arg(long, value_enum)]
    pub fixture: Option<Fixture>,
    /// Fixture model column (swinv2s, yolov7tiny, unet).
    #[arg(long, requires = "fixture")]
    pub model: Option<String>,
    /// Fixture optimizer row.
    #[arg(long, requires = "fixture")]
    pub opt: Option<String>,
}

/// Pick the output directory: flag, then environment, then config, then
/// [`DEFAULT_OUT_DIR`].
pub fn resolve_out_dir(flag: Option<&Path>, config: Option<&str>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(config.unwrap_or(DEFAULT_OUT_DIR)),
    }
}

/// Run a parsed command line, reporting errors on stderr.
pub fn run(cli: Cli) -> ExitStatus {
    let result = match cli.command {
        Command::Train(a) => train::cmd_train(&a),
        Command::VerifyStats(a) => verify::cmd_verify_stats(&a),
        Command::Sweep(a) => sweep::cmd_sweep(&a),
        Command::Align(a) => align::cmd_align(&a),
    };
    match result {
        Ok(status) => status,
        Err(e) => {
            eprintln!("error: {e}");
            ExitStatus::from(&e)
        }
    }
}

/// Parse `args` and run. Argument errors map to [`ExitStatus::ConfigError`].
pub fn main_with_args<I, T>(args: I) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                ExitStatus::ConfigError
            } else {
                ExitStatus::Success
            }
        }
    }
}
