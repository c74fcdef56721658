//! Command-line orchestration of the standardization workflows: synthetic
//! scene generation, per-pair and generalized upscaling, ABSIS sharpening,
//! and metric evaluation.

mod commands;
mod config;

use clap::error::ErrorKind;
use clap::Parser;
use stifprep::Error;

pub use commands::{Cli, Command};

/// Exit code table, also printed by `--help`.
pub const EXIT_CODES: &str = "\
exit codes:
  0  success
  1  internal error
  2  usage error (unknown flags or arguments)
  3  i/o error (missing or unreadable files)
  4  format or configuration error (bad container, spec, or option value)
  5  incompatible grids or dimensions
  6  date not found / baseline unavailable
  7  degenerate data (search failed, undefined objective or metric)";

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => 3,
        Error::Format { .. } | Error::InvalidConfig(_) | Error::EmptyInput(_) => 4,
        Error::DimensionMismatch { .. }
        | Error::GridMismatch(_)
        | Error::DisjointExtent(_) => 5,
        Error::DateNotFound(_) | Error::BaselineUnavailable { .. } => 6,
        Error::SearchFailed(_)
        | Error::UndefinedObjective(_)
        | Error::UndefinedMetric(_)
        | Error::EmptyKernel { .. } => 7,
    }
}

fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::Io(_) => "io",
        Error::Format { .. } => "format",
        Error::InvalidConfig(_) | Error::EmptyInput(_) => "config",
        Error::DimensionMismatch { .. } => "dimension",
        Error::GridMismatch(_) | Error::DisjointExtent(_) => "grid",
        Error::DateNotFound(_) => "date-not-found",
        Error::BaselineUnavailable { .. } => "baseline-unavailable",
        Error::SearchFailed(_) => "search-failed",
        Error::UndefinedObjective(_) | Error::UndefinedMetric(_) => "degenerate",
        Error::EmptyKernel { .. } => "empty-kernel",
    }
}

/// Parses and runs a full argument vector (including `argv[0]`), returning
/// the process exit status. Runtime failures produce one machine-parsable
/// line on stderr: `error: code=<n> kind=<kind>: <detail>`.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => 0,
        Err(err) => {
            let detail = err.to_string().replace('\n', " ");
            eprintln!("error: code={} kind={}: {detail}", exit_code(&err), error_kind(&err));
            exit_code(&err)
        }
    }
}
