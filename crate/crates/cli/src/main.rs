//! `dirmix`: fit, compare and simulate Dirichlet mixtures for compositional data.
//!
//! Exit codes: 0 success, 2 input error, 3 configuration error, 4 numerical failure.
//! Standard output carries data and file paths only; diagnostics go to standard error.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use dirmix::Error;

use crate::args::{Cli, Command};

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Numerical(_) => 4,
        Error::FitFailed { source, .. } => exit_code(source),
        e if e.is_input_error() => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage_error { 3 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Select(a) => commands::select(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Summarize(a) => commands::summarize(a),
        Command::Diagnose(a) => commands::diagnose(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
