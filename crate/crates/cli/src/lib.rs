//! Command-line front end for `mixnorm`.
//!
//! Exit codes: 0 on success, 1 when a `verify` check fails, 2 on invalid
//! parameters or any other error (diagnostic on stderr). Standard output
//! carries results only.

pub mod cli;
mod commands;
pub mod output;

use clap::Parser;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    CheckFailed,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let parsed = match cli::Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match commands::run(parsed) {
        Ok(Outcome::Pass) => 0,
        Ok(Outcome::CheckFailed) => 1,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}
