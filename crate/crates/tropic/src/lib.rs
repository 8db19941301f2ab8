//! File formats and the `tropic` command-line front end.
//!
//! Every command produces a [`Report`]: `key=value` rows on standard output
//! (always led by `command=` and `seed=`) and a human-readable block on
//! standard error. Errors exit with 2 (parse), 3 (file format), 4 (budget)
//! or 1 (anything else).
pub mod audit;
pub mod cli;
pub mod data;
pub mod error;
pub mod format;
pub mod report;

use clap::Parser;

pub use cli::{run, Cli};
pub use error::CliError;
pub use report::Report;

/// Outcome of a full invocation: exit status and the two output streams.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub status: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn execute<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let status = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if status == 0 {
                Outcome { status, stdout: text, stderr: String::new() }
            } else {
                Outcome { status, stdout: String::new(), stderr: text }
            };
        }
    };
    match run(&cli) {
        Ok(r) => Outcome { status: 0, stdout: r.machine(), stderr: r.human },
        Err(e) => Outcome { status: e.exit_code(), stdout: String::new(), stderr: format!("error: {e}\n") },
    }
}
