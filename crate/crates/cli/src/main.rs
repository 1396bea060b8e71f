//! `eprb`: command-line front end for the simulation lab.
//!
//! Every command writes CSV outputs, a `summary.txt` and one
//! `manifest.json` into `--out`. `eprb replay <manifest>` re-runs a command
//! from its manifest and checks the outputs are byte-identical.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::process::ExitCode;

use clap::Parser;

mod angle;
mod args;
mod file;
mod manifest;
mod resolve;
mod run;

use args::Cli;
use resolve::Plan;

/// A problem with the flags or config file.
#[derive(Debug)]
pub struct Usage(pub String);

fn main() -> ExitCode {
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    let plan = match resolve::plan(&cli) {
        Ok(p) => p,
        Err(Usage(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let result = match plan {
        Plan::Run { seed, out, run } => run::execute(&run, seed, &out).map(|_| ()),
        Plan::Replay { manifest, out } => run::replay(&manifest, &out).map(|_| ()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
