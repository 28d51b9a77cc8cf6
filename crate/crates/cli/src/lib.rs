//! Experiment harness: configuration, seeded parallel runs, a run registry
//! with JSON manifests, CSV result tables and SVG plots.

pub mod config;
pub mod experiments;
pub mod plot;
pub mod registry;
pub mod selftest;
pub mod table;

use std::io::{self, Write};
use std::path::{Path, PathBuf};

pub use config::{Config, UsageError};
pub use experiments::{Experiment, Outcome, Workers};

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONTRACT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug)]
pub enum RunError {
    Usage(UsageError),
    Io(io::Error),
}

impl From<UsageError> for RunError {
    fn from(e: UsageError) -> Self {
        RunError::Usage(e)
    }
}

impl From<io::Error> for RunError {
    fn from(e: io::Error) -> Self {
        RunError::Io(e)
    }
}

/// What a finished run left behind.
#[derive(Debug)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub passed: bool,
}

/// Validates the configuration, writes the manifest, runs the experiment and
/// writes its tables and plots into a fresh run directory under `out`.
pub fn execute(command: &str, mut cfg: Config, out: &Path, workers: usize) -> Result<RunSummary, RunError> {
    let experiment = Experiment::parse(command, &mut cfg)?;
    let pool = Workers::new(workers)?;
    let mut run = registry::Run::create(out, command, cfg.echo().clone(), experiment.seed(), workers)?;
    let outcome = experiment.run(&pool);
    for t in &outcome.tables {
        run.write(&format!("{}.csv", t.name), &t.to_csv())?;
    }
    for (name, svg) in &outcome.plots {
        run.write(name, svg)?;
    }
    let dir = run.finish(outcome.passed)?;
    Ok(RunSummary { dir, passed: outcome.passed })
}

/// Runs the invariant suite, one line per check.
pub fn run_selftest(kernel: &selftest::Kernel, mut log: impl Write) -> io::Result<bool> {
    let mut ok = true;
    for r in selftest::run(kernel) {
        if r.passed {
            writeln!(log, "ok   {}", r.name)?;
        } else {
            ok = false;
            writeln!(log, "FAIL {}: {}", r.name, r.detail.trim_end())?;
        }
    }
    Ok(ok)
}
