//! Command-line driver: configuration, experiment dispatch and report emission.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod report;
pub mod verify;

use std::ffi::OsString;

use clap::Parser;
use hardylab_core::HardyError;

use crate::config::{Cli, RunConfig};
use crate::report::{write_outputs, Outcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug)]
pub enum RunError {
    /// Bad input; exit 2.
    Config(String),
    /// A numerical routine failed; exit 1.
    Numeric(HardyError),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "configuration error: {m}"),
            RunError::Numeric(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for RunError {}

/// Runs the configured experiment.
pub fn run(cfg: &RunConfig) -> Result<Outcome, RunError> {
    experiments::run_experiment(cfg)
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("HARDYLAB_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| format!("HARDYLAB_THREADS must be a positive integer (got '{v}')"))?;
    #[cfg(feature = "parallel")]
    {
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

/// Parses `args`, runs, prints and writes; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    if let Err(m) = configure_threads() {
        eprintln!("configuration error: {m}");
        return EXIT_CONFIG;
    }
    let (experiment, args) = cli.command.parts();
    let mut cfg = match RunConfig::from_args(experiment, args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };
    if !cfg!(feature = "parallel") {
        cfg.sequential = true;
    }
    let (outcome, code) = match run(&cfg) {
        Ok(o) => {
            let code = if o.all_passed() { EXIT_OK } else { EXIT_FAILED };
            (o, code)
        }
        Err(e) => {
            eprintln!("{e}");
            let code = match e {
                RunError::Config(_) => EXIT_CONFIG,
                RunError::Numeric(_) => EXIT_FAILED,
            };
            let mut o = Outcome::default();
            o.errors.push(e.record());
            (o, code)
        }
    };
    for l in &outcome.lines {
        println!("{l}");
    }
    if let Some(dir) = &cfg.out {
        if let Err(e) = write_outputs(dir, cfg.format, Some(&cfg), &outcome) {
            eprintln!("cannot write outputs to {}: {e}", dir.display());
            return EXIT_FAILED;
        }
    }
    code
}
