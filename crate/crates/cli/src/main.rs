//! `grover-decoherence`: coefficient tables, the success-probability surface,
//! critical-budget curves, finite-`n` simulations and the oracle report.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 usage, 3 invalid
//! range or parameter, 4 memory guard, 5 validation failed.

mod commands;
mod error;
mod output;

use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::commands::{CoeffsArgs, ExactArgs, GridArgs, McArgs, Output, PhaseArgs, ValidateArgs};
use crate::error::CliError;

/// Rayon worker count; the only environment setting read.
const THREADS_VAR: &str = "GROVER_DECOHERENCE_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "grover-decoherence",
    version,
    about = "Perturbative and simulated success probabilities of Grover search under phase-flip noise"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact coefficients C_k of the expansion in x (CSV or JSON).
    Coeffs(CoeffsArgs),
    /// Truncated success probability on a (theta, x) grid.
    PbarGrid(GridArgs),
    /// Critical budget x_c as the threshold is swept down from 1.
    Phase(PhaseArgs),
    /// Monte Carlo trajectories at finite n.
    Mc(McArgs),
    /// Exact density-matrix evolution at finite n.
    Exact(ExactArgs),
    /// Cross-check the expansion against the brute-force oracles (JSON).
    Validate(ValidateArgs),
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Usage(format!("{THREADS_VAR}='{raw}' is not a positive integer"))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Internal(e.to_string()))
}

fn finish(out: Output, path: Option<&std::path::Path>, start: Instant) -> Result<(), CliError> {
    if let Some((extra, body)) = &out.extra {
        let mut manifest = out.manifest.clone();
        manifest.outputs.push(extra.display().to_string());
        output::emit_extra(body, &manifest, extra)?;
    }
    output::emit(&out.artifact, out.manifest, path, start.elapsed())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let start = Instant::now();
    match &cli.command {
        Command::Coeffs(a) => finish(commands::coeffs(a)?, a.out.as_deref(), start),
        Command::PbarGrid(a) => finish(commands::pbar_grid(a)?, a.out.as_deref(), start),
        Command::Phase(a) => finish(commands::phase(a)?, a.out.as_deref(), start),
        Command::Mc(a) => finish(commands::mc(a)?, a.out.as_deref(), start),
        Command::Exact(a) => finish(commands::exact(a)?, a.out.as_deref(), start),
        Command::Validate(a) => {
            let (out, passed) = commands::validate(a)?;
            finish(out, a.out.as_deref(), start)?;
            if passed {
                Ok(())
            } else {
                Err(CliError::Validation(
                    "one or more oracle checks failed".into(),
                ))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let line = msg
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            eprintln!("error[usage]: {line}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let text = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {text}", e.tag());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
