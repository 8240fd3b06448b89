//! Command-line front end.
//!
//! Exit codes: 0 success, 1 for usage and validation failures (bad flags,
//! malformed or rejected configs, failed checks), 2 for runtime faults
//! (I/O, broken internal invariants).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::report::{curve_to_csv, summarize, summary_to_json};
use super::runner::{diagnose, kme_demo, oracle_check, run_experiment};

#[derive(Parser)]
#[command(
    name = "ckme",
    version,
    about = "Streaming conditional kernel mean embedding experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment described by a JSON config; writes curve.csv and
    /// summary.json into the config's output_dir.
    Run { config: PathBuf },
    /// Unconditional demo: stream standard normal draws and print the RKHS
    /// distance to a reference embedding next to the deviation bound.
    KmeDemo {
        /// Stream length.
        #[arg(long)]
        n: usize,
        /// Bound confidence level (failure probability).
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Report schedule sums and small-ball ratio curves for a config.
    Diagnose { config: PathBuf },
    /// Certify the closed-form oracle against Monte Carlo for a config.
    OracleCheck { config: PathBuf },
    /// Validate a config's stepsize/bandwidth schedule and print the report.
    Validate { config: PathBuf },
}

/// Parses and runs a full command line; returns the process exit code.
pub fn cli_dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) | Error::Internal(_) => 2,
        _ => 1,
    }
}

fn load_resolved(path: &Path) -> Result<super::config::ResolvedExperiment> {
    ExperimentConfig::load(path)?.resolve()
}

fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Cmd::Run { config } => {
            let exp = load_resolved(&config)?;
            std::fs::create_dir_all(&exp.output_dir)?;
            let rows = run_experiment(&exp)?;
            let csv_path = exp.output_dir.join("curve.csv");
            std::fs::write(&csv_path, curve_to_csv(&rows))?;
            let summary_path = exp.output_dir.join("summary.json");
            std::fs::write(&summary_path, summary_to_json(&summarize(&rows))?)?;
            println!("wrote {} and {}", csv_path.display(), summary_path.display());
            Ok(0)
        }
        Cmd::KmeDemo { n, delta, seed } => {
            let rows = kme_demo(n, delta, seed)?;
            println!("n,distance,bound");
            for r in rows {
                println!("{},{},{}", r.n, r.distance, r.bound);
            }
            Ok(0)
        }
        Cmd::Diagnose { config } => {
            let exp = load_resolved(&config)?;
            let report = diagnose(&exp)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if report.small_ball.iter().any(|c| c.curve.iter().any(|p| p.flagged)) {
                eprintln!(
                    "warning: small-ball ratio fell below {}; the localization \
                     assumptions look doubtful at some probes",
                    report.ratio_floor
                );
            }
            Ok(0)
        }
        Cmd::OracleCheck { config } => {
            let exp = load_resolved(&config)?;
            let report = oracle_check(&exp)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if report.passed {
                Ok(0)
            } else {
                eprintln!("error: closed-form oracle disagrees with Monte Carlo");
                Ok(1)
            }
        }
        Cmd::Validate { config } => {
            let exp = load_resolved(&config)?;
            let report = crate::schedule::validate_schedule(
                &exp.mother,
                &exp.schedule,
                exp.horizon().max(2),
            )?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(0)
        }
    }
}
