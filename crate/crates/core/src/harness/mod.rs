//! Experiment harness: strict JSON configs, a deterministic multi-seed
//! runner, result emission, and the CLI that ties them together.

pub mod cli;
pub mod config;
pub mod report;
pub mod runner;

pub use cli::cli_dispatch;
pub use config::{ExperimentConfig, ResolvedExperiment, SCHEMA_VERSION};
pub use report::{curve_to_csv, parse_csv, summarize, summary_to_json, CurveRow, RunSummary, CSV_HEADER};
pub use runner::{diagnose, kme_demo, oracle_check, run_experiment, DiagnoseReport, KmeDemoRow};
