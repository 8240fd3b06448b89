//! Streaming estimators for conditional kernel mean embeddings.
//!
//! The estimator ingests an i.i.d. stream of input/output pairs and maintains,
//! for each query input, a weighted-atom representation of the conditional
//! mean embedding of the output given that input. Updates are O(1) per query
//! per observation; batch recomputation, closed-form and Monte Carlo oracles,
//! schedule validation, and an experiment harness with a CLI sit on top.

pub mod ckme;
pub mod diagnostics;
pub mod embedding;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod kme;
pub mod metric;
pub mod oracle;
pub mod schedule;

pub use error::{Error, Result};
