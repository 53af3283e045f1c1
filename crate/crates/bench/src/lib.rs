//! Benchmark campaigns for the svmtune searchers: the nested 2-fold/5-fold protocol, gains
//! against a baseline, two-run stability, bootstrap intervals and rank tests.

#![allow(clippy::needless_range_loop)]

pub mod config;
pub mod error;
pub mod harness;
pub mod stability;
pub mod stats;
pub mod synthetic;

pub use config::{NamedDataset, RunConfig};
pub use error::{BenchError, Result};
pub use harness::{run_campaign, run_trial, RecordSet, TrialRecord};
pub use stability::{two_run_stability, StabilityReport};
