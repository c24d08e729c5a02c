//! The `lexphase` pipeline: produce samples by training or synthesis,
//! analyze them into per-sample and pooled metrics, detect the transition,
//! and render a report.
//!
//! Every stage reads and writes plain files in a run directory:
//!
//! ```text
//! run/
//!   manifest.json            samples, hashes, seeds, config
//!   samples/seed{S}/ckpt{C}.txt
//!   metrics.jsonl            analyze
//!   transition_report.json   detect
//!   report/                  report: csv/, plots/, histograms/, top_words/, report.md
//! ```

pub mod checks;
pub mod cli;
pub mod config;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod svg;

pub use cli::{run, run_from_args, Cli, Command};
pub use config::Config;
pub use error::{CliError, Result};
pub use metrics::{MetricsFile, PooledRecord, Stat};
