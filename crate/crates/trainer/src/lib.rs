//! A small character-level decoder-only transformer trained from scratch,
//! with explicit forward and backward passes, seeded sampling at every
//! checkpoint, and bit-exact resumable runs.

pub mod config;
pub mod data;
pub mod decode;
pub mod error;
pub mod experiment;
pub mod kernels;
pub mod model;
pub mod optim;
pub mod real;
pub mod snapshot;

pub use config::{DecodeMode, ModelConfig, TrainConfig};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentConfig, LossRecord, RunOptions, RunOutcome};
pub use model::{Model, ParamLayout, Tensor, Workspace};
pub use optim::{AdamW, TrainState};
