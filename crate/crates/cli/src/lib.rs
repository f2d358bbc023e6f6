//! Experiment runner: training with early stopping, benchmark tables,
//! variance and complexity studies.

pub mod benchmark;
pub mod commands;
pub mod error;
pub mod metrics;
pub mod study;
pub mod train;

pub use error::CliError;
pub use metrics::{micro_f1, RepeatedMetrics, RunMetrics, Stat};
pub use train::{train, train_repeated, train_with, TrainConfig};
