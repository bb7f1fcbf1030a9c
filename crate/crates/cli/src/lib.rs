//! Command-line harness: single-user reranking, corpus evaluation, path
//! statistics and candidate-count sweeps.

pub mod commands;
pub mod config;
pub mod error;
pub mod paths;
pub mod pipeline;
pub mod report;

pub use commands::{cmd_eval, cmd_paths, cmd_rerank, cmd_sweep};
pub use config::RunConfig;
pub use error::CliError;
