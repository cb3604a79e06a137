//! File formats, corpus processing, synthetic fixtures and pipeline
//! orchestration on top of `anchorlex-core`.

pub mod config;
pub mod corpus;
pub mod error;
pub mod formats;
pub mod pipeline;
pub mod report;
pub mod synthetic;

pub use config::PipelineConfig;
pub use error::{AppError, Result};
pub use pipeline::{cmd_ablation, cmd_pipeline, with_threads, RunOutcome};
