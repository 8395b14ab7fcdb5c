//! Command-line orchestration for depthfuse: configuration, dataset layout,
//! synthetic data generation and the refinement pipeline.

pub mod config;
pub mod dataset;
mod error;
pub mod pipeline;

pub use config::PipelineConfig;
pub use error::{CliError, CliResult};
pub use pipeline::{run_pipeline, RunReport};
