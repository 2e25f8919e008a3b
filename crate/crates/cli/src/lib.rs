//! Pipeline commands behind the `wmseg` binary: phantom generation,
//! preprocessing, cross-validated training, inference, evaluation, TractSeg
//! merging, method comparison and figures.

pub mod cmd;
pub mod config;
pub mod error;
pub mod layout;
pub mod subjects;
pub mod svg;

pub use config::PipelineConfig;
pub use error::{CliError, Result};
