//! Command-line pipeline and read-only HTTP service over topic grids.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod pipeline;
pub mod service;

pub use dataset::{Dataset, LoadOptions};
pub use error::{Error, Result};
pub use pipeline::{build_bundle, Bundle, GridMetric, PipelineOptions};
pub use service::{router, ServiceConfig};
