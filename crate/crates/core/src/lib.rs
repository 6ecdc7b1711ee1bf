//! Uniform grid layouts for embedded points and the topic-grid analytics
//! built on them.
//!
//! The central piece is [`sd::split_diffuse`], which moves an embedded point
//! cloud onto an integer lattice, one point per cell, by recursive
//! capacity-balanced median splits. Around it:
//!
//! - [`embedding`]: distances, classical MDS and embedding import,
//! - [`metrics`]: overlap, density and order/distance preservation scores,
//! - [`topic_grids`]: activity and risk grids plus curtain/shower time stacks,
//! - [`ingest`]: event parsing, windowing and a synthetic scenario generator.

pub mod cloud;
pub mod embedding;
pub mod ingest;
pub mod metrics;
pub mod sd;
pub mod topic_grids;

pub use cloud::{CloudError, GridShape, Point, PointCloud};
pub use sd::{resolve_cell, sd_1d, split_diffuse, GridAssignment, SdError, SplitPath};
