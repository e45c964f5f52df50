//! Automatic clustering of image pixels and point data with mussels
//! wandering optimization.
//!
//! The number of clusters is not an input: every candidate solution carries
//! `k_max` centers with an activation gate each, and the search settles on
//! the active subset that minimizes the balanced within/between
//! sum-of-squares ratio.

pub mod bench;
pub mod cli;
pub mod codec;
pub mod engine;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod fitness;
pub mod model;
pub mod rng;
pub mod synthetic;

pub use codec::{RenderStyle, ResultManifest, RgbImage};
pub use engine::{run, ClusteringResult, ConvergenceTrace, MwoConfig};
pub use error::{Error, Result};
pub use evaluation::{db_index, DbParams};
pub use features::FeatureMode;
pub use model::{FeatureDataset, Matrix, Partition, SearchBounds};
