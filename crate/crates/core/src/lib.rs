//! Inter-frame uncertainty based active learning for sequential LiDAR
//! semantic segmentation.
//!
//! The engine consumes externally produced per-point class probabilities,
//! scores every region of every frame by how consistently it is predicted
//! across neighbouring frames, and picks regions for annotation and for
//! pseudo-labeling. A synthetic harness closes the loop without a network.

pub mod baselines;
pub mod config;
pub mod correspondence;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod regions;
pub mod registration;
pub mod scene;
pub mod selection;
pub mod uncertainty;

pub use config::EngineConfig;
pub use error::{Error, Result};
