//! Lifelong LiDAR mapping with local and global ephemerality.
//!
//! Sessions are cleaned of dynamic objects with per-session (local)
//! ephemerality, aligned onto the lifelong map, and merged with cross-session
//! (global) ephemerality updates that also emit a replayable delta map.

pub mod alignment;
pub mod belief;
pub mod config;
pub mod error;
pub mod eval;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod removal;
pub mod spatial;
pub mod synth;
pub mod update;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use model::{AttributedPoint, AttributedPointCloud, Point3, Pose, Scan, Session};
