//! Neighbor search, voxel compaction and observed-space bookkeeping.

pub mod coverage;
pub mod kdtree;
pub mod voxel;

pub use coverage::{build_coverage, CoverageGrid};
pub use kdtree::{squared_distance, KdIndex, Neighbor};
pub use voxel::{cell_of, downsample_points, voxel_downsample, CellKey, VoxelGrid};

use crate::error::Result;
use crate::model::Point3;

pub fn build_index(points: Vec<Point3>) -> Result<KdIndex> {
    KdIndex::build(points)
}
