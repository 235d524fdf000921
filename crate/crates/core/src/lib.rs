//! Exploration and visual-inspection planning for multi-compartment
//! confined spaces, plus a deterministic simulation harness.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod exploration;
pub mod geometry;
pub mod graph;
pub mod harness;
pub mod gvi;
pub mod mission;
pub mod sensors;
pub mod sim;
pub mod tsp;
pub mod voxel_map;

pub use geometry::{Aabb, Configuration, Vec3};
pub use sensors::{GainEvaluator, RobotBox, SensorKind, SensorModel};
pub use voxel_map::{
    CoverageStats, EsdfSample, MapError, Occupancy, OccupancyCounts, ScanDelta, ScanReturn,
    VoxelMap, VoxelState,
};
