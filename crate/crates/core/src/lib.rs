//! Octree occupancy mapping with incremental frontier tracking, and an
//! entropy-over-travel-time next-view planner built on top of it.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! outside world (simulated sensors, scenario files, metrics, the CLI) lives in
//! the `octoexplore` companion crate.
//!
//! Pipeline of one planning iteration, see [`exploration::plan_iteration`]:
//!
//! 1. stride-sample candidate positions from the Morton-sorted frontier list,
//! 2. plan a collision-free path to each candidate (informed RRT*),
//! 3. pick a yaw per candidate from a sparse 360° entropy raycast and score it
//!    by entropy gain over travel time,
//! 4. return the best candidate with yaws attached to its interior waypoints.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod camera;
pub mod error;
pub mod evaluation;
pub mod exploration;
pub mod geometry;
pub mod integration;
pub mod mav;
pub mod morton;
pub mod octree;
pub mod planning;
pub mod raycast;
pub mod sampling;

pub use camera::CameraModel;
pub use error::{Error, Result};
pub use geometry::{Aabb, Vec3};
pub use integration::{DepthImage, FrontierList, SensorModel, UpdatedVoxels};
pub use mav::MavState;
pub use morton::MortonCode;
pub use octree::{OccupancyOctree, VoxelCoord};
pub use planning::{Path, PlannerConfig};
