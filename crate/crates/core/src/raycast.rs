//! Exact voxel traversal (Amanatides & Woo) in grid units.
//!
//! Grid units put voxel `(i, j, k)` at `[i, i+1) × [j, j+1) × [k, k+1)`.
//! Every voxel whose interior the segment `origin + t·dir, t ∈ [0, t_end)`
//! passes through is yielded exactly once, in order, together with the
//! parameter at which the ray enters it.

use crate::geometry::Vec3;
use crate::octree::VoxelCoord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraversalStep {
    pub voxel: VoxelCoord,
    /// Ray parameter at which the voxel is entered (0 for the start voxel).
    pub t_entry: f64,
    pub t_exit: f64,
}

#[derive(Debug, Clone)]
pub struct VoxelTraversal {
    voxel: [i32; 3],
    step: [i32; 3],
    t_max: [f64; 3],
    t_delta: [f64; 3],
    t: f64,
    t_end: f64,
    done: bool,
}

impl VoxelTraversal {
    /// `dir` need not be normalised; `t_end` is in units of `dir`.
    pub fn new(origin: Vec3, dir: Vec3, t_end: f64) -> Self {
        let o = origin.to_array();
        let d = dir.to_array();
        let mut voxel = [0i32; 3];
        let mut step = [0i32; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for a in 0..3 {
            let cell = libm::floor(o[a]);
            voxel[a] = cell as i32;
            if d[a] > 0.0 {
                step[a] = 1;
                t_delta[a] = 1.0 / d[a];
                t_max[a] = (cell + 1.0 - o[a]) / d[a];
            } else if d[a] < 0.0 {
                step[a] = -1;
                t_delta[a] = -1.0 / d[a];
                t_max[a] = (cell - o[a]) / d[a];
            }
        }
        Self {
            voxel,
            step,
            t_max,
            t_delta,
            t: 0.0,
            t_end,
            done: !(t_end > 0.0) || !origin.is_finite(),
        }
    }
}

impl Iterator for VoxelTraversal {
    type Item = TraversalStep;

    fn next(&mut self) -> Option<TraversalStep> {
        if self.done || self.t >= self.t_end {
            return None;
        }
        let axis = if self.t_max[0] < self.t_max[1] {
            if self.t_max[0] < self.t_max[2] {
                0
            } else {
                2
            }
        } else if self.t_max[1] < self.t_max[2] {
            1
        } else {
            2
        };
        let exit = self.t_max[axis];
        let out = TraversalStep {
            voxel: VoxelCoord::new(self.voxel[0], self.voxel[1], self.voxel[2]),
            t_entry: self.t,
            t_exit: exit.min(self.t_end),
        };
        if exit.is_infinite() {
            self.done = true;
        } else {
            self.voxel[axis] += self.step[axis];
            self.t = exit;
            self.t_max[axis] += self.t_delta[axis];
        }
        Some(out)
    }
}
