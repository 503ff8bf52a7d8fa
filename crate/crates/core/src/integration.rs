//! Depth image fusion and incremental frontier maintenance.
//!
//! A frontier voxel is a free voxel (p < 0.5) with at least one face
//! neighbour that was never observed. Only voxels touched by the latest
//! integration and their face neighbours can change frontier status, so
//! [`update_frontiers`] re-tests exactly that set.

use alloc::vec::Vec;

use crate::camera::CameraModel;
use crate::mav::MavState;
use crate::morton::MortonCode;
use crate::octree::{OccupancyOctree, VoxelCoord};
use crate::raycast::VoxelTraversal;

/// Depth samples are ranges along the pixel ray, not z-depth.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub camera: CameraModel,
    /// Row-major, `width * height` entries. [`DepthImage::INVALID`] marks
    /// pixels without a return.
    pub ranges: Vec<f64>,
}

impl DepthImage {
    pub const INVALID: f64 = 0.0;

    pub fn new(camera: CameraModel) -> Self {
        Self {
            ranges: alloc::vec![Self::INVALID; camera.pixel_count()],
            camera,
        }
    }

    pub fn width(&self) -> u32 {
        self.camera.width
    }

    pub fn height(&self) -> u32 {
        self.camera.height
    }

    pub fn get(&self, u: u32, v: u32) -> f64 {
        self.ranges[(v * self.camera.width + u) as usize]
    }

    pub fn set(&mut self, u: u32, v: u32, range: f64) {
        self.ranges[(v * self.camera.width + u) as usize] = range;
    }

    pub fn is_valid(&self, range: f64) -> bool {
        range > 0.0 && range <= self.camera.d_max && range.is_finite()
    }
}

/// Log-odds increments of the inverse sensor model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorModel {
    pub l_hit: f32,
    pub l_miss: f32,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            l_hit: 0.85,
            l_miss: -0.4,
        }
    }
}

/// Voxels touched by one integration, as sorted unique voxel Morton codes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UpdatedVoxels {
    codes: Vec<MortonCode>,
}

impl UpdatedVoxels {
    pub fn from_codes(mut codes: Vec<MortonCode>) -> Self {
        codes.sort_unstable();
        codes.dedup();
        Self { codes }
    }

    pub fn codes(&self) -> &[MortonCode] {
        &self.codes
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn voxels(&self) -> impl Iterator<Item = VoxelCoord> + '_ {
        self.codes.iter().map(|&c| OccupancyOctree::voxel_from_code(c))
    }
}

/// Fuses one posed depth image. Voxels traversed by a ray before its return
/// get `l_miss`, the voxel just behind the returned surface gets `l_hit`.
/// Pixels without a return clear space up to `d_max`. Rays stop where they
/// leave the map. Cached node maxima are refreshed before returning.
pub fn integrate_depth(
    map: &mut OccupancyOctree,
    pose: &MavState,
    image: &DepthImage,
    model: &SensorModel,
) -> UpdatedVoxels {
    let r = map.resolution();
    let origin = map.world_to_grid(pose.position);
    // Pushes the end point just past the surface, into the solid voxel.
    let nudge = 1e-3;
    let cam = &image.camera;
    let mut touched = Vec::new();
    for v in 0..cam.height {
        for u in 0..cam.width {
            let range = image.get(u, v);
            let dir = cam.pixel_direction(u, v, pose.yaw);
            let hit = image.is_valid(range);
            let t_end = if hit { range / r + nudge } else { cam.d_max / r };
            let mut steps = VoxelTraversal::new(origin, dir, t_end).peekable();
            while let Some(step) = steps.next() {
                let Some(code) = map.voxel_code(step.voxel) else {
                    break;
                };
                let last = steps.peek().is_none();
                let delta = if hit && last { model.l_hit } else { model.l_miss };
                map.apply_log_odds(step.voxel, delta);
                touched.push(code);
            }
        }
    }
    map.propagate_pending();
    UpdatedVoxels::from_codes(touched)
}

/// Free voxel with at least one unobserved (or out-of-map) face neighbour.
/// With a frontier domain set, both voxels must lie inside it: unknown space
/// outside the exploration bounds is not there to be explored.
pub fn is_frontier(map: &OccupancyOctree, v: VoxelCoord) -> bool {
    if !map.is_observed(v) || map.get_occupancy(v) >= 0.5 || !map.in_frontier_domain(v) {
        return false;
    }
    v.face_neighbours()
        .iter()
        .any(|&n| !map.is_observed(n) && map.in_frontier_domain(n))
}

/// Morton-sorted codes of blocks holding at least one frontier voxel.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrontierList {
    codes: Vec<MortonCode>,
}

impl FrontierList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn codes(&self) -> &[MortonCode] {
        &self.codes
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn contains(&self, code: MortonCode) -> bool {
        self.codes.binary_search(&code).is_ok()
    }

    fn insert(&mut self, code: MortonCode) {
        if let Err(at) = self.codes.binary_search(&code) {
            self.codes.insert(at, code);
        }
    }

    fn remove(&mut self, code: MortonCode) {
        if let Ok(at) = self.codes.binary_search(&code) {
            self.codes.remove(at);
        }
    }
}

/// Re-tests the frontier flag of every updated voxel and of each of their
/// face neighbours, keeping block counts and `frontiers` in sync.
pub fn update_frontiers(map: &mut OccupancyOctree, frontiers: &mut FrontierList, updated: &UpdatedVoxels) {
    let mut candidates: Vec<MortonCode> = Vec::with_capacity(updated.len() * 3);
    for v in updated.voxels() {
        candidates.extend(map.voxel_code(v));
        for n in v.face_neighbours() {
            candidates.extend(map.voxel_code(n));
        }
    }
    candidates.sort_unstable();
    candidates.dedup();
    for code in candidates {
        let v = OccupancyOctree::voxel_from_code(code);
        let flag = is_frontier(map, v);
        if let Some((block, before, after)) = map.set_frontier(v, flag) {
            if before == 0 && after > 0 {
                frontiers.insert(block);
            } else if before > 0 && after == 0 {
                frontiers.remove(block);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;

    fn camera(w: u32, h: u32) -> CameraModel {
        CameraModel {
            width: w,
            height: h,
            fov_h: 90f64.to_radians(),
            fov_v: 60f64.to_radians(),
            d_max: 5.0,
            mount_pitch: 0.0,
        }
    }

    fn map() -> OccupancyOctree {
        OccupancyOctree::new(0.1, 128, Vec3::ZERO).unwrap()
    }

    #[test]
    fn empty_image_changes_nothing() {
        let mut m = map();
        let img = DepthImage::new(camera(0, 0));
        let pose = MavState::new(Vec3::splat(3.0), 0.0);
        let up = integrate_depth(&mut m, &pose, &img, &SensorModel::default());
        assert!(up.is_empty());
        assert_eq!(m.observed_count(), 0);
    }

    #[test]
    fn single_ray_hit_and_misses() {
        let mut m = map();
        let mut img = DepthImage::new(camera(1, 1));
        img.set(0, 0, 2.0);
        // Voxel centre origin.
        let pose = MavState::new(Vec3::new(1.05, 3.05, 3.05), 0.0);
        let up = integrate_depth(&mut m, &pose, &img, &SensorModel::default());
        // Start voxel x=10 through the voxel containing x = 3.05 (index 30).
        assert_eq!(up.len(), 21);
        let row = |x| VoxelCoord::new(x, 30, 30);
        assert!(m.get_occupancy(row(30)) > 0.5);
        for x in 10..30 {
            assert!(m.get_occupancy(row(x)) < 0.5, "x={x}");
        }
        assert!(!m.is_observed(row(31)));
    }

    #[test]
    fn invalid_pixels_clear_to_max_range() {
        let mut m = map();
        let img = DepthImage::new(camera(4, 3));
        let pose = MavState::new(Vec3::new(1.05, 6.05, 6.05), 0.0);
        let up = integrate_depth(&mut m, &pose, &img, &SensorModel::default());
        assert!(!up.is_empty());
        assert!(up.voxels().all(|v| m.get_occupancy(v) < 0.5));
    }

    #[test]
    fn frontier_predicate() {
        let mut m = map();
        let v = VoxelCoord::new(10, 10, 10);
        m.apply_log_odds(v, crate::octree::logit(0.3) as f32);
        assert!(is_frontier(&m, v));
        for n in v.face_neighbours() {
            m.apply_log_odds(n, -1.0);
        }
        assert!(!is_frontier(&m, v));
        let w = VoxelCoord::new(20, 20, 20);
        m.apply_log_odds(w, crate::octree::logit(0.6) as f32);
        assert!(!is_frontier(&m, w));
        // Net-zero evidence is not free.
        let z = VoxelCoord::new(30, 30, 30);
        m.apply_log_odds(z, 0.0);
        assert!(!is_frontier(&m, z));
    }

    #[test]
    fn map_edge_voxels_are_frontiers() {
        let mut m = map();
        let v = VoxelCoord::new(0, 5, 5);
        m.apply_log_odds(v, -1.0);
        for n in v.face_neighbours() {
            if m.in_bounds(n) {
                m.apply_log_odds(n, -1.0);
            }
        }
        assert!(is_frontier(&m, v));
    }
}
