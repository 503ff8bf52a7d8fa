#![allow(dead_code)]

use octoexplore_core::integration::{integrate_depth, update_frontiers};
use octoexplore_core::octree::VoxelCoord;
use octoexplore_core::{Aabb, CameraModel, DepthImage, FrontierList, MavState, OccupancyOctree, SensorModel, UpdatedVoxels, Vec3};
use rand::Rng;

/// Box world for tests: solid obstacles inside closed bounds.
pub struct BoxWorld {
    pub bounds: Aabb,
    pub boxes: Vec<Aabb>,
}

impl BoxWorld {
    pub fn random<R: Rng>(rng: &mut R, bounds: Aabb, n: usize) -> Self {
        let size = bounds.size();
        let boxes = (0..n)
            .map(|_| {
                let c = Vec3::new(
                    bounds.min.x + rng.random::<f64>() * size.x,
                    bounds.min.y + rng.random::<f64>() * size.y,
                    bounds.min.z + rng.random::<f64>() * size.z,
                );
                let half = Vec3::new(
                    rng.random_range(0.2..1.0),
                    rng.random_range(0.2..1.0),
                    rng.random_range(0.2..1.5),
                );
                Aabb::new(c - half, c + half)
            })
            .collect();
        Self { bounds, boxes }
    }

    pub fn is_solid(&self, p: Vec3) -> bool {
        !self.bounds.contains(p) || self.boxes.iter().any(|b| b.contains(p))
    }

    /// Clearance-respecting random free point.
    pub fn free_point<R: Rng>(&self, rng: &mut R, margin: f64) -> Vec3 {
        let size = self.bounds.size();
        loop {
            let p = Vec3::new(
                self.bounds.min.x + rng.random::<f64>() * size.x,
                self.bounds.min.y + rng.random::<f64>() * size.y,
                self.bounds.min.z + rng.random::<f64>() * size.z,
            );
            let inner = self.bounds.inflated(-margin);
            if inner.contains(p) && self.boxes.iter().all(|b| b.inflated(margin).distance_squared_to_point(p) > 0.0) {
                return p;
            }
        }
    }

    /// First surface along the ray: entry into a box or exit from the bounds.
    pub fn cast(&self, origin: Vec3, dir: Vec3) -> f64 {
        let mut t = self.bounds.ray_interval(origin, dir).map_or(0.0, |(_, t1)| t1.max(0.0));
        for b in &self.boxes {
            if let Some((t0, t1)) = b.ray_interval(origin, dir) {
                if t1 >= 0.0 && t0 >= 0.0 && t0 < t {
                    t = t0;
                }
            }
        }
        t
    }

    pub fn render(&self, camera: CameraModel, pose: &MavState) -> DepthImage {
        let mut img = DepthImage::new(camera);
        for v in 0..camera.height {
            for u in 0..camera.width {
                let t = self.cast(pose.position, camera.pixel_direction(u, v, pose.yaw));
                if t <= camera.d_max {
                    img.set(u, v, t);
                }
            }
        }
        img
    }
}

pub fn camera(width: u32, height: u32) -> CameraModel {
    CameraModel {
        width,
        height,
        fov_h: 90f64.to_radians(),
        fov_v: 60f64.to_radians(),
        d_max: 5.0,
        mount_pitch: -15f64.to_radians(),
    }
}

pub fn integrate(
    map: &mut OccupancyOctree,
    frontiers: &mut FrontierList,
    world: &BoxWorld,
    camera: CameraModel,
    pose: &MavState,
) -> UpdatedVoxels {
    let img = world.render(camera, pose);
    let updated = integrate_depth(map, pose, &img, &SensorModel::default());
    update_frontiers(map, frontiers, &updated);
    updated
}

/// Sets voxels to a log-odds value and refreshes frontier flags.
pub fn paint(map: &mut OccupancyOctree, frontiers: &mut FrontierList, voxels: &[VoxelCoord], l: f32) {
    let mut codes = Vec::new();
    for &v in voxels {
        let cur = map.log_odds(v).unwrap_or(0.0);
        map.apply_log_odds(v, l - cur);
        codes.extend(map.voxel_code(v));
    }
    map.propagate_pending();
    update_frontiers(map, frontiers, &UpdatedVoxels::from_codes(codes));
}

/// Every voxel with its minimum corner inside `[lo, hi)` (grid indices).
pub fn voxel_box(lo: [i32; 3], hi: [i32; 3]) -> Vec<VoxelCoord> {
    let mut out = Vec::new();
    for z in lo[2]..hi[2] {
        for y in lo[1]..hi[1] {
            for x in lo[0]..hi[0] {
                out.push(VoxelCoord::new(x, y, z));
            }
        }
    }
    out
}
