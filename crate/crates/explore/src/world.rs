//! Ground truth: box worlds, the simulated depth camera and kinematic motion.

use std::collections::VecDeque;

use octoexplore_core::camera::CameraModel;
use octoexplore_core::mav::{shortest_angle, MavState};
use octoexplore_core::{Aabb, DepthImage, Vec3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("bounds are degenerate")]
    DegenerateBounds,
    #[error("obstacle {0} is degenerate or lies outside the bounds")]
    BadObstacle(usize),
    #[error("start {0:?} is inside an obstacle or outside the bounds")]
    StartInObstacle([f64; 3]),
}

/// Exploration box whose six faces are solid, plus solid box obstacles.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldModel {
    pub bounds: Aabb,
    pub obstacles: Vec<Aabb>,
}

impl WorldModel {
    pub fn new(bounds: Aabb, obstacles: Vec<Aabb>) -> Result<Self, WorldError> {
        if bounds.is_degenerate() {
            return Err(WorldError::DegenerateBounds);
        }
        for (i, o) in obstacles.iter().enumerate() {
            if o.is_degenerate() || o.intersection(&bounds).is_none_or(|b| b.is_degenerate()) {
                return Err(WorldError::BadObstacle(i));
            }
        }
        Ok(Self { bounds, obstacles })
    }

    /// Inside an obstacle or outside the bounds. Boxes are half-open,
    /// `[min, max)`, matching voxel-centre classification.
    pub fn is_solid(&self, p: Vec3) -> bool {
        !half_open_contains(&self.bounds, p) || self.obstacles.iter().any(|o| half_open_contains(o, p))
    }

    /// Distance from `p` to the nearest solid surface; 0 inside solid.
    pub fn clearance(&self, p: Vec3) -> f64 {
        let b = &self.bounds;
        if !b.contains(p) {
            return 0.0;
        }
        let mut d = (p.x - b.min.x)
            .min(b.max.x - p.x)
            .min(p.y - b.min.y)
            .min(b.max.y - p.y)
            .min(p.z - b.min.z)
            .min(b.max.z - p.z);
        for o in &self.obstacles {
            d = d.min(o.distance_squared_to_point(p).sqrt());
        }
        d
    }

    /// Distance to the first surface along the unit ray, `None` beyond
    /// `d_max`. A ray starting inside solid returns 0.
    pub fn ray_intersect(&self, origin: Vec3, dir: Vec3, d_max: f64) -> Option<f64> {
        let Some((_, exit)) = self.bounds.ray_interval(origin, dir).filter(|_| self.bounds.contains(origin)) else {
            return Some(0.0);
        };
        let mut best = exit;
        for o in &self.obstacles {
            if o.contains_strict(origin) {
                return Some(0.0);
            }
            if let Some((t0, _)) = o.ray_interval(origin, dir) {
                best = best.min(t0);
            }
        }
        (best <= d_max).then_some(best)
    }

    /// Renders a range image. `noise` adds zero-mean Gaussian range noise of
    /// the given standard deviation to every return.
    pub fn render_depth<R: Rng + ?Sized>(
        &self,
        pose: &MavState,
        camera: &CameraModel,
        noise: Option<(f64, &mut R)>,
    ) -> DepthImage {
        let mut img = DepthImage::new(*camera);
        let mut noise = noise.map(|(sigma, rng)| (Normal::new(0.0, sigma).expect("finite sigma"), rng));
        for v in 0..camera.height {
            for u in 0..camera.width {
                let dir = camera.pixel_direction(u, v, pose.yaw);
                let Some(mut d) = self.ray_intersect(pose.position, dir, camera.d_max) else {
                    continue;
                };
                if let Some((dist, rng)) = noise.as_mut() {
                    d = (d + dist.sample(&mut **rng)).clamp(1e-6, camera.d_max);
                }
                img.set(u, v, d);
            }
        }
        img
    }

    /// Volume of the free voxels 6-connected to the start voxel, on a grid of
    /// resolution `r` aligned like the occupancy map (one voxel of margin
    /// below `bounds.min`). Bounds faces are treated as infinitely thin.
    pub fn observable_volume(&self, start: Vec3, r: f64) -> Result<f64, WorldError> {
        Ok(self.observable_voxels(start, r)?.free.len() as f64 * r * r * r)
    }

    /// Flood fill behind [`WorldModel::observable_volume`]. Also returns the
    /// shell: solid voxels face-adjacent to the reached free space, i.e. the
    /// surfaces a sensor inside it can strike. Coordinates are map voxel
    /// indices.
    pub fn observable_voxels(&self, start: Vec3, r: f64) -> Result<ObservableVoxels, WorldError> {
        let origin = self.bounds.min - Vec3::splat(r);
        let size = self.bounds.size();
        let dims = [
            (size.x / r - 1e-9).ceil() as i32 + 2,
            (size.y / r - 1e-9).ceil() as i32 + 2,
            (size.z / r - 1e-9).ceil() as i32 + 2,
        ];
        let idx = |v: [i32; 3]| ((v[2] as usize * dims[1] as usize) + v[1] as usize) * dims[0] as usize + v[0] as usize;
        let center = |v: [i32; 3]| origin + Vec3::new(v[0] as f64 + 0.5, v[1] as f64 + 0.5, v[2] as f64 + 0.5) * r;
        let g = ((start - origin) / r).map(f64::floor);
        let s = [g.x as i32, g.y as i32, g.z as i32];
        let inside = |v: [i32; 3]| (0..3).all(|a| v[a] >= 0 && v[a] < dims[a]);
        if !inside(s) || self.is_solid(center(s)) {
            return Err(WorldError::StartInObstacle(start.to_array()));
        }

        // 0 = unvisited, 1 = reached free, 2 = shell.
        let mut state = vec![0u8; dims.iter().map(|&d| d as usize).product()];
        let mut queue = VecDeque::from([s]);
        state[idx(s)] = 1;
        let mut out = ObservableVoxels::default();
        const STEPS: [[i32; 3]; 6] = [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]];
        while let Some(v) = queue.pop_front() {
            out.free.push(v);
            for d in STEPS {
                let n = [v[0] + d[0], v[1] + d[1], v[2] + d[2]];
                if !inside(n) || state[idx(n)] != 0 {
                    continue;
                }
                if self.is_solid(center(n)) {
                    state[idx(n)] = 2;
                    out.shell.push(n);
                } else {
                    state[idx(n)] = 1;
                    queue.push_back(n);
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ObservableVoxels {
    pub free: Vec<[i32; 3]>,
    pub shell: Vec<[i32; 3]>,
}

fn half_open_contains(b: &Aabb, p: Vec3) -> bool {
    p.x >= b.min.x && p.x < b.max.x && p.y >= b.min.y && p.y < b.max.y && p.z >= b.min.z && p.z < b.max.z
}

/// Vehicle, camera and sensor limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MavConfig {
    pub v_max: f64,
    pub w_max: f64,
    pub safety_radius: f64,
    pub mount_pitch: f64,
    pub fov_h: f64,
    pub fov_v: f64,
    pub d_max: f64,
    pub image_width: u32,
    pub image_height: u32,
    /// Standard deviation of range noise (m); 0 disables it.
    pub range_noise: f64,
}

impl Default for MavConfig {
    fn default() -> Self {
        Self {
            v_max: 1.5,
            w_max: 0.75,
            safety_radius: 0.5,
            mount_pitch: (-15f64).to_radians(),
            fov_h: 90f64.to_radians(),
            fov_v: 60f64.to_radians(),
            d_max: 5.0,
            image_width: 64,
            image_height: 48,
            range_noise: 0.0,
        }
    }
}

impl MavConfig {
    pub fn camera(&self) -> CameraModel {
        CameraModel {
            width: self.image_width,
            height: self.image_height,
            fov_h: self.fov_h,
            fov_v: self.fov_v,
            d_max: self.d_max,
            mount_pitch: self.mount_pitch,
        }
    }
}

/// One kinematic step towards `(target, target_yaw)`: straight-line motion
/// at up to `v_max` and rotation along the shorter arc at up to `w_max`,
/// both stopping exactly on the target.
pub fn step_mav(state: &MavState, target: Vec3, target_yaw: f64, dt: f64, cfg: &MavConfig) -> MavState {
    let to = target - state.position;
    let dist = to.norm();
    let max_step = cfg.v_max * dt;
    let position = if dist <= max_step { target } else { state.position + to * (max_step / dist) };
    let dyaw = shortest_angle(state.yaw, target_yaw);
    let max_turn = cfg.w_max * dt;
    let yaw = if dyaw.abs() <= max_turn {
        target_yaw
    } else {
        state.yaw + max_turn.copysign(dyaw)
    };
    MavState::new(position, yaw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn room() -> WorldModel {
        WorldModel::new(Aabb::new(Vec3::ZERO, Vec3::new(10.0, 10.0, 3.0)), vec![]).unwrap()
    }

    #[test]
    fn perpendicular_and_oblique_walls() {
        let w = room();
        let p = Vec3::new(7.0, 5.0, 1.5);
        assert!((w.ray_intersect(p, Vec3::new(1.0, 0.0, 0.0), 5.0).unwrap() - 3.0).abs() < 1e-12);
        let d = Vec3::new(1.0, 1.0, 0.0).normalized();
        let q = Vec3::new(7.0, 2.0, 1.5);
        assert!((w.ray_intersect(q, d, 5.0).unwrap() - 3.0 * 2f64.sqrt()).abs() < 1e-9);
        assert_eq!(w.ray_intersect(Vec3::new(1.0, 5.0, 1.5), Vec3::new(1.0, 0.0, 0.0), 5.0), None);
    }

    #[test]
    fn inside_obstacle_is_zero() {
        let w = WorldModel::new(room().bounds, vec![Aabb::new(Vec3::splat(1.0), Vec3::splat(2.0))]).unwrap();
        assert_eq!(w.ray_intersect(Vec3::splat(1.5), Vec3::new(0.0, 0.0, 1.0), 5.0), Some(0.0));
    }

    #[test]
    fn degenerate_inputs_rejected() {
        let b = Aabb::new(Vec3::ZERO, Vec3::new(1.0, 1.0, 0.0));
        assert_eq!(WorldModel::new(b, vec![]), Err(WorldError::DegenerateBounds));
        let outside = Aabb::new(Vec3::splat(20.0), Vec3::splat(21.0));
        assert_eq!(WorldModel::new(room().bounds, vec![outside]), Err(WorldError::BadObstacle(0)));
    }

    #[test]
    fn kinematic_step() {
        let cfg = MavConfig::default();
        let s = MavState::new(Vec3::ZERO, 0.0);
        let n = step_mav(&s, Vec3::new(1.0, 0.0, 0.0), 0.0, 0.1, &cfg);
        assert!((n.position.x - 0.15).abs() < 1e-12);
        let near = step_mav(&s, Vec3::new(0.05, 0.0, 0.0), 0.0, 0.1, &cfg);
        assert_eq!(near.position, Vec3::new(0.05, 0.0, 0.0));
        let turn = step_mav(&s, Vec3::ZERO, 1.5 * PI, 0.1, &cfg);
        assert!((shortest_angle(0.0, turn.yaw) + 0.075).abs() < 1e-12);
    }

    #[test]
    fn observable_open_room() {
        let w = WorldModel::new(Aabb::new(Vec3::ZERO, Vec3::splat(4.0)), vec![]).unwrap();
        let o = w.observable_voxels(Vec3::splat(1.5), 1.0).unwrap();
        assert_eq!(o.free.len(), 64);
        // 6 faces of 4×4.
        assert_eq!(o.shell.len(), 96);
        assert_eq!(w.observable_volume(Vec3::splat(1.5), 1.0).unwrap(), 64.0);
    }
}
