//! Pinhole depth camera rigidly mounted on the MAV body.
//!
//! Body frame: x forward along the yaw heading, z up. The camera is pitched
//! about the body y axis by `mount_pitch` (negative looks down).

use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub width: u32,
    pub height: u32,
    /// Horizontal field of view (rad).
    pub fov_h: f64,
    /// Vertical field of view (rad).
    pub fov_v: f64,
    /// Maximum range (m).
    pub d_max: f64,
    pub mount_pitch: f64,
}

impl CameraModel {
    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Unit direction of the ray through the centre of pixel `(u, v)`, with
    /// `u` growing to the right and `v` growing downwards.
    pub fn pixel_direction(&self, u: u32, v: u32, yaw: f64) -> Vec3 {
        let a = (2.0 * (u as f64 + 0.5) / self.width as f64 - 1.0) * libm::tan(self.fov_h * 0.5);
        let b = (1.0 - 2.0 * (v as f64 + 0.5) / self.height as f64) * libm::tan(self.fov_v * 0.5);
        let (forward, left, up) = self.axes(yaw);
        (forward - left * a + up * b).normalized()
    }

    /// Optical axis, left and up unit vectors of the camera frame.
    pub fn axes(&self, yaw: f64) -> (Vec3, Vec3, Vec3) {
        let (sy, cy) = libm::sincos(yaw);
        let (sp, cp) = libm::sincos(self.mount_pitch);
        let heading = Vec3::new(cy, sy, 0.0);
        let world_up = Vec3::new(0.0, 0.0, 1.0);
        let forward = heading * cp + world_up * sp;
        let up = world_up * cp - heading * sp;
        let left = Vec3::new(-sy, cy, 0.0);
        (forward, left, up)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam(w: u32, h: u32) -> CameraModel {
        CameraModel {
            width: w,
            height: h,
            fov_h: 90f64.to_radians(),
            fov_v: 60f64.to_radians(),
            d_max: 5.0,
            mount_pitch: 0.0,
        }
    }

    #[test]
    fn single_pixel_looks_forward() {
        let d = cam(1, 1).pixel_direction(0, 0, 0.0);
        assert!((d - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
        let d = cam(1, 1).pixel_direction(0, 0, core::f64::consts::FRAC_PI_2);
        assert!((d - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn rays_stay_inside_frustum() {
        let c = cam(64, 48);
        for v in 0..48 {
            for u in 0..64 {
                let d = c.pixel_direction(u, v, 0.0);
                let yaw = libm::atan2(d.y, d.x).abs();
                let pitch = libm::atan2(d.z, d.x).abs();
                assert!(yaw < c.fov_h / 2.0 && pitch < c.fov_v / 2.0);
            }
        }
    }

    #[test]
    fn left_pixels_point_left_and_pitch_tilts_down() {
        let c = cam(3, 3);
        assert!(c.pixel_direction(0, 1, 0.0).y > 0.0);
        assert!(c.pixel_direction(1, 0, 0.0).z > 0.0);
        let tilted = CameraModel { mount_pitch: -0.3, ..cam(1, 1) };
        let d = tilted.pixel_direction(0, 0, 0.0);
        assert!((libm::asin(d.z) + 0.3).abs() < 1e-12);
    }
}
