use core::f64::consts::{PI, TAU};

use crate::geometry::Vec3;

/// Position in metres and yaw in `[0, 2π)` about the world z axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MavState {
    pub position: Vec3,
    pub yaw: f64,
}

impl MavState {
    pub fn new(position: Vec3, yaw: f64) -> Self {
        Self {
            position,
            yaw: wrap_angle(yaw),
        }
    }
}

/// Wraps into `[0, 2π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a - TAU * libm::floor(a / TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Signed difference `to - from` along the shorter arc, in `[-π, π)`.
pub fn shortest_angle(from: f64, to: f64) -> f64 {
    let d = wrap_angle(to - from);
    if d >= PI {
        d - TAU
    } else {
        d
    }
}
