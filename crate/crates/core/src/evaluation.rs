//! Candidate view scoring: binary Shannon entropy of voxels along a sparse
//! 360° ray grid, sliding-window yaw selection, travel-time estimate and the
//! gain-over-time utility.

use alloc::vec::Vec;
use core::f64::consts::{LN_2, TAU};

use crate::geometry::Vec3;
use crate::mav::{shortest_angle, wrap_angle};
use crate::octree::OccupancyOctree;
use crate::planning::Path;
use crate::raycast::VoxelTraversal;
use crate::sampling::CandidateSource;

/// Travel times are floored here so the utility of a pose that needs no
/// motion stays finite.
pub const MIN_TRAVEL_TIME: f64 = 0.1;

/// `-p ln p - (1-p) ln(1-p)` in nats, with `0 ln 0 = 0`.
pub fn voxel_entropy(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * libm::log(q) };
    term(p) + term(1.0 - p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayEntropy {
    /// Sum of voxel entropies before the first occupied voxel (nats).
    pub entropy: f64,
    /// Distance at which the first voxel with p > 0.5 is entered.
    pub hit: Option<f64>,
}

/// Walks voxels from `origin` along unit `dir`, summing entropy until the
/// first voxel with p > 0.5 (excluded, its entry distance is the hit) or
/// until `d_max`. Rays stop contributing where they leave the world
/// ([`OccupancyOctree::in_world`]).
pub fn ray_entropy(map: &OccupancyOctree, origin: Vec3, dir: Vec3, d_max: f64) -> RayEntropy {
    let r = map.resolution();
    let mut entropy = 0.0;
    if !map.in_world(map.world_to_voxel(origin)) {
        return RayEntropy { entropy, hit: None };
    }
    for step in VoxelTraversal::new(map.world_to_grid(origin), dir, d_max / r) {
        if !map.in_world(step.voxel) {
            break;
        }
        let p = map.get_occupancy(step.voxel);
        if p > 0.5 {
            return RayEntropy {
                entropy,
                hit: Some(step.t_entry * r),
            };
        }
        entropy += voxel_entropy(p);
    }
    RayEntropy { entropy, hit: None }
}

/// Angular layout of the sparse raycast.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaycastParams {
    /// Yaw increment between columns (rad).
    pub yaw_step: f64,
    /// Pitch increment between rows (rad).
    pub pitch_step: f64,
    pub fov_v: f64,
    /// Camera mount pitch; rows are centred on it.
    pub mount_pitch: f64,
    pub d_max: f64,
}

impl RaycastParams {
    /// 96 columns and 8 rows.
    pub fn with_defaults(fov_v: f64, mount_pitch: f64, d_max: f64) -> Self {
        Self {
            yaw_step: TAU / 96.0,
            pitch_step: fov_v / 8.0,
            fov_v,
            mount_pitch,
            d_max,
        }
    }

    pub fn columns(&self) -> usize {
        ceil_count(TAU / self.yaw_step)
    }

    pub fn rows(&self) -> usize {
        ceil_count(self.fov_v / self.pitch_step)
    }

    pub fn column_yaw(&self, j: usize) -> f64 {
        j as f64 * self.yaw_step
    }

    /// Rows split the vertical field of view evenly, sampling cell centres.
    pub fn row_pitch(&self, k: usize) -> f64 {
        let m = self.rows() as f64;
        self.mount_pitch - self.fov_v * 0.5 + (k as f64 + 0.5) * self.fov_v / m
    }

    pub fn direction(&self, j: usize, k: usize) -> Vec3 {
        let (sy, cy) = libm::sincos(self.column_yaw(j));
        let (sp, cp) = libm::sincos(self.row_pitch(k));
        Vec3::new(cp * cy, cp * sy, sp)
    }
}

// Ceil that ignores rounding noise such as 2π / (2π/96) = 96.00000000000001.
fn ceil_count(x: f64) -> usize {
    (libm::ceil(x - 1e-9) as usize).max(1)
}

/// Per-ray entropy sums, `rows × columns`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyImage {
    pub columns: usize,
    pub rows: usize,
    pub yaw_step: f64,
    pub values: Vec<f64>,
}

impl EntropyImage {
    pub fn get(&self, column: usize, row: usize) -> f64 {
        self.values[row * self.columns + column]
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = alloc::vec![0.0; self.columns];
        for row in 0..self.rows {
            for (j, s) in sums.iter_mut().enumerate() {
                *s += self.values[row * self.columns + j];
            }
        }
        sums
    }
}

/// Ray hit distances matching an [`EntropyImage`]; `None` where no occupied
/// voxel was met within range.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage360 {
    pub columns: usize,
    pub rows: usize,
    pub ranges: Vec<Option<f64>>,
}

pub fn raycast_entropy_360(
    map: &OccupancyOctree,
    position: Vec3,
    params: &RaycastParams,
) -> (EntropyImage, DepthImage360) {
    let (n, m) = (params.columns(), params.rows());
    let mut values = Vec::with_capacity(n * m);
    let mut ranges = Vec::with_capacity(n * m);
    for k in 0..m {
        for j in 0..n {
            let ray = ray_entropy(map, position, params.direction(j, k), params.d_max);
            values.push(ray.entropy);
            ranges.push(ray.hit);
        }
    }
    (
        EntropyImage {
            columns: n,
            rows: m,
            yaw_step: params.yaw_step,
            values,
        },
        DepthImage360 {
            columns: n,
            rows: m,
            ranges,
        },
    )
}

/// Half width, in columns, of the sliding window for a horizontal field of
/// view: the window spans columns `j - h ..= j + h` with `h = ⌈α_h/δψ⌉ / 2`.
pub fn window_half_width(columns: usize, yaw_step: f64, fov_h: f64) -> usize {
    let w = ceil_count(fov_h / yaw_step);
    (w / 2).min(columns.saturating_sub(1) / 2)
}

/// Best yaw for a sensor of horizontal field of view `fov_h`: the column
/// whose circular window of column sums is largest, smallest index on ties.
/// Returns `(yaw, gain)`.
pub fn optimal_yaw(image: &EntropyImage, fov_h: f64) -> (f64, f64) {
    best_window(image, fov_h, |_| true).expect("image has columns")
}

/// [`optimal_yaw`] restricted to yaws at least `min_turn` away from `yaw`.
pub fn optimal_turn(image: &EntropyImage, fov_h: f64, yaw: f64, min_turn: f64) -> Option<(f64, f64)> {
    best_window(image, fov_h, |y| shortest_angle(yaw, y).abs() >= min_turn)
}

fn best_window(image: &EntropyImage, fov_h: f64, allowed: impl Fn(f64) -> bool) -> Option<(f64, f64)> {
    let n = image.columns;
    let sums = image.column_sums();
    let h = window_half_width(n, image.yaw_step, fov_h);
    let mut best: Option<(f64, f64)> = None;
    for j in 0..n {
        let yaw = wrap_angle(j as f64 * image.yaw_step);
        if !allowed(yaw) {
            continue;
        }
        let mut g = 0.0;
        for o in 0..=2 * h {
            g += sums[(j + n + o - h) % n];
        }
        if best.map_or(true, |(_, b)| g > b) {
            best = Some((yaw, g));
        }
    }
    best
}

/// `max(length / v_max, |Δψ| / ω_max)`, floored at [`MIN_TRAVEL_TIME`].
pub fn travel_time(path: &Path, yaw_start: f64, yaw_end: f64, v_max: f64, w_max: f64) -> f64 {
    let move_t = path.length() / v_max;
    let turn_t = shortest_angle(yaw_start, yaw_end).abs() / w_max;
    move_t.max(turn_t).max(MIN_TRAVEL_TIME)
}

pub fn utility(gain: f64, time: f64) -> f64 {
    gain / time
}

/// Yaw for every interior waypoint from its own 360° raycast; the first and
/// last waypoints keep `yaw_start` and `yaw_end`.
pub fn assign_intermediate_yaws(
    map: &OccupancyOctree,
    path: &Path,
    yaw_start: f64,
    yaw_end: f64,
    params: &RaycastParams,
    fov_h: f64,
) -> Path {
    let n = path.len();
    let yaws = (0..n)
        .map(|i| {
            if i + 1 == n {
                yaw_end
            } else if i == 0 {
                yaw_start
            } else {
                let (image, _) = raycast_entropy_360(map, path.waypoints()[i], params);
                optimal_yaw(&image, fov_h).0
            }
        })
        .collect();
    path.clone().with_yaws(yaws)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePose {
    pub position: Vec3,
    pub yaw: f64,
    /// Windowed entropy visible from the pose (nats).
    pub gain: f64,
    pub travel_time: f64,
    /// `gain / travel_time` (nats/s).
    pub utility: f64,
    pub path: Path,
    pub source: CandidateSource,
    pub images: Option<(EntropyImage, DepthImage360)>,
}

pub struct ViewParams {
    pub raycast: RaycastParams,
    pub fov_h: f64,
    pub v_max: f64,
    pub w_max: f64,
}

/// Scores the pose at the end of `path`.
pub fn evaluate_candidate(
    map: &OccupancyOctree,
    path: Path,
    current_yaw: f64,
    source: CandidateSource,
    view: &ViewParams,
    keep_images: bool,
) -> CandidatePose {
    let (image, depth) = raycast_entropy_360(map, path.end(), &view.raycast);
    let (yaw, gain) = optimal_yaw(&image, view.fov_h);
    scored(path, current_yaw, yaw, gain, source, view, keep_images.then_some((image, depth)))
}

/// Scores an in-place rotation at `position` to the best yaw at least
/// `min_turn` away from `current_yaw`.
pub fn evaluate_turn(
    map: &OccupancyOctree,
    position: Vec3,
    current_yaw: f64,
    min_turn: f64,
    view: &ViewParams,
    keep_images: bool,
) -> Option<CandidatePose> {
    let (image, depth) = raycast_entropy_360(map, position, &view.raycast);
    let (yaw, gain) = optimal_turn(&image, view.fov_h, current_yaw, min_turn)?;
    Some(scored(
        Path::stationary(position),
        current_yaw,
        yaw,
        gain,
        CandidateSource::CurrentPose,
        view,
        keep_images.then_some((image, depth)),
    ))
}

fn scored(
    path: Path,
    current_yaw: f64,
    yaw: f64,
    gain: f64,
    source: CandidateSource,
    view: &ViewParams,
    images: Option<(EntropyImage, DepthImage360)>,
) -> CandidatePose {
    let t = travel_time(&path, current_yaw, yaw, view.v_max, view.w_max);
    CandidatePose {
        position: path.end(),
        yaw,
        gain,
        travel_time: t,
        utility: utility(gain, t),
        path,
        source,
        images,
    }
}

/// Upper bound of any single ray's entropy, at ln 2 per voxel. A ray of
/// length `L` crosses at most `⌊L|d_i|/r⌋ + 1` faces per axis, so it visits
/// at most `4 + √3·L/r` voxels.
pub fn max_ray_entropy(d_max: f64, resolution: f64) -> f64 {
    (libm::floor(libm::sqrt(3.0) * d_max / resolution) + 4.0) * LN_2
}
