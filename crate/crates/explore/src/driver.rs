//! The closed loop: fly the committed path while integrating frames at the
//! sensor rate, plan when the path is done, stop when no frontiers remain.

use std::time::{Duration, Instant};

use log::{debug, info, warn};
use octoexplore_core::evaluation::{CandidatePose, RaycastParams};
use octoexplore_core::exploration::{plan_iteration, CompletionReason, ExplorationParams, PlanOutcome};
use octoexplore_core::integration::{integrate_depth, update_frontiers, UpdatedVoxels};
use octoexplore_core::mav::MavState;
use octoexplore_core::planning::collision_free_point;
use octoexplore_core::{Aabb, FrontierList, OccupancyOctree, Path, Vec3, VoxelCoord};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::export::{MetricsLog, MetricsSample};
use crate::scenario::{ExplorationConfig, Scenario};
use crate::world::{step_mav, WorldModel};

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("start pose {position:?} is in collision: clearance {clearance:.3} m < safety radius {radius} m")]
    StartInCollision { position: [f64; 3], clearance: f64, radius: f64 },
    #[error("map setup failed: {0}")]
    Map(#[from] octoexplore_core::Error),
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Wall-clock limit.
    pub timeout: Option<Duration>,
    /// Write measured plan times into the metrics log. Off gives logs that
    /// are byte-identical across runs with the same seed.
    pub record_timing: bool,
    /// Keep the 360° images of each chosen candidate.
    pub keep_images: bool,
    /// Keep every control-step state.
    pub record_trajectory: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Complete(CompletionReason),
    WallClockTimeout,
    SimTimeLimit,
}

impl RunStatus {
    pub fn is_complete(self) -> bool {
        matches!(self, RunStatus::Complete(_))
    }
}

#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub t: f64,
    pub plan_time_ms: f64,
    pub retries: usize,
    pub candidates: usize,
    pub reachable: usize,
    /// `None` for the final, completing iteration.
    pub chosen: Option<CandidatePose>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub status: RunStatus,
    pub metrics: MetricsLog,
    pub map: OccupancyOctree,
    pub frontiers: FrontierList,
    pub iterations: Vec<IterationRecord>,
    /// Executed paths, with the yaws they were flown with.
    pub paths: Vec<Path>,
    pub trajectory: Vec<MavState>,
    pub final_state: MavState,
    pub sim_time: f64,
    /// Control steps whose position failed the collision check against the
    /// map of that moment.
    pub safety_violations: usize,
    /// Smallest true distance to any surface seen at a control step.
    pub min_clearance: f64,
}

impl RunResult {
    /// Planning times of every iteration, in ms.
    pub fn plan_times_ms(&self) -> Vec<f64> {
        self.iterations.iter().map(|i| i.plan_time_ms).collect()
    }

    /// The run ended because no frontier candidate was reachable after all
    /// resampling rounds.
    pub fn retry_guard_fired(&self) -> bool {
        self.status == RunStatus::Complete(CompletionReason::Unreachable)
    }

    /// Iterations that had to resample at least once.
    pub fn resampled_iterations(&self) -> usize {
        self.iterations.iter().filter(|i| i.retries > 0).count()
    }
}

/// Where the vehicle centre may go: whole voxels inside the world bounds,
/// shrunk by the safety radius. Keeps the safety sphere off voxels that an
/// off-grid bounds face cuts through.
pub fn flight_box(map: &OccupancyOctree, world: &WorldModel, radius: f64) -> Aabb {
    map.grid_interior(&world.bounds).inflated(-radius)
}

pub fn exploration_params(cfg: &ExplorationConfig, flight: Aabb) -> ExplorationParams {
    let m = &cfg.mav;
    ExplorationParams {
        n_candidates: cfg.n_candidates,
        min_frontier_voxels: cfg.min_frontier_voxels,
        safety_radius: m.safety_radius,
        v_max: m.v_max,
        w_max: m.w_max,
        fov_h: m.fov_h,
        raycast: RaycastParams::with_defaults(m.fov_v, m.mount_pitch, m.d_max),
        planner: cfg.planner,
        bounds: flight,
        random_phase: cfg.random_phase,
        max_retries: cfg.max_retries,
        keep_images: false,
    }
}

/// Marks as free every voxel lying wholly in free space within `half_width`
/// of the start. The vehicle has just taken off through this space. Without
/// it the pitched camera, which never sees straight up or down, leaves the
/// safety sphere no known-free room to move into.
fn clear_start_region(map: &mut OccupancyOctree, world: &WorldModel, start: &MavState, half_width: f64, l_miss: f32) -> UpdatedVoxels {
    let r = map.resolution();
    let region = Aabb::around(start.position, half_width);
    let lo = map.world_to_voxel(region.min);
    let hi = map.world_to_voxel(region.max);
    let overlaps = |a: &Aabb, b: &Aabb| a.intersection(b).is_some_and(|i| !i.is_degenerate());
    let mut codes = Vec::new();
    for z in lo.z..=hi.z {
        for y in lo.y..=hi.y {
            for x in lo.x..=hi.x {
                let v = VoxelCoord::new(x, y, z);
                let min = map.voxel_min_corner(v);
                let cube = Aabb::new(min, min + Vec3::splat(r));
                let inside = world.bounds.contains(cube.min) && world.bounds.contains(cube.max);
                if !overlaps(&cube, &region) || !inside || world.obstacles.iter().any(|o| overlaps(&cube, o)) {
                    continue;
                }
                if let Some(code) = map.voxel_code(v) {
                    map.apply_log_odds(v, l_miss);
                    codes.push(code);
                }
            }
        }
    }
    map.propagate_pending();
    UpdatedVoxels::from_codes(codes)
}

struct Sim<'a> {
    world: &'a WorldModel,
    cfg: &'a ExplorationConfig,
    opts: &'a RunOptions,
    map: OccupancyOctree,
    frontiers: FrontierList,
    state: MavState,
    step: u64,
    steps_per_frame: u64,
    frames: u64,
    iteration: usize,
    last_plan_ms: f64,
    metrics: MetricsLog,
    trajectory: Vec<MavState>,
    safety_violations: usize,
    min_clearance: f64,
    noise_rng: ChaCha8Rng,
    started: Instant,
}

impl Sim<'_> {
    fn t(&self) -> f64 {
        self.step as f64 * self.cfg.control_dt
    }

    fn integrate(&mut self) {
        let camera = self.cfg.mav.camera();
        let noise = (self.cfg.mav.range_noise > 0.0).then_some((self.cfg.mav.range_noise, &mut self.noise_rng));
        let image = self.world.render_depth(&self.state, &camera, noise);
        let updated = integrate_depth(&mut self.map, &self.state, &image, &self.cfg.sensor);
        update_frontiers(&mut self.map, &mut self.frontiers, &updated);
        self.frames += 1;
        let t = self.t();
        self.metrics.push(MetricsSample {
            t,
            explored_volume: self.map.explored_volume(),
            frontier_blocks: self.frontiers.len(),
            iteration: self.iteration,
            plan_time_ms: if self.opts.record_timing { self.last_plan_ms } else { 0.0 },
        });
    }

    fn out_of_time(&self) -> Option<RunStatus> {
        if self.opts.timeout.is_some_and(|limit| self.started.elapsed() > limit) {
            return Some(RunStatus::WallClockTimeout);
        }
        (self.t() > self.cfg.max_sim_time).then_some(RunStatus::SimTimeLimit)
    }

    /// One control step towards the target; integrates when a frame is due.
    fn advance(&mut self, target: Vec3, yaw: f64) {
        self.state = step_mav(&self.state, target, yaw, self.cfg.control_dt, &self.cfg.mav);
        self.step += 1;
        if self.opts.record_trajectory {
            self.trajectory.push(self.state);
        }
        let radius = self.cfg.mav.safety_radius;
        if !collision_free_point(&self.map, self.state.position, radius) {
            self.safety_violations += 1;
        }
        self.min_clearance = self.min_clearance.min(self.world.clearance(self.state.position));
        if self.step % self.steps_per_frame == 0 {
            self.integrate();
        }
    }

    /// Flies `path` to its end. Returns early only when out of time.
    fn follow(&mut self, path: &Path) -> Option<RunStatus> {
        let yaws = path.yaws().expect("chosen path carries yaws");
        let skip = usize::from(path.len() > 1);
        for (&wp, &yaw) in path.waypoints().iter().zip(yaws).skip(skip) {
            while self.state.position != wp || self.state.yaw != MavState::new(wp, yaw).yaw {
                self.advance(wp, yaw);
                if let Some(s) = self.out_of_time() {
                    return Some(s);
                }
            }
        }
        None
    }
}

/// Runs a scenario to completion or until a time limit.
pub fn run_exploration(scenario: &Scenario, opts: &RunOptions) -> Result<RunResult, DriverError> {
    let cfg = &scenario.config;
    let world = &scenario.world;
    let radius = cfg.mav.safety_radius;
    let clearance = world.clearance(scenario.start.position);
    if clearance < radius {
        return Err(DriverError::StartInCollision {
            position: scenario.start.position.to_array(),
            clearance,
            radius,
        });
    }
    let map = OccupancyOctree::covering(&world.bounds, cfg.resolution)?.with_clamp(cfg.l_min, cfg.l_max);
    let flight = flight_box(&map, world, radius);
    let map = map.with_frontier_bounds(&flight);
    let mut params = exploration_params(cfg, flight);
    params.keep_images = opts.keep_images;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    noise_rng.set_stream(1);

    let mut sim = Sim {
        world,
        cfg,
        opts,
        map,
        frontiers: FrontierList::new(),
        state: scenario.start,
        step: 0,
        steps_per_frame: ((1.0 / (cfg.sensor_rate_hz * cfg.control_dt)).round() as u64).max(1),
        frames: 0,
        iteration: 0,
        last_plan_ms: 0.0,
        metrics: MetricsLog::new(),
        trajectory: Vec::new(),
        safety_violations: 0,
        min_clearance: clearance,
        noise_rng,
        started: Instant::now(),
    };
    let seeded = clear_start_region(&mut sim.map, world, &scenario.start, cfg.start_clearance.max(radius), cfg.sensor.l_miss);
    update_frontiers(&mut sim.map, &mut sim.frontiers, &seeded);
    sim.integrate();

    let mut iterations = Vec::new();
    let mut paths = Vec::new();
    let status = loop {
        if let Some(s) = sim.out_of_time() {
            break s;
        }
        let t0 = Instant::now();
        let outcome = plan_iteration(&sim.map, &sim.frontiers, &sim.state, &params, &mut rng);
        let plan_ms = t0.elapsed().as_secs_f64() * 1e3;
        sim.iteration += 1;
        sim.last_plan_ms = plan_ms;
        let report = outcome.report();
        let mut record = IterationRecord {
            t: sim.t(),
            plan_time_ms: plan_ms,
            retries: report.retries,
            candidates: report.candidates_sampled,
            reachable: report.paths_found,
            chosen: None,
        };
        if report.retries > 0 {
            warn!("iteration {}: no reachable candidate, resampled {} time(s)", sim.iteration, report.retries);
        }
        match outcome {
            PlanOutcome::Complete { reason, .. } => {
                if reason == CompletionReason::Unreachable {
                    warn!("frontiers remain but none is reachable; stopping");
                }
                iterations.push(record);
                break RunStatus::Complete(reason);
            }
            PlanOutcome::Goal { chosen, .. } => {
                debug!(
                    "iteration {} t={:.2}s: goal {:?} yaw {:.2} gain {:.2} time {:.2}s ({:.1} ms)",
                    sim.iteration,
                    sim.t(),
                    chosen.position.to_array(),
                    chosen.yaw,
                    chosen.gain,
                    chosen.travel_time,
                    plan_ms
                );
                let path = chosen.path.clone();
                record.chosen = Some(chosen);
                iterations.push(record);
                let frames_before = sim.frames;
                if let Some(s) = sim.follow(&path) {
                    paths.push(path);
                    break s;
                }
                paths.push(path);
                // Plan again only on fresh data.
                while sim.frames == frames_before {
                    let (p, y) = (sim.state.position, sim.state.yaw);
                    sim.advance(p, y);
                }
            }
        }
    };
    info!(
        "finished after {} iterations, {:.1} s simulated, explored {:.2} m³ ({:?})",
        sim.iteration,
        sim.t(),
        sim.map.explored_volume(),
        status
    );
    Ok(RunResult {
        status,
        sim_time: sim.t(),
        final_state: sim.state,
        metrics: sim.metrics,
        map: sim.map,
        frontiers: sim.frontiers,
        iterations,
        paths,
        trajectory: sim.trajectory,
        safety_violations: sim.safety_violations,
        min_clearance: sim.min_clearance,
    })
}
