//! One planning iteration: sample, plan, score, select.

use alloc::vec::Vec;

use rand::Rng;

use crate::evaluation::{assign_intermediate_yaws, evaluate_candidate, evaluate_turn, CandidatePose, RaycastParams, ViewParams};
use crate::geometry::Aabb;
use crate::integration::FrontierList;
use crate::mav::MavState;
use crate::octree::OccupancyOctree;
use crate::planning::{plan_path, Path, PlannerConfig};
use crate::sampling::{filter_frontier_blocks, sample_candidates};

#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationParams {
    /// Candidates sampled per iteration, excluding the current pose.
    pub n_candidates: usize,
    /// Frontier blocks with fewer frontier voxels are ignored.
    pub min_frontier_voxels: u32,
    pub safety_radius: f64,
    pub v_max: f64,
    pub w_max: f64,
    pub fov_h: f64,
    pub raycast: RaycastParams,
    pub planner: PlannerConfig,
    /// Exploration bounds; candidates outside are discarded and planning is
    /// confined to them.
    pub bounds: Aabb,
    pub random_phase: bool,
    /// Resampling rounds when no frontier candidate is reachable.
    pub max_retries: usize,
    /// Keep the 360° images of every evaluated candidate.
    pub keep_images: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompletionReason {
    /// The filtered frontier list is empty.
    NoFrontiers,
    /// Frontiers remain but none was reachable after all retries.
    Unreachable,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationReport {
    pub filtered_blocks: usize,
    pub candidates_sampled: usize,
    pub paths_found: usize,
    pub retries: usize,
    /// Every scored candidate, in evaluation order.
    pub evaluated: Vec<CandidatePose>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanOutcome {
    Goal {
        /// Winning candidate; its path carries one yaw per waypoint.
        chosen: CandidatePose,
        report: IterationReport,
    },
    Complete {
        reason: CompletionReason,
        report: IterationReport,
    },
}

impl PlanOutcome {
    pub fn report(&self) -> &IterationReport {
        match self {
            PlanOutcome::Goal { report, .. } | PlanOutcome::Complete { report, .. } => report,
        }
    }
}

/// Index of the highest utility, first one on ties.
pub fn select_best(candidates: &[CandidatePose]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        if best.is_none_or(|b| c.utility > candidates[b].utility) {
            best = Some(i);
        }
    }
    best
}

/// Samples candidates from the frontiers, plans to each, scores every
/// reachable one and returns the best with yaws on its interior waypoints.
///
/// The current pose is scored as an in-place rotation to the best yaw at
/// least half a field of view away: the current view has already been
/// integrated, and staying on it would stall the loop. When nothing is left to choose,
/// fresh samples (random stride phase) are drawn up to `max_retries` times
/// before giving up.
pub fn plan_iteration<R: Rng + ?Sized>(
    map: &OccupancyOctree,
    frontiers: &FrontierList,
    state: &MavState,
    params: &ExplorationParams,
    rng: &mut R,
) -> PlanOutcome {
    let filtered = filter_frontier_blocks(frontiers, map, params.min_frontier_voxels);
    let mut report = IterationReport {
        filtered_blocks: filtered.len(),
        ..Default::default()
    };
    if filtered.is_empty() {
        return PlanOutcome::Complete {
            reason: CompletionReason::NoFrontiers,
            report,
        };
    }
    let view = ViewParams {
        raycast: params.raycast,
        fov_h: params.fov_h,
        v_max: params.v_max,
        w_max: params.w_max,
    };

    for attempt in 0..=params.max_retries {
        report.retries = attempt;
        let set = sample_candidates(
            &filtered,
            map,
            params.n_candidates,
            state,
            params.random_phase || attempt > 0,
            rng,
        );
        let mut scored: Vec<CandidatePose> = Vec::new();
        for c in set.from_frontiers() {
            report.candidates_sampled += 1;
            if !params.bounds.contains(c.position) {
                continue;
            }
            let Ok(path) = plan_path(
                map,
                state.position,
                c.position,
                params.safety_radius,
                &params.bounds,
                &params.planner,
                rng,
            ) else {
                continue;
            };
            report.paths_found += 1;
            scored.push(evaluate_candidate(map, path, state.yaw, c.source, &view, params.keep_images));
        }

        scored.extend(evaluate_turn(
            map,
            state.position,
            state.yaw,
            params.fov_h * 0.5,
            &view,
            params.keep_images,
        ));
        if scored.is_empty() {
            continue;
        }

        let best = select_best(&scored).expect("non-empty");
        let mut chosen = scored[best].clone();
        chosen.path = with_yaws(map, &chosen.path, state.yaw, chosen.yaw, &params.raycast, params.fov_h);
        report.evaluated = scored;
        return PlanOutcome::Goal { chosen, report };
    }
    PlanOutcome::Complete {
        reason: CompletionReason::Unreachable,
        report,
    }
}

fn with_yaws(map: &OccupancyOctree, path: &Path, yaw_start: f64, yaw_end: f64, raycast: &RaycastParams, fov_h: f64) -> Path {
    if path.is_stationary() {
        return path.clone().with_yaws(alloc::vec![yaw_end]);
    }
    assign_intermediate_yaws(map, path, yaw_start, yaw_end, raycast, fov_h)
}
