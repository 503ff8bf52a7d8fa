//! Collision checking against the occupancy octree and informed RRT*
//! path planning with shortcut simplification.
//!
//! Only space known to be free is traversable: unobserved voxels read 0.5
//! and fail the `< 0.5` test, as does anything outside the map.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Vec3};
use crate::octree::{OccupancyOctree, Region};

/// Polyline in ℝ³, optionally with a yaw per waypoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    waypoints: Vec<Vec3>,
    yaws: Option<Vec<f64>>,
    length: f64,
}

impl Path {
    /// Builds a path, dropping consecutive duplicate waypoints.
    pub fn new(points: impl IntoIterator<Item = Vec3>) -> Self {
        let mut waypoints: Vec<Vec3> = Vec::new();
        for p in points {
            if waypoints.last().is_none_or(|&q| q != p) {
                waypoints.push(p);
            }
        }
        let length = polyline_length(&waypoints);
        Self {
            waypoints,
            yaws: None,
            length,
        }
    }

    /// Single-waypoint path used for the in-place rotation candidate.
    pub fn stationary(p: Vec3) -> Self {
        Self::new([p])
    }

    pub fn waypoints(&self) -> &[Vec3] {
        &self.waypoints
    }

    pub fn yaws(&self) -> Option<&[f64]> {
        self.yaws.as_deref()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn start(&self) -> Vec3 {
        self.waypoints[0]
    }

    pub fn end(&self) -> Vec3 {
        *self.waypoints.last().expect("path has waypoints")
    }

    pub fn is_stationary(&self) -> bool {
        self.waypoints.len() < 2
    }

    /// Attaches one yaw per waypoint.
    pub fn with_yaws(mut self, yaws: Vec<f64>) -> Self {
        assert_eq!(yaws.len(), self.waypoints.len(), "one yaw per waypoint");
        self.yaws = Some(yaws);
        self
    }

    pub fn segments(&self) -> impl Iterator<Item = (Vec3, Vec3)> + '_ {
        self.waypoints.windows(2).map(|w| (w[0], w[1]))
    }
}

fn polyline_length(points: &[Vec3]) -> f64 {
    points.windows(2).map(|w| w[0].distance(w[1])).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig {
    /// Maximum extension per RRT* step (m).
    pub step_size: f64,
    /// Distance to the goal counted as reaching it; `None` = one voxel.
    pub goal_tolerance: Option<f64>,
    /// Farthest a truncated endpoint may lie from the goal; `None` = 2R.
    pub near_tolerance: Option<f64>,
    pub max_iterations: usize,
    /// Iterations spent improving after the first solution.
    pub post_solution_iterations: usize,
    /// Rewiring radius is `min(gamma·(ln n / n)^(1/3), max_rewire_radius)`.
    pub rewire_gamma: f64,
    pub max_rewire_radius: f64,
    /// Probability of sampling the goal directly.
    pub goal_bias: f64,
    /// Random shortcut attempts during simplification.
    pub simplification_passes: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            step_size: 0.5,
            goal_tolerance: None,
            near_tolerance: None,
            max_iterations: 2000,
            post_solution_iterations: 200,
            rewire_gamma: 3.0,
            max_rewire_radius: 1.0,
            goal_bias: 0.1,
            simplification_passes: 30,
        }
    }
}

/// Sphere of radius `radius` at `p` touches only free voxels. The bounding
/// cube is tried first since the hierarchy often clears it outright.
pub fn collision_free_point(map: &OccupancyOctree, p: Vec3, radius: f64) -> bool {
    map.is_free(&Region::Box(Aabb::around(p, radius)))
        || map.is_free(&Region::Sphere { center: p, radius })
}

/// Swept sphere along `[a, b]` (cylinder plus end caps) touches only free
/// voxels.
pub fn collision_free_segment(map: &OccupancyOctree, a: Vec3, b: Vec3, radius: f64) -> bool {
    if a == b {
        return collision_free_point(map, a, radius);
    }
    map.is_free(&Region::Capsule { a, b, radius })
}

/// Every waypoint and segment passes the collision checks.
pub fn path_is_collision_free(map: &OccupancyOctree, path: &Path, radius: f64) -> bool {
    path.waypoints().iter().all(|&p| collision_free_point(map, p, radius))
        && path
            .segments()
            .all(|(a, b)| collision_free_segment(map, a, b, radius))
}

struct Node {
    pos: Vec3,
    parent: usize,
    cost: f64,
    children: Vec<usize>,
}

const ROOT: usize = usize::MAX;

struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn nearest(&self, p: Vec3) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, n) in self.nodes.iter().enumerate() {
            let d = (n.pos - p).norm_squared();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    fn within(&self, p: Vec3, radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| (n.pos - p).norm_squared() <= r2)
            .map(|(i, _)| i)
            .collect()
    }

    fn reparent(&mut self, child: usize, parent: usize, cost: f64) {
        let old = self.nodes[child].parent;
        if old != ROOT {
            self.nodes[old].children.retain(|&c| c != child);
        }
        self.nodes[parent].children.push(child);
        self.nodes[child].parent = parent;
        let delta = cost - self.nodes[child].cost;
        let mut stack = alloc::vec![child];
        while let Some(i) = stack.pop() {
            self.nodes[i].cost += delta;
            stack.extend(self.nodes[i].children.iter().copied());
        }
    }

    fn path_to(&self, mut i: usize) -> Vec<Vec3> {
        let mut pts = Vec::new();
        while i != ROOT {
            pts.push(self.nodes[i].pos);
            i = self.nodes[i].parent;
        }
        pts.reverse();
        pts
    }
}

/// Uniform sample from the prolate spheroid with foci `a`, `b` whose
/// transverse diameter is `c_best`.
fn sample_informed<R: Rng + ?Sized>(a: Vec3, b: Vec3, c_best: f64, rng: &mut R) -> Vec3 {
    let c_min = a.distance(b);
    let center = (a + b) * 0.5;
    let axis = if c_min > 0.0 { (b - a) / c_min } else { Vec3::new(1.0, 0.0, 0.0) };
    let helper = if axis.x.abs() < 0.9 { Vec3::new(1.0, 0.0, 0.0) } else { Vec3::new(0.0, 1.0, 0.0) };
    let e2 = axis.cross(helper).normalized();
    let e3 = axis.cross(e2);
    let r1 = c_best * 0.5;
    let r2 = libm::sqrt((c_best * c_best - c_min * c_min).max(0.0)) * 0.5;
    let ball = loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if v.norm_squared() <= 1.0 {
            break v;
        }
    };
    center + axis * (ball.x * r1) + e2 * (ball.y * r2) + e3 * (ball.z * r2)
}

fn sample_uniform<R: Rng + ?Sized>(domain: &Aabb, rng: &mut R) -> Vec3 {
    let u = |lo: f64, hi: f64, rng: &mut R| if hi > lo { rng.random_range(lo..hi) } else { lo };
    Vec3::new(
        u(domain.min.x, domain.max.x, rng),
        u(domain.min.y, domain.max.y, rng),
        u(domain.min.z, domain.max.z, rng),
    )
}

/// Plans a collision-free path from `start` towards `goal`.
///
/// The tree grows inside the bounding box of observed space (clipped to
/// `bounds`). Once a node within `near_tolerance` of the goal exists,
/// sampling switches to the informed spheroid and the search stops after
/// `post_solution_iterations` more iterations. A node within
/// `goal_tolerance` counts as reaching the goal; otherwise the path ends at
/// the node nearest to the goal, which is how goals on the frontier (next to
/// unknown space, hence never collision-free themselves) are approached.
/// Such a goal already within `near_tolerance` of `start` is a failure, as
/// is a tree whose best endpoint is the root. The result is
/// shortcut-simplified and re-verified.
pub fn plan_path<R: Rng + ?Sized>(
    map: &OccupancyOctree,
    start: Vec3,
    goal: Vec3,
    radius: f64,
    bounds: &Aabb,
    cfg: &PlannerConfig,
    rng: &mut R,
) -> Result<Path> {
    if !collision_free_point(map, start, radius) {
        return Err(Error::StartInCollision);
    }
    let goal_tol = cfg.goal_tolerance.unwrap_or(map.resolution());
    let near_tol = cfg.near_tolerance.unwrap_or(2.0 * radius);
    let domain = map
        .observed_bounds()
        .and_then(|b| b.intersection(bounds))
        .ok_or(Error::PlanningFailed)?;

    let goal_free = collision_free_point(map, goal, radius);
    if start.distance(goal) > goal_tol && goal_free && collision_free_segment(map, start, goal, radius) {
        return Ok(Path::new([start, goal]));
    }
    if !goal_free && start.distance(goal) <= near_tol {
        // Already as close as the frontier case asks; there is nowhere to go.
        return Err(Error::PlanningFailed);
    }

    let mut tree = Tree {
        nodes: alloc::vec![Node {
            pos: start,
            parent: ROOT,
            cost: 0.0,
            children: Vec::new(),
        }],
    };
    let mut solved_at: Option<usize> = None;
    let mut best: Option<usize> = None;
    let c_min = start.distance(goal);
    let solution_cost = |tree: &Tree, i: usize| tree.nodes[i].cost + tree.nodes[i].pos.distance(goal);

    for iter in 0..cfg.max_iterations {
        if solved_at.is_some_and(|s| iter - s >= cfg.post_solution_iterations) {
            break;
        }
        let sample = if rng.random::<f64>() < cfg.goal_bias {
            goal
        } else if let Some(b) = best {
            let c_best = solution_cost(&tree, b);
            let mut s = None;
            for _ in 0..8 {
                let p = sample_informed(start, goal, c_best.max(c_min), rng);
                if domain.contains(p) {
                    s = Some(p);
                    break;
                }
            }
            s.unwrap_or_else(|| sample_uniform(&domain, rng))
        } else {
            sample_uniform(&domain, rng)
        };

        let nearest = tree.nearest(sample);
        let from = tree.nodes[nearest].pos;
        let d = from.distance(sample);
        if d < 1e-9 {
            continue;
        }
        let mut new = if d > cfg.step_size { from.lerp(sample, cfg.step_size / d) } else { sample };
        let mut ok = false;
        for _ in 0..4 {
            if collision_free_point(map, new, radius) && collision_free_segment(map, from, new, radius) {
                ok = true;
                break;
            }
            new = from.lerp(new, 0.5);
            if from.distance(new) < map.resolution() {
                break;
            }
        }
        if !ok {
            continue;
        }

        let n = tree.nodes.len() as f64 + 1.0;
        let rewire_radius = (cfg.rewire_gamma * libm::cbrt(libm::log(n) / n)).min(cfg.max_rewire_radius);
        let near = tree.within(new, rewire_radius);

        let mut parents: Vec<(f64, usize)> = near
            .iter()
            .chain(core::iter::once(&nearest).filter(|i| !near.contains(i)))
            .map(|&i| (tree.nodes[i].cost + tree.nodes[i].pos.distance(new), i))
            .collect();
        parents.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut chosen = None;
        for &(_, i) in &parents {
            if i == nearest || collision_free_segment(map, tree.nodes[i].pos, new, radius) {
                chosen = Some(i);
                break;
            }
        }
        let Some(parent) = chosen else { continue };
        let cost = tree.nodes[parent].cost + tree.nodes[parent].pos.distance(new);
        let id = tree.nodes.len();
        tree.nodes.push(Node {
            pos: new,
            parent,
            cost,
            children: Vec::new(),
        });
        tree.nodes[parent].children.push(id);

        for &j in &near {
            if j == parent {
                continue;
            }
            let via = cost + new.distance(tree.nodes[j].pos);
            if via + 1e-12 < tree.nodes[j].cost
                && collision_free_segment(map, new, tree.nodes[j].pos, radius)
            {
                tree.reparent(j, id, via);
            }
        }

        if new.distance(goal) <= near_tol {
            solved_at.get_or_insert(iter);
        }
        best = select_endpoint(&tree, goal, goal_tol, near_tol);
    }

    let end = best.ok_or(Error::PlanningFailed)?;
    if end == 0 {
        return Err(Error::PlanningFailed);
    }
    let mut points = tree.path_to(end);
    let last = *points.last().expect("non-empty");
    if last.distance(goal) <= goal_tol
        && collision_free_point(map, goal, radius)
        && collision_free_segment(map, last, goal, radius)
    {
        points.push(goal);
    }
    let path = simplify_path(map, &Path::new(points), radius, cfg.simplification_passes, rng);
    if path.is_stationary() || !path_is_collision_free(map, &path, radius) {
        return Err(Error::PlanningFailed);
    }
    Ok(path)
}

/// Cheapest node within `goal_tol` of the goal if any, else the node nearest
/// to the goal within `near_tol`.
fn select_endpoint(tree: &Tree, goal: Vec3, goal_tol: f64, near_tol: f64) -> Option<usize> {
    let mut exact: Option<(f64, usize)> = None;
    let mut near: Option<(f64, f64, usize)> = None;
    for (i, n) in tree.nodes.iter().enumerate() {
        let d = n.pos.distance(goal);
        if d <= goal_tol {
            let c = n.cost + d;
            if exact.is_none_or(|(bc, _)| c < bc) {
                exact = Some((c, i));
            }
        } else if d <= near_tol && near.is_none_or(|(bd, bc, _)| (d, n.cost) < (bd, bc)) {
            near = Some((d, n.cost, i));
        }
    }
    exact.map(|e| e.1).or(near.map(|n| n.2))
}

/// Shortcut simplification: greedy vertex skipping, random shortcuts between
/// points on different segments, then greedy skipping again. A shortcut is
/// kept only if collision-free and strictly shorter, so length never grows.
pub fn simplify_path<R: Rng + ?Sized>(
    map: &OccupancyOctree,
    path: &Path,
    radius: f64,
    passes: usize,
    rng: &mut R,
) -> Path {
    let mut pts = path.waypoints().to_vec();
    if pts.len() < 3 {
        return path.clone();
    }
    greedy_reduce(map, &mut pts, radius);
    for _ in 0..passes {
        let segs = pts.len() - 1;
        if segs < 2 {
            break;
        }
        let mut i = rng.random_range(0..segs);
        let mut j = rng.random_range(0..segs);
        if i == j {
            continue;
        }
        if i > j {
            core::mem::swap(&mut i, &mut j);
        }
        let a = pts[i].lerp(pts[i + 1], rng.random::<f64>());
        let b = pts[j].lerp(pts[j + 1], rng.random::<f64>());
        let mut candidate = Vec::with_capacity(pts.len() + 2);
        candidate.extend_from_slice(&pts[..=i]);
        candidate.push(a);
        candidate.push(b);
        candidate.extend_from_slice(&pts[j + 1..]);
        candidate.dedup();
        if polyline_length(&candidate) < polyline_length(&pts) - 1e-12
            && collision_free_segment(map, a, b, radius)
        {
            pts = candidate;
        }
    }
    greedy_reduce(map, &mut pts, radius);
    let simplified = Path::new(pts);
    if simplified.length() <= path.length() {
        simplified
    } else {
        path.clone()
    }
}

fn greedy_reduce(map: &OccupancyOctree, pts: &mut Vec<Vec3>, radius: f64) {
    if pts.len() < 3 {
        return;
    }
    let mut out = alloc::vec![pts[0]];
    let mut i = 0;
    while i < pts.len() - 1 {
        let mut j = pts.len() - 1;
        while j > i + 1 && !collision_free_segment(map, pts[i], pts[j], radius) {
            j -= 1;
        }
        out.push(pts[j]);
        i = j;
    }
    *pts = out;
}
