//! Morton-indexed occupancy octree with 8³ voxel blocks at the leaves.
//!
//! Voxels store clamped log-odds. A voxel that was never observed is flagged
//! as such and reads as probability exactly 0.5; the flag, not the value, is
//! what frontier detection looks at.
//!
//! The inner levels are kept as one hash table per level, keyed by the block
//! Morton code shifted right by `3 * level`. Each entry caches the maximum
//! log-odds over its subtree, with unobserved space counted as 0 (p = 0.5).
//! A node whose cached maximum is below the free threshold therefore
//! guarantees that every voxel below it is free too.

use alloc::vec::Vec;

use hashbrown::HashMap;
use rustc_hash::FxBuildHasher;

use crate::error::{Error, Result};
use crate::geometry::{point_segment_distance_squared, segment_box_distance, Aabb, Vec3};
use crate::morton::MortonCode;

pub const BLOCK_SIDE: i32 = 8;
pub const BLOCK_VOXELS: usize = 512;

/// Free-side clamp. Well-observed free space keeps `H(sigmoid(l_min))` nats
/// per voxel, which summed over a 360° raycast must stay small next to a
/// handful of unknown voxels: at -10 it is 4.5e-4 nats, at -5 it is 0.04.
pub const DEFAULT_L_MIN: f32 = -10.0;
pub const DEFAULT_L_MAX: f32 = 5.0;

type FxMap<K, V> = HashMap<K, V, FxBuildHasher>;

/// Integer voxel coordinates. Signed so that neighbours of edge voxels can be
/// expressed; anything outside `[0, map_dim)` reads as unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct VoxelCoord {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl VoxelCoord {
    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        Self { x, y, z }
    }

    pub fn offset(self, dx: i32, dy: i32, dz: i32) -> Self {
        Self::new(self.x + dx, self.y + dy, self.z + dz)
    }

    pub fn face_neighbours(self) -> [VoxelCoord; 6] {
        [
            self.offset(-1, 0, 0),
            self.offset(1, 0, 0),
            self.offset(0, -1, 0),
            self.offset(0, 1, 0),
            self.offset(0, 0, -1),
            self.offset(0, 0, 1),
        ]
    }

    fn block(self) -> (i32, i32, i32) {
        (self.x >> 3, self.y >> 3, self.z >> 3)
    }

    fn local_index(self) -> usize {
        MortonCode::encode_unchecked((self.x & 7) as u32, (self.y & 7) as u32, (self.z & 7) as u32)
            .0 as usize
    }
}

pub fn sigmoid(l: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-l))
}

pub fn logit(p: f64) -> f64 {
    libm::log(p / (1.0 - p))
}

/// One octree leaf: 8×8×8 voxels addressed by local Morton index.
#[derive(Debug, Clone)]
pub struct VoxelBlock {
    code: MortonCode,
    log_odds: [f32; BLOCK_VOXELS],
    observed: [u64; 8],
    frontier: [u64; 8],
    frontier_count: u32,
    max_log_odds: f32,
    dirty: bool,
}

impl VoxelBlock {
    fn new(code: MortonCode) -> Self {
        Self {
            code,
            log_odds: [0.0; BLOCK_VOXELS],
            observed: [0; 8],
            frontier: [0; 8],
            frontier_count: 0,
            max_log_odds: 0.0,
            dirty: false,
        }
    }

    pub fn code(&self) -> MortonCode {
        self.code
    }

    /// Block origin in voxel coordinates.
    pub fn origin(&self) -> VoxelCoord {
        let (x, y, z) = self.code.decode();
        VoxelCoord::new(x as i32 * BLOCK_SIDE, y as i32 * BLOCK_SIDE, z as i32 * BLOCK_SIDE)
    }

    pub fn voxel_at(&self, local: usize) -> VoxelCoord {
        let (x, y, z) = MortonCode(local as u64).decode();
        let o = self.origin();
        o.offset(x as i32, y as i32, z as i32)
    }

    #[inline]
    pub fn is_observed(&self, local: usize) -> bool {
        self.observed[local >> 6] & (1 << (local & 63)) != 0
    }

    #[inline]
    pub fn is_frontier(&self, local: usize) -> bool {
        self.frontier[local >> 6] & (1 << (local & 63)) != 0
    }

    #[inline]
    pub fn log_odds(&self, local: usize) -> f32 {
        self.log_odds[local]
    }

    pub fn frontier_count(&self) -> u32 {
        self.frontier_count
    }

    pub fn observed_count(&self) -> u32 {
        self.observed.iter().map(|w| w.count_ones()).sum()
    }

    /// Cached maximum log-odds over the block, unobserved voxels counted as 0.
    pub fn max_log_odds(&self) -> f32 {
        self.max_log_odds
    }

    /// Local indices of frontier voxels, ascending.
    pub fn frontier_indices(&self) -> impl Iterator<Item = usize> + '_ {
        set_bits(&self.frontier)
    }

    pub fn observed_indices(&self) -> impl Iterator<Item = usize> + '_ {
        set_bits(&self.observed)
    }

    /// Probability of a voxel in this block; 0.5 when unobserved.
    #[inline]
    pub fn probability(&self, local: usize) -> f64 {
        if self.is_observed(local) {
            sigmoid(self.log_odds[local] as f64)
        } else {
            0.5
        }
    }

    pub(crate) fn set_frontier(&mut self, local: usize, flag: bool) -> bool {
        let bit = 1u64 << (local & 63);
        let word = &mut self.frontier[local >> 6];
        let was = *word & bit != 0;
        if was != flag {
            *word ^= bit;
            if flag {
                self.frontier_count += 1;
            } else {
                self.frontier_count -= 1;
            }
        }
        was != flag
    }

    fn recompute_max(&mut self) -> f32 {
        let all_observed = self.observed.iter().all(|&w| w == u64::MAX);
        let mut m = if all_observed { f32::NEG_INFINITY } else { 0.0 };
        for local in set_bits(&self.observed) {
            m = m.max(self.log_odds[local]);
        }
        self.max_log_odds = m;
        m
    }
}

fn set_bits(words: &[u64; 8]) -> impl Iterator<Item = usize> + '_ {
    words.iter().enumerate().flat_map(|(wi, &w)| {
        let mut rest = w;
        core::iter::from_fn(move || {
            if rest == 0 {
                return None;
            }
            let b = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(wi * 64 + b)
        })
    })
}

/// Shapes accepted by the hierarchical free-space query.
#[derive(Debug, Clone, Copy)]
pub enum Region {
    Box(Aabb),
    Sphere { center: Vec3, radius: f64 },
    /// Segment swept by a sphere: cylinder plus end caps.
    Capsule { a: Vec3, b: Vec3, radius: f64 },
}

impl Region {
    fn bounds(&self) -> Aabb {
        match *self {
            Region::Box(b) => b,
            Region::Sphere { center, radius } => Aabb::around(center, radius),
            Region::Capsule { a, b, radius } => Aabb::new(a, b).inflated(radius),
        }
    }

    /// Exact overlap test against the cube `[min, min + side)`.
    fn touches_cube(&self, min: Vec3, side: f64) -> bool {
        let vb = Aabb {
            min,
            max: min + Vec3::splat(side),
        };
        match *self {
            Region::Box(b) => {
                b.min.x < vb.max.x
                    && vb.min.x <= b.max.x
                    && b.min.y < vb.max.y
                    && vb.min.y <= b.max.y
                    && b.min.z < vb.max.z
                    && vb.min.z <= b.max.z
            }
            Region::Sphere { center, radius } => vb.distance_squared_to_point(center) < radius * radius,
            Region::Capsule { a, b, radius } => {
                let c = vb.center();
                let dc = libm::sqrt(point_segment_distance_squared(c, a, b));
                if dc < radius {
                    return true;
                }
                if dc - side * 0.866_025_404 >= radius + 1e-9 {
                    return false;
                }
                segment_box_distance(a, b, &vb) < radius + 1e-9
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct OccupancyOctree {
    resolution: f64,
    map_dim: u32,
    origin: Vec3,
    l_min: f32,
    l_max: f32,
    /// Inner levels above the blocks; the root sits at `depth`.
    depth: u32,
    blocks: Vec<VoxelBlock>,
    index: FxMap<u64, u32>,
    levels: Vec<FxMap<u64, f32>>,
    pending: Vec<MortonCode>,
    observed_count: u64,
    observed_lo: VoxelCoord,
    observed_hi: VoxelCoord,
    frontier_domain: Option<(VoxelCoord, VoxelCoord)>,
    world: Option<(VoxelCoord, VoxelCoord)>,
}

impl OccupancyOctree {
    /// `origin` is the world position of the minimum corner of voxel (0,0,0).
    pub fn new(resolution: f64, map_dim: u32, origin: Vec3) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "resolution",
                reason: "must be positive",
            });
        }
        if map_dim < 8 || !map_dim.is_power_of_two() || map_dim > crate::morton::MAX_COORD {
            return Err(Error::BadMapDimension(map_dim));
        }
        let depth = (map_dim / 8).trailing_zeros();
        let mut levels = Vec::with_capacity(depth as usize);
        levels.resize_with(depth as usize, FxMap::default);
        Ok(Self {
            resolution,
            map_dim,
            origin,
            l_min: DEFAULT_L_MIN,
            l_max: DEFAULT_L_MAX,
            depth,
            blocks: Vec::new(),
            index: FxMap::default(),
            levels,
            pending: Vec::new(),
            observed_count: 0,
            observed_lo: VoxelCoord::new(i32::MAX, i32::MAX, i32::MAX),
            observed_hi: VoxelCoord::new(i32::MIN, i32::MIN, i32::MIN),
            frontier_domain: None,
            world: None,
        })
    }

    /// Smallest power-of-two map covering `bounds` plus a one-voxel margin on
    /// every side, so that surfaces on the bounds faces land inside the map.
    pub fn covering(bounds: &Aabb, resolution: f64) -> Result<Self> {
        if bounds.is_degenerate() {
            return Err(Error::InvalidParameter {
                name: "bounds",
                reason: "degenerate box",
            });
        }
        let size = bounds.size();
        let extent = size.x.max(size.y).max(size.z);
        let needed = libm::ceil(extent / resolution - 1e-9) as u64 + 2;
        let map_dim = needed.next_power_of_two().max(8);
        if map_dim > crate::morton::MAX_COORD as u64 {
            return Err(Error::BadMapDimension(map_dim.min(u32::MAX as u64) as u32));
        }
        let origin = bounds.min - Vec3::splat(resolution);
        Ok(Self::new(resolution, map_dim as u32, origin)?.with_world_bounds(bounds))
    }

    /// Voxels overlapping `bounds` make up the world; the rest of the map is
    /// margin that no sensor ray reaches, so entropy raycasts stop there.
    pub fn with_world_bounds(mut self, bounds: &Aabb) -> Self {
        let r = self.resolution;
        let o = self.origin;
        let lo = |w: f64, o: f64| libm::floor((w - o) / r + 1e-9) as i32;
        let hi = |w: f64, o: f64| libm::ceil((w - o) / r - 1e-9) as i32;
        self.world = Some((
            VoxelCoord::new(lo(bounds.min.x, o.x), lo(bounds.min.y, o.y), lo(bounds.min.z, o.z)),
            VoxelCoord::new(hi(bounds.max.x, o.x), hi(bounds.max.y, o.y), hi(bounds.max.z, o.z)),
        ));
        self
    }

    /// Inside the map and, if set, inside the world bounds.
    pub fn in_world(&self, v: VoxelCoord) -> bool {
        self.in_bounds(v)
            && match self.world {
                None => true,
                Some((lo, hi)) => v.x >= lo.x && v.y >= lo.y && v.z >= lo.z && v.x < hi.x && v.y < hi.y && v.z < hi.z,
            }
    }

    pub fn with_clamp(mut self, l_min: f32, l_max: f32) -> Self {
        self.l_min = l_min;
        self.l_max = l_max;
        self
    }

    /// Only voxels whose centre lies in `bounds` (closed) may be frontiers.
    /// Keeps voxels straddling an off-grid bounds face, which collect both
    /// hits and misses, from becoming frontiers onto the never-observable
    /// space beyond it.
    pub fn with_frontier_bounds(mut self, bounds: &Aabb) -> Self {
        let r = self.resolution;
        let first = |w: f64, o: f64| libm::ceil((w - o) / r - 0.5 - 1e-9) as i32;
        let past = |w: f64, o: f64| libm::floor((w - o) / r - 0.5 + 1e-9) as i32 + 1;
        let (lo, hi) = (bounds.min, bounds.max);
        let o = self.origin;
        self.frontier_domain = Some((
            VoxelCoord::new(first(lo.x, o.x), first(lo.y, o.y), first(lo.z, o.z)),
            VoxelCoord::new(past(hi.x, o.x), past(hi.y, o.y), past(hi.z, o.z)),
        ));
        self
    }

    /// Largest box of whole voxels inside `bounds`.
    pub fn grid_interior(&self, bounds: &Aabb) -> Aabb {
        let r = self.resolution;
        let o = self.origin;
        let up = |w: f64, o: f64| o + libm::ceil((w - o) / r - 1e-9) * r;
        let down = |w: f64, o: f64| o + libm::floor((w - o) / r + 1e-9) * r;
        Aabb::new(
            Vec3::new(up(bounds.min.x, o.x), up(bounds.min.y, o.y), up(bounds.min.z, o.z)),
            Vec3::new(down(bounds.max.x, o.x), down(bounds.max.y, o.y), down(bounds.max.z, o.z)),
        )
    }

    pub fn in_frontier_domain(&self, v: VoxelCoord) -> bool {
        match self.frontier_domain {
            None => true,
            Some((lo, hi)) => v.x >= lo.x && v.y >= lo.y && v.z >= lo.z && v.x < hi.x && v.y < hi.y && v.z < hi.z,
        }
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn map_dim(&self) -> u32 {
        self.map_dim
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn clamp_bounds(&self) -> (f32, f32) {
        (self.l_min, self.l_max)
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// World-space box covered by the map.
    pub fn extent(&self) -> Aabb {
        Aabb {
            min: self.origin,
            max: self.origin + Vec3::splat(self.map_dim as f64 * self.resolution),
        }
    }

    #[inline]
    pub fn in_bounds(&self, v: VoxelCoord) -> bool {
        let d = self.map_dim as i32;
        v.x >= 0 && v.y >= 0 && v.z >= 0 && v.x < d && v.y < d && v.z < d
    }

    pub fn world_to_voxel(&self, p: Vec3) -> VoxelCoord {
        let g = (p - self.origin) / self.resolution;
        VoxelCoord::new(
            libm::floor(g.x) as i32,
            libm::floor(g.y) as i32,
            libm::floor(g.z) as i32,
        )
    }

    /// Point to grid units, voxel (0,0,0) spanning `[0,1)³`.
    pub fn world_to_grid(&self, p: Vec3) -> Vec3 {
        (p - self.origin) / self.resolution
    }

    pub fn voxel_center(&self, v: VoxelCoord) -> Vec3 {
        self.origin
            + Vec3::new(v.x as f64 + 0.5, v.y as f64 + 0.5, v.z as f64 + 0.5) * self.resolution
    }

    pub fn voxel_min_corner(&self, v: VoxelCoord) -> Vec3 {
        self.origin + Vec3::new(v.x as f64, v.y as f64, v.z as f64) * self.resolution
    }

    /// Morton code of a voxel; block code is this shifted right by 9.
    pub fn voxel_code(&self, v: VoxelCoord) -> Option<MortonCode> {
        self.in_bounds(v)
            .then(|| MortonCode::encode_unchecked(v.x as u32, v.y as u32, v.z as u32))
    }

    pub fn voxel_from_code(code: MortonCode) -> VoxelCoord {
        let (x, y, z) = code.decode();
        VoxelCoord::new(x as i32, y as i32, z as i32)
    }

    fn block_code(v: VoxelCoord) -> MortonCode {
        let (bx, by, bz) = v.block();
        MortonCode::encode_unchecked(bx as u32, by as u32, bz as u32)
    }

    pub fn block(&self, code: MortonCode) -> Option<&VoxelBlock> {
        self.index.get(&code.0).map(|&i| &self.blocks[i as usize])
    }

    /// Allocated blocks in allocation order.
    pub fn blocks(&self) -> &[VoxelBlock] {
        &self.blocks
    }

    #[inline]
    pub(crate) fn block_of(&self, v: VoxelCoord) -> Option<(&VoxelBlock, usize)> {
        if !self.in_bounds(v) {
            return None;
        }
        let b = self.block(Self::block_code(v))?;
        Some((b, v.local_index()))
    }

    pub(crate) fn block_of_mut(&mut self, v: VoxelCoord) -> Option<(&mut VoxelBlock, usize)> {
        if !self.in_bounds(v) {
            return None;
        }
        let i = *self.index.get(&Self::block_code(v).0)?;
        Some((&mut self.blocks[i as usize], v.local_index()))
    }

    fn block_index_or_insert(&mut self, code: MortonCode) -> usize {
        if let Some(&i) = self.index.get(&code.0) {
            return i as usize;
        }
        let i = self.blocks.len();
        self.blocks.push(VoxelBlock::new(code));
        self.index.insert(code.0, i as u32);
        i
    }

    pub fn is_observed(&self, v: VoxelCoord) -> bool {
        self.block_of(v).is_some_and(|(b, l)| b.is_observed(l))
    }

    /// Occupancy probability; exactly 0.5 for unobserved or out-of-map voxels.
    pub fn get_occupancy(&self, v: VoxelCoord) -> f64 {
        match self.block_of(v) {
            Some((b, l)) => b.probability(l),
            None => 0.5,
        }
    }

    pub fn log_odds(&self, v: VoxelCoord) -> Option<f32> {
        self.block_of(v)
            .and_then(|(b, l)| b.is_observed(l).then(|| b.log_odds(l)))
    }

    pub fn is_frontier_flagged(&self, v: VoxelCoord) -> bool {
        self.block_of(v).is_some_and(|(b, l)| b.is_frontier(l))
    }

    /// Adds `delta` to the voxel's log-odds (clamped) and marks it observed.
    /// Out-of-map voxels are ignored and read back as 0.5. The block is queued
    /// for [`Self::propagate_pending`].
    pub fn apply_log_odds(&mut self, v: VoxelCoord, delta: f32) -> f64 {
        if !self.in_bounds(v) {
            return 0.5;
        }
        let code = Self::block_code(v);
        let bi = self.block_index_or_insert(code);
        let local = v.local_index();
        let (l_min, l_max) = (self.l_min, self.l_max);
        let block = &mut self.blocks[bi];
        let bit = 1u64 << (local & 63);
        let newly = block.observed[local >> 6] & bit == 0;
        block.observed[local >> 6] |= bit;
        let l = (block.log_odds[local] + delta).clamp(l_min, l_max);
        block.log_odds[local] = l;
        if !block.dirty {
            block.dirty = true;
            self.pending.push(code);
        }
        if newly {
            self.observed_count += 1;
            self.observed_lo = VoxelCoord::new(
                self.observed_lo.x.min(v.x),
                self.observed_lo.y.min(v.y),
                self.observed_lo.z.min(v.z),
            );
            self.observed_hi = VoxelCoord::new(
                self.observed_hi.x.max(v.x),
                self.observed_hi.y.max(v.y),
                self.observed_hi.z.max(v.z),
            );
        }
        sigmoid(l as f64)
    }

    /// Recomputes the cached maxima of the given blocks and all their
    /// ancestors.
    pub fn up_propagate(&mut self, dirty: &[MortonCode]) {
        let mut codes: Vec<u64> = Vec::with_capacity(dirty.len());
        for &c in dirty {
            if let Some(&i) = self.index.get(&c.0) {
                let b = &mut self.blocks[i as usize];
                b.recompute_max();
                b.dirty = false;
                codes.push(c.0);
            }
        }
        codes.sort_unstable();
        codes.dedup();
        for level in 1..=self.depth {
            for c in codes.iter_mut() {
                *c >>= 3;
            }
            codes.dedup();
            for &parent in &codes {
                let mut m = f32::NEG_INFINITY;
                for octant in 0..8u64 {
                    let child = (parent << 3) | octant;
                    m = m.max(self.node_max(level - 1, child).unwrap_or(0.0));
                }
                self.levels[level as usize - 1].insert(parent, m);
            }
        }
    }

    /// Propagates every block touched since the last propagation.
    pub fn propagate_pending(&mut self) {
        let pending = core::mem::take(&mut self.pending);
        self.up_propagate(&pending);
    }

    pub fn has_pending(&self) -> bool {
        !self.pending.is_empty()
    }

    /// Cached max log-odds of a node. Level 0 is the block level; `None`
    /// means the subtree was never allocated.
    pub fn node_max(&self, level: u32, key: u64) -> Option<f32> {
        if level == 0 {
            self.index
                .get(&key)
                .map(|&i| self.blocks[i as usize].max_log_odds)
        } else {
            self.levels.get(level as usize - 1)?.get(&key).copied()
        }
    }

    /// Cached max occupancy probability of a node, unobserved space as 0.5.
    pub fn node_max_occupancy(&self, level: u32, key: u64) -> f64 {
        self.node_max(level, key).map_or(0.5, |l| sigmoid(l as f64))
    }

    /// Inner-node keys present at `level` (>= 1), unordered.
    pub fn level_keys(&self, level: u32) -> impl Iterator<Item = u64> + '_ {
        self.levels
            .get(level as usize - 1)
            .into_iter()
            .flat_map(|m| m.keys().copied())
    }

    pub fn observed_count(&self) -> u64 {
        self.observed_count
    }

    /// Number of observed voxels times `r³`.
    pub fn explored_volume(&self) -> f64 {
        self.observed_count as f64 * self.resolution * self.resolution * self.resolution
    }

    /// Bounding box of all observed voxels in world coordinates.
    pub fn observed_bounds(&self) -> Option<Aabb> {
        if self.observed_count == 0 {
            return None;
        }
        let lo = self.voxel_min_corner(self.observed_lo);
        let hi = self.voxel_min_corner(self.observed_hi.offset(1, 1, 1));
        Some(Aabb { min: lo, max: hi })
    }

    /// Observed voxels with their probabilities, in Morton order.
    pub fn observed_voxels(&self) -> impl Iterator<Item = (VoxelCoord, f64)> + '_ {
        let mut order: Vec<(u64, u32)> = self.index.iter().map(|(&c, &i)| (c, i)).collect();
        order.sort_unstable();
        order.into_iter().flat_map(move |(_, i)| {
            let b = &self.blocks[i as usize];
            b.observed_indices()
                .map(move |l| (b.voxel_at(l), sigmoid(b.log_odds(l) as f64)))
        })
    }

    /// True iff every voxel overlapping `region` has probability below
    /// `threshold`. Unobserved and out-of-map voxels count as 0.5. Subtrees
    /// whose cached maximum is already below the threshold are not visited.
    pub fn query_free(&self, region: &Region, threshold: f64) -> bool {
        let unknown_free = 0.5 < threshold;
        let bounds = region.bounds();
        let ext = self.extent();
        if !unknown_free {
            // Touching out-of-map space means touching unknown space.
            if bounds.min.x < ext.min.x
                || bounds.min.y < ext.min.y
                || bounds.min.z < ext.min.z
                || bounds.max.x >= ext.max.x
                || bounds.max.y >= ext.max.y
                || bounds.max.z >= ext.max.z
            {
                return false;
            }
        } else if ext.intersection(&bounds).is_none() {
            return true;
        }
        self.node_free(self.depth, 0, region, threshold)
    }

    /// Region query with the free threshold at 0.5.
    pub fn is_free(&self, region: &Region) -> bool {
        self.query_free(region, 0.5)
    }

    fn node_free(&self, level: u32, key: u64, region: &Region, threshold: f64) -> bool {
        let side_voxels = (BLOCK_SIDE as u32) << level;
        let (nx, ny, nz) = MortonCode(key).decode();
        let side = side_voxels as f64 * self.resolution;
        let min = self.origin
            + Vec3::new(nx as f64, ny as f64, nz as f64) * side;
        let Some(max_l) = self.node_max(level, key) else {
            return 0.5 < threshold || !region.touches_cube(min, side);
        };
        if sigmoid(max_l as f64) < threshold || !region.touches_cube(min, side) {
            return true;
        }
        if level > 0 {
            return (0..8u64).all(|o| self.node_free(level - 1, (key << 3) | o, region, threshold));
        }
        let block = &self.blocks[self.index[&key] as usize];
        let rb = region.bounds();
        let lo = self.world_to_voxel(rb.min);
        let hi = self.world_to_voxel(rb.max);
        let o = block.origin();
        let clamp = |v: i32, base: i32| (v - base).clamp(0, BLOCK_SIDE - 1);
        for z in clamp(lo.z, o.z)..=clamp(hi.z, o.z) {
            for y in clamp(lo.y, o.y)..=clamp(hi.y, o.y) {
                for x in clamp(lo.x, o.x)..=clamp(hi.x, o.x) {
                    let v = o.offset(x, y, z);
                    if block.probability(v.local_index()) >= threshold
                        && region.touches_cube(self.voxel_min_corner(v), self.resolution)
                    {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub(crate) fn set_frontier(&mut self, v: VoxelCoord, flag: bool) -> Option<(MortonCode, u32, u32)> {
        let (b, l) = self.block_of_mut(v)?;
        let before = b.frontier_count;
        if b.set_frontier(l, flag) {
            Some((b.code, before, b.frontier_count))
        } else {
            None
        }
    }
}
