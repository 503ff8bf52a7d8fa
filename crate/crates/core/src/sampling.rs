//! Candidate goal sampling from the frontier list.
//!
//! Blocks are the implicit frontier clusters. Because the list is sorted by
//! Morton code, taking every `⌈N_rem / N_c⌉`-th block spreads the samples
//! along the z-order curve, which keeps them spatially spread out.

use alloc::vec::Vec;

use rand::Rng;

use crate::geometry::Vec3;
use crate::integration::FrontierList;
use crate::mav::MavState;
use crate::morton::MortonCode;
use crate::octree::OccupancyOctree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateSource {
    Block(MortonCode),
    CurrentPose,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub position: Vec3,
    pub source: CandidateSource,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn from_frontiers(&self) -> impl Iterator<Item = &Candidate> {
        self.candidates
            .iter()
            .filter(|c| matches!(c.source, CandidateSource::Block(_)))
    }
}

/// Blocks of `frontiers` holding at least `min_count` frontier voxels, still
/// in Morton order.
pub fn filter_frontier_blocks(frontiers: &FrontierList, map: &OccupancyOctree, min_count: u32) -> Vec<MortonCode> {
    frontiers
        .codes()
        .iter()
        .copied()
        .filter(|&c| map.block(c).is_some_and(|b| b.frontier_count() >= min_count))
        .collect()
}

/// Stride-samples `filtered`: block indices `phase, phase + s, …` with
/// `s = ⌈N_rem / n_candidates⌉`, one uniformly drawn frontier voxel centre
/// per block. The current position is always appended last.
///
/// `phase` is 0 unless `random_phase` is set, in which case it is drawn from
/// `[0, s)`.
pub fn sample_candidates<R: Rng + ?Sized>(
    filtered: &[MortonCode],
    map: &OccupancyOctree,
    n_candidates: usize,
    current: &MavState,
    random_phase: bool,
    rng: &mut R,
) -> CandidateSet {
    let mut out = Vec::new();
    let n_rem = filtered.len();
    if n_rem > 0 && n_candidates > 0 {
        let stride = n_rem.div_ceil(n_candidates);
        let phase = if random_phase { rng.random_range(0..stride) } else { 0 };
        for &code in filtered.iter().skip(phase).step_by(stride) {
            let Some(block) = map.block(code) else { continue };
            let count = block.frontier_count() as usize;
            if count == 0 {
                continue;
            }
            let pick = rng.random_range(0..count);
            let local = block
                .frontier_indices()
                .nth(pick)
                .expect("frontier_count matches mask");
            out.push(Candidate {
                position: map.voxel_center(block.voxel_at(local)),
                source: CandidateSource::Block(code),
            });
        }
    }
    out.push(Candidate {
        position: current.position,
        source: CandidateSource::CurrentPose,
    });
    CandidateSet { candidates: out }
}
