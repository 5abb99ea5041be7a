//! Maximum-coverage frame selection.
//!
//! Each candidate frame contributes the set of voxels it observes. The greedy
//! selector repeatedly takes the frame with the largest number of voxels not
//! yet covered and stops once no frame adds anything. An exhaustive selector
//! is provided as a reference for small instances.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, CameraFrame, FrameVoxelSet, PointSet, SceneBounds, Voxel};

/// Default number of uniformly subsampled candidate frames.
pub const DEFAULT_CANDIDATES: usize = 128;
/// Default number of selected frames.
pub const DEFAULT_SELECTED: usize = 16;
/// Upper bound on the number of subsets `exhaustive_select` will enumerate.
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone)]
pub struct CoverageInstance {
    frame_sets: Vec<FrameVoxelSet>,
    k: usize,
}

impl CoverageInstance {
    pub fn new(frame_sets: Vec<FrameVoxelSet>, k: usize) -> Result<Self> {
        if frame_sets.is_empty() {
            return Err(Error::EmptyInstance);
        }
        if k == 0 || k > frame_sets.len() {
            return Err(Error::invalid(format!(
                "k = {k} must be in 1..={}",
                frame_sets.len()
            )));
        }
        let mut seen = HashSet::with_capacity(frame_sets.len());
        for s in &frame_sets {
            if !seen.insert(s.frame_id) {
                return Err(Error::invalid(format!("duplicate frame id {}", s.frame_id)));
            }
        }
        Ok(Self { frame_sets, k })
    }

    pub fn frame_sets(&self) -> &[FrameVoxelSet] {
        &self.frame_sets
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Frame ids in the order they were selected.
    pub selected_ids: Vec<u32>,
    pub covered_count: usize,
    pub per_step_gain: Vec<usize>,
    /// Set when selection stopped before `k` frames because nothing left
    /// adds coverage.
    pub early_stop: bool,
}

/// `floor(i * total / m)` for `i in 0..m`.
pub fn uniform_subsample(total_frames: usize, m: usize) -> Result<Vec<usize>> {
    if total_frames == 0 || m == 0 {
        return Err(Error::invalid("frame counts must be positive"));
    }
    if m > total_frames {
        return Err(Error::invalid(format!(
            "cannot subsample {m} frames from {total_frames}"
        )));
    }
    let (total, m) = (total_frames as u128, m as u128);
    Ok((0..m).map(|i| (i * total / m) as usize).collect())
}

fn marginal_gain(set: &FrameVoxelSet, covered: &HashSet<Voxel>) -> usize {
    set.voxels().iter().filter(|v| !covered.contains(*v)).count()
}

/// Greedy selection over a subset of `sets`. Ties go to the lowest frame id,
/// so the result does not depend on input order.
fn greedy_over(sets: &[&FrameVoxelSet], k: usize) -> SelectionResult {
    let mut covered: HashSet<Voxel> = HashSet::new();
    let mut remaining: Vec<&FrameVoxelSet> = sets.to_vec();
    let mut result = SelectionResult {
        selected_ids: Vec::with_capacity(k),
        covered_count: 0,
        per_step_gain: Vec::with_capacity(k),
        early_stop: false,
    };
    for _ in 0..k {
        if remaining.is_empty() {
            break;
        }
        let gains: Vec<usize> = remaining
            .par_iter()
            .map(|s| marginal_gain(s, &covered))
            .collect();
        let (best_pos, best_gain) = gains
            .iter()
            .enumerate()
            .max_by(|(ia, ga), (ib, gb)| {
                ga.cmp(gb)
                    .then_with(|| remaining[*ib].frame_id.cmp(&remaining[*ia].frame_id))
            })
            .map(|(i, g)| (i, *g))
            .expect("remaining is nonempty");
        if best_gain == 0 {
            result.early_stop = true;
            break;
        }
        let chosen = remaining.swap_remove(best_pos);
        covered.extend(chosen.voxels().iter().copied());
        result.selected_ids.push(chosen.frame_id);
        result.per_step_gain.push(best_gain);
        result.covered_count += best_gain;
    }
    result
}

pub fn greedy_select(instance: &CoverageInstance) -> SelectionResult {
    let sets: Vec<&FrameVoxelSet> = instance.frame_sets.iter().collect();
    greedy_over(&sets, instance.k)
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return acc;
        }
    }
    acc
}

fn union_size(sets: &[&FrameVoxelSet]) -> usize {
    let mut seen = HashSet::new();
    for s in sets {
        seen.extend(s.voxels().iter().copied());
    }
    seen.len()
}

/// Exact maximum coverage by enumerating every `k`-subset.
///
/// Among optimal subsets the lexicographically smallest sorted id list wins.
/// The chosen frames are reported in greedy order within the subset, and
/// members that add nothing are dropped, so the gain invariants of
/// [`SelectionResult`] hold here too.
pub fn exhaustive_select(instance: &CoverageInstance) -> Result<SelectionResult> {
    let mut sets: Vec<&FrameVoxelSet> = instance.frame_sets.iter().collect();
    sets.sort_by_key(|s| s.frame_id);
    let n = sets.len();
    let k = instance.k;
    let combinations = binomial(n, k);
    if combinations > EXHAUSTIVE_LIMIT {
        return Err(Error::InstanceTooLarge {
            combinations,
            limit: EXHAUSTIVE_LIMIT,
        });
    }

    let mut idx: Vec<usize> = (0..k).collect();
    let mut best: Option<(usize, Vec<usize>)> = None;
    loop {
        let chosen: Vec<&FrameVoxelSet> = idx.iter().map(|&i| sets[i]).collect();
        let size = union_size(&chosen);
        if best.as_ref().is_none_or(|(b, _)| size > *b) {
            best = Some((size, idx.clone()));
        }
        // advance to the next combination in lexicographic order
        let mut pos = k;
        while pos > 0 && idx[pos - 1] == n - k + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            break;
        }
        idx[pos - 1] += 1;
        for j in pos..k {
            idx[j] = idx[j - 1] + 1;
        }
    }

    let (_, best_idx) = best.expect("at least one combination");
    let chosen: Vec<&FrameVoxelSet> = best_idx.iter().map(|&i| sets[i]).collect();
    let mut result = greedy_over(&chosen, k);
    result.early_stop = false;
    Ok(result)
}

/// Union coverage of a fixed list of frames.
pub fn coverage_of(frame_sets: &[FrameVoxelSet], ids: &[u32]) -> usize {
    let by_id: HashMap<u32, &FrameVoxelSet> = frame_sets.iter().map(|s| (s.frame_id, s)).collect();
    let chosen: Vec<&FrameVoxelSet> = ids.iter().filter_map(|id| by_id.get(id).copied()).collect();
    union_size(&chosen)
}

/// Frame ids picked by uniform subsampling of `k` out of `frame_sets`
/// (positional, in input order).
pub fn uniform_baseline(frame_sets: &[FrameVoxelSet], k: usize) -> Result<Vec<u32>> {
    Ok(uniform_subsample(frame_sets.len(), k)?
        .into_iter()
        .map(|i| frame_sets[i].frame_id)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub k: usize,
    pub lambda: f64,
    pub conf_floor: f64,
    pub percentile: f64,
    pub stride: usize,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            k: DEFAULT_SELECTED,
            lambda: geom::DEFAULT_LAMBDA,
            conf_floor: geom::DEFAULT_CONF_FLOOR,
            percentile: geom::DEFAULT_PERCENTILE,
            stride: geom::DEFAULT_STRIDE,
        }
    }
}

/// Everything the sampling pipeline computed on the way to a selection.
/// Per-frame voxel sets are kept so callers can evaluate other strategies
/// without recomputing them.
#[derive(Debug, Clone)]
pub struct SamplingOutcome {
    pub selection: SelectionResult,
    pub delta: f64,
    pub bounds: SceneBounds,
    pub frame_sets: Vec<FrameVoxelSet>,
    pub valid_points: Vec<PointSet>,
    pub total_voxels: usize,
}

/// Full pipeline: unproject, filter, bound, voxelize, then greedy selection.
pub fn select_frames(frames: &[CameraFrame], params: &SamplingParams) -> Result<SamplingOutcome> {
    if frames.is_empty() {
        return Err(Error::EmptyInstance);
    }
    if params.k == 0 || params.k > frames.len() {
        return Err(Error::invalid(format!(
            "k = {} must be in 1..={}",
            params.k,
            frames.len()
        )));
    }
    let raw: Vec<PointSet> = frames
        .par_iter()
        .map(|f| geom::unproject_frame(f, params.stride))
        .collect::<Result<_>>()?;
    let valid = geom::filter_valid(&raw, params.conf_floor, params.percentile)?;
    let bounds = geom::scene_bounds(&valid)?;
    let delta = geom::voxel_size(&bounds, params.lambda)?;
    let frame_sets = geom::voxelize_all(&valid, &bounds, delta)?;
    let total_voxels = union_size(&frame_sets.iter().collect::<Vec<_>>());
    let instance = CoverageInstance::new(frame_sets, params.k)?;
    let selection = greedy_select(&instance);
    Ok(SamplingOutcome {
        selection,
        delta,
        bounds,
        frame_sets: instance.frame_sets,
        valid_points: valid,
        total_voxels,
    })
}
