//! Point correspondences between neighbouring registered frames.
//!
//! For every point of frame `i` and every frame `j` in its neighbour window,
//! the nearest point of `j` is kept when it lies within the correspondence
//! threshold. Objects are assumed static; nothing compensates for motion.

mod kdtree;

pub use kdtree::{distance_sq, Neighbor, SpatialIndex};

use std::path::Path;

use rayon::prelude::*;

use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::registration::WorldFrame;
use crate::scene::io::{Reader, CORR_MAGIC};

/// Frames searched for correspondences of frame `i` in a sequence of
/// `frame_count` frames: `⌊n/2⌋` before and the rest after, truncated at the
/// sequence ends.
pub fn neighbor_window(i: usize, frame_count: usize, window: usize) -> Vec<usize> {
    let before = window / 2;
    let after = window - before;
    let lo = i.saturating_sub(before);
    let hi = (i + after).min(frame_count.saturating_sub(1));
    (lo..=hi).filter(|&j| j != i).collect()
}

/// Whether frame `j` lies in the neighbour window of frame `i`.
pub fn in_window(i: usize, j: usize, window: usize) -> bool {
    let before = window / 2;
    let after = window - before;
    if j < i {
        i - j <= before
    } else if j > i {
        j - i <= after
    } else {
        false
    }
}

pub fn build_spatial_index(frame: &WorldFrame) -> SpatialIndex {
    SpatialIndex::build(frame.points.clone())
}

pub fn build_indices(frames: &[WorldFrame]) -> Vec<SpatialIndex> {
    frames.par_iter().map(build_spatial_index).collect()
}

/// A matched point in another frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Match {
    pub frame: u32,
    pub point: u32,
}

/// Correspondences of every point of one frame, in compressed-row form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrespondenceMap {
    pub frame_id: u32,
    /// Frames that were searched.
    pub window: Vec<u32>,
    offsets: Vec<u32>,
    matches: Vec<Match>,
}

impl CorrespondenceMap {
    pub fn from_lists(frame_id: u32, window: Vec<u32>, lists: &[Vec<Match>]) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        let mut matches = Vec::new();
        offsets.push(0);
        for list in lists {
            matches.extend_from_slice(list);
            offsets.push(matches.len() as u32);
        }
        CorrespondenceMap {
            frame_id,
            window,
            offsets,
            matches,
        }
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn matches(&self, point: usize) -> &[Match] {
        &self.matches[self.offsets[point] as usize..self.offsets[point + 1] as usize]
    }

    pub fn total_matches(&self) -> usize {
        self.matches.len()
    }

    /// Cache file: `"LDCM"`, `u32 N`, then per point a `u16` pair count
    /// followed by `(u32 frame, u32 point)` pairs.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 2 * self.len() + 8 * self.matches.len());
        out.extend_from_slice(CORR_MAGIC);
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for p in 0..self.len() {
            let m = self.matches(p);
            out.extend_from_slice(&(m.len() as u16).to_le_bytes());
            for pair in m {
                out.extend_from_slice(&pair.frame.to_le_bytes());
                out.extend_from_slice(&pair.point.to_le_bytes());
            }
        }
        out
    }

    /// Reads a cache file. The window is not stored and is taken from the caller.
    pub fn decode(path: &Path, bytes: &[u8], frame_id: u32, window: Vec<u32>) -> Result<Self> {
        let mut r = Reader::new(path, bytes);
        r.magic(CORR_MAGIC)?;
        let n = r.u32()? as usize;
        let mut lists = Vec::with_capacity(n);
        for _ in 0..n {
            let count = r.u16()? as usize;
            let mut list = Vec::with_capacity(count);
            for _ in 0..count {
                let at = r.offset();
                let m = Match {
                    frame: r.u32()?,
                    point: r.u32()?,
                };
                if !window.contains(&m.frame) {
                    return Err(Error::format(
                        path,
                        at,
                        format!("frame {} outside the neighbour window", m.frame),
                    ));
                }
                list.push(m);
            }
            lists.push(list);
        }
        r.finish()?;
        Ok(Self::from_lists(frame_id, window, &lists))
    }
}

/// Correspondences of every point of frame `i` against its window.
pub fn find_correspondences(
    i: usize,
    frames: &[WorldFrame],
    indices: &[SpatialIndex],
    config: &EngineConfig,
) -> CorrespondenceMap {
    let window = neighbor_window(i, frames.len(), config.neighbor_window);
    let threshold = config.correspondence_threshold;
    let lists: Vec<Vec<Match>> = frames[i]
        .points
        .par_iter()
        .map(|p| {
            window
                .iter()
                .filter_map(|&j| {
                    let n = indices[j].nearest(p)?;
                    (n.distance() <= threshold).then_some(Match {
                        frame: j as u32,
                        point: n.index,
                    })
                })
                .collect()
        })
        .collect();
    CorrespondenceMap::from_lists(
        frames[i].frame_id,
        window.into_iter().map(|j| j as u32).collect(),
        &lists,
    )
}

pub fn find_all_correspondences(
    frames: &[WorldFrame],
    indices: &[SpatialIndex],
    config: &EngineConfig,
) -> Vec<CorrespondenceMap> {
    (0..frames.len())
        .map(|i| find_correspondences(i, frames, indices, config))
        .collect()
}
