//! Sub-scene regions: division of frames by constrained K-means and the
//! overlap queries used during selection.

pub mod assignment;
pub mod kmeans;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;

use crate::config::EngineConfig;
use crate::correspondence::{distance_sq, in_window};
use crate::error::{Error, Result};
use crate::registration::WorldFrame;
use crate::scene::io;
use crate::scene::RegionKey;

pub use kmeans::Clustering;

/// Derives a per-frame seed so frames are divided independently.
pub fn frame_seed(seed: u64, frame: u32) -> u64 {
    // SplitMix64 finalizer over the combined value.
    let mut z = seed ^ (u64::from(frame).wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Divides one registered frame into `K` regions whose sizes lie in the
/// configured band.
pub fn divide_frame(frame: &WorldFrame, config: &EngineConfig, seed: u64) -> Result<Clustering> {
    let n = frame.len();
    let k = config.regions_per_frame;
    let (lower, upper) = config.size_bounds(n);
    if lower == 0 || k * lower > n || n > k * upper {
        return Err(Error::Config(format!(
            "frame {}: {n} points cannot form {k} regions sized in [{lower}, {upper}]",
            frame.frame_id
        )));
    }
    kmeans::constrained_kmeans(&frame.points, k, lower, upper, seed)
}

/// One region of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionInfo {
    pub members: Vec<u32>,
    /// Mean of the member world coordinates.
    pub center: [f64; 3],
}

impl RegionInfo {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameRegions {
    pub frame_id: u32,
    pub ids: Vec<u32>,
    pub regions: Vec<RegionInfo>,
}

impl FrameRegions {
    /// Groups points by id. Fails if any of the `k` regions is empty.
    pub fn new(frame: &WorldFrame, ids: Vec<u32>, k: usize) -> Result<Self> {
        if ids.len() != frame.len() {
            return Err(Error::Structure(format!(
                "frame {}: {} region ids for {} points",
                frame.frame_id,
                ids.len(),
                frame.len()
            )));
        }
        let mut members = vec![Vec::new(); k];
        for (p, &id) in ids.iter().enumerate() {
            let list = members.get_mut(id as usize).ok_or_else(|| {
                Error::Validation(format!(
                    "frame {}: region id {id} at point {p} exceeds K={k}",
                    frame.frame_id
                ))
            })?;
            list.push(p as u32);
        }
        let regions = members
            .into_iter()
            .enumerate()
            .map(|(r, members)| {
                if members.is_empty() {
                    return Err(Error::Validation(format!(
                        "frame {}: region {r} is empty",
                        frame.frame_id
                    )));
                }
                let mut c = [0.0f64; 3];
                for &m in &members {
                    let p = frame.points[m as usize];
                    c[0] += p[0];
                    c[1] += p[1];
                    c[2] += p[2];
                }
                let n = members.len() as f64;
                Ok(RegionInfo {
                    members,
                    center: [c[0] / n, c[1] / n, c[2] / n],
                })
            })
            .collect::<Result<_>>()?;
        Ok(FrameRegions {
            frame_id: frame.frame_id,
            ids,
            regions,
        })
    }
}

/// Region partition of every frame of a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionTable {
    pub frames: Vec<FrameRegions>,
}

impl RegionTable {
    /// Divides every frame in parallel.
    pub fn divide(frames: &[WorldFrame], config: &EngineConfig) -> Result<Self> {
        let frames = frames
            .par_iter()
            .map(|f| {
                let c = divide_frame(f, config, frame_seed(config.seed, f.frame_id))?;
                FrameRegions::new(f, c.labels, config.regions_per_frame)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RegionTable { frames })
    }

    pub fn from_ids(frames: &[WorldFrame], ids: Vec<Vec<u32>>, k: usize) -> Result<Self> {
        if frames.len() != ids.len() {
            return Err(Error::Structure(format!(
                "{} region files for {} frames",
                ids.len(),
                frames.len()
            )));
        }
        let frames = frames
            .iter()
            .zip(ids)
            .map(|(f, ids)| FrameRegions::new(f, ids, k))
            .collect::<Result<_>>()?;
        Ok(RegionTable { frames })
    }

    pub fn region(&self, key: RegionKey) -> &RegionInfo {
        &self.frames[key.frame as usize].regions[key.region as usize]
    }

    pub fn get(&self, key: RegionKey) -> Option<&RegionInfo> {
        self.frames
            .get(key.frame as usize)?
            .regions
            .get(key.region as usize)
    }

    pub fn keys(&self) -> impl Iterator<Item = RegionKey> + '_ {
        self.frames.iter().enumerate().flat_map(|(f, fr)| {
            (0..fr.regions.len()).map(move |r| RegionKey::new(f as u32, r as u32))
        })
    }

    pub fn sizes(&self) -> BTreeMap<RegionKey, usize> {
        self.keys().map(|k| (k, self.region(k).len())).collect()
    }

    pub fn write_region_files(&self, root: &Path) -> Result<()> {
        for (f, fr) in self.frames.iter().enumerate() {
            io::write_atomic(
                &io::region_path(root, f),
                &io::encode_regions(&fr.ids, fr.regions.len()),
            )?;
        }
        Ok(())
    }

    pub fn read_region_files(root: &Path, frames: &[WorldFrame]) -> Result<Self> {
        let mut k_all = None;
        let mut ids = Vec::with_capacity(frames.len());
        for f in 0..frames.len() {
            let path = io::region_path(root, f);
            let (k, frame_ids) = io::decode_regions(&path, &io::read_file(&path)?)?;
            if *k_all.get_or_insert(k) != k {
                return Err(Error::Structure(format!(
                    "{}: K={k} differs from other frames",
                    path.display()
                )));
            }
            ids.push(frame_ids);
        }
        Self::from_ids(frames, ids, k_all.unwrap_or(0))
    }
}

/// Regions of `pool` overlapping `anchor`: weight centers within the overlap
/// radius, frames restricted to the anchor's neighbour window or its own
/// frame. The anchor itself is always included.
pub fn corresponding_set(
    anchor: RegionKey,
    table: &RegionTable,
    pool: &BTreeSet<RegionKey>,
    config: &EngineConfig,
) -> BTreeSet<RegionKey> {
    let center = table.region(anchor).center;
    let radius_sq = config.overlap_radius * config.overlap_radius;
    let mut set: BTreeSet<RegionKey> = pool
        .iter()
        .filter(|k| {
            let same_or_near = k.frame == anchor.frame
                || in_window(
                    anchor.frame as usize,
                    k.frame as usize,
                    config.neighbor_window,
                );
            same_or_near && distance_sq(&table.region(**k).center, &center) <= radius_sq
        })
        .copied()
        .collect();
    set.insert(anchor);
    set
}

/// One row of the region sidecar file.
#[derive(Debug, Clone, PartialEq)]
pub struct SidecarRow {
    pub key: RegionKey,
    pub center: [f64; 3],
    pub count: usize,
    pub scores: Option<(f64, f64)>,
}

pub const SIDECAR_FILE: &str = "centers.txt";

/// `frame_id region_id cx cy cz count [fd fe]`, one line per region.
pub fn encode_sidecar(
    table: &RegionTable,
    scores: Option<&BTreeMap<RegionKey, (f64, f64)>>,
) -> String {
    let mut out = String::new();
    for key in table.keys() {
        let r = table.region(key);
        out.push_str(&format!(
            "{} {} {} {} {} {}",
            key.frame,
            key.region,
            r.center[0],
            r.center[1],
            r.center[2],
            r.len()
        ));
        if let Some((fd, fe)) = scores.and_then(|s| s.get(&key)) {
            out.push_str(&format!(" {fd} {fe}"));
        }
        out.push('\n');
    }
    out
}

pub fn decode_sidecar(path: &Path, text: &str) -> Result<Vec<SidecarRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Validation(format!("{} line {}: malformed region row", path.display(), i + 1));
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 6 && f.len() != 8 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        rows.push(SidecarRow {
            key: RegionKey::new(f[0].parse().map_err(|_| bad())?, f[1].parse().map_err(|_| bad())?),
            center: [num(f[2])?, num(f[3])?, num(f[4])?],
            count: f[5].parse().map_err(|_| bad())?,
            scores: if f.len() == 8 { Some((num(f[6])?, num(f[7])?)) } else { None },
        });
    }
    Ok(rows)
}
