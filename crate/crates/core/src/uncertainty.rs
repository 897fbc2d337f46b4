//! Inter-frame divergence and entropy.
//!
//! Every point gathers the distributions predicted for it by the frames it
//! corresponds to, together with its own. The divergence score is the mean
//! KL divergence from the point's own distribution to each gathered one;
//! the entropy score is the entropy of their mean. Region scores are plain
//! means over member points. All logarithms are natural.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::correspondence::CorrespondenceMap;
use crate::error::{Error, Result};
use crate::regions::RegionTable;
use crate::scene::{ProbabilityField, RegionKey};

/// Mixing weight toward the uniform distribution applied before any logarithm.
pub const SMOOTHING: f64 = 1e-6;

#[inline]
fn smooth(p: f64, uniform: f64) -> f64 {
    (1.0 - SMOOTHING) * p + SMOOTHING * uniform
}

/// `KL(p ‖ q)` in nats after ε-smoothing both arguments.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Structure(format!(
            "distributions have {} and {} classes",
            p.len(),
            q.len()
        )));
    }
    Ok(kl_unchecked(p, q))
}

fn kl_unchecked(p: &[f64], q: &[f64]) -> f64 {
    let u = 1.0 / p.len() as f64;
    let kl: f64 = p
        .iter()
        .zip(q)
        .map(|(&pc, &qc)| {
            let ps = smooth(pc, u);
            ps * (ps / smooth(qc, u)).ln()
        })
        .sum();
    kl.max(0.0)
}

/// Shannon entropy in nats after ε-smoothing.
pub fn entropy(p: &[f64]) -> f64 {
    let u = 1.0 / p.len() as f64;
    let h: f64 = p
        .iter()
        .map(|&pc| {
            let ps = smooth(pc, u);
            -ps * ps.ln()
        })
        .sum();
    h.clamp(0.0, (p.len() as f64).ln())
}

/// Divergence and entropy of one point given the distributions gathered for
/// it. `own` is always part of the set, so the set is never empty.
pub fn score_distributions<'a>(
    own: &[f64],
    others: impl Iterator<Item = &'a [f64]>,
) -> (f64, f64) {
    let mut mean = own.to_vec();
    let mut kl_sum = 0.0;
    let mut count = 1usize;
    for q in others {
        kl_sum += kl_unchecked(own, q);
        for (m, v) in mean.iter_mut().zip(q) {
            *m += v;
        }
        count += 1;
    }
    let n = count as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    (kl_sum / n, entropy(&mean))
}

/// Scores of one point of frame `i`.
pub fn score_point(
    point: usize,
    own: &ProbabilityField,
    corr: &CorrespondenceMap,
    fields: &[ProbabilityField],
) -> (f64, f64) {
    let others = corr
        .matches(point)
        .iter()
        .map(|m| fields[m.frame as usize].row(m.point as usize));
    score_distributions(own.row(point), others)
}

/// Point-level scores of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameScores {
    pub frame_id: u32,
    pub fd: Vec<f64>,
    pub fe: Vec<f64>,
}

/// Scores every point of frame `i`; `fields` holds one field per frame of the sequence.
pub fn score_frame(
    i: usize,
    fields: &[ProbabilityField],
    corr: &CorrespondenceMap,
) -> Result<FrameScores> {
    let own = &fields[i];
    if corr.len() != own.len() {
        return Err(Error::Structure(format!(
            "frame {i}: correspondence map covers {} points, probabilities {}",
            corr.len(),
            own.len()
        )));
    }
    if let Some(&j) = corr.window.iter().find(|&&j| j as usize >= fields.len()) {
        return Err(Error::Structure(format!(
            "frame {i}: neighbour frame {j} has no probabilities"
        )));
    }
    let (fd, fe): (Vec<f64>, Vec<f64>) = (0..own.len())
        .into_par_iter()
        .map(|p| score_point(p, own, corr, fields))
        .unzip();
    Ok(FrameScores {
        frame_id: own.frame_id,
        fd,
        fe,
    })
}

pub fn score_sequence(
    fields: &[ProbabilityField],
    maps: &[CorrespondenceMap],
) -> Result<Vec<FrameScores>> {
    (0..fields.len())
        .into_par_iter()
        .map(|i| score_frame(i, fields, &maps[i]))
        .collect()
}

/// Region divergence and entropy: unweighted means over member points.
pub fn score_regions(
    scores: &[FrameScores],
    table: &RegionTable,
) -> Result<BTreeMap<RegionKey, (f64, f64)>> {
    if scores.len() != table.frames.len() {
        return Err(Error::Structure(format!(
            "{} scored frames but {} divided frames",
            scores.len(),
            table.frames.len()
        )));
    }
    let mut out = BTreeMap::new();
    for (f, (s, fr)) in scores.iter().zip(&table.frames).enumerate() {
        if s.fd.len() != fr.ids.len() {
            return Err(Error::Structure(format!(
                "frame {f}: {} scores for {} points",
                s.fd.len(),
                fr.ids.len()
            )));
        }
        for (r, region) in fr.regions.iter().enumerate() {
            let n = region.len() as f64;
            let fd: f64 = region.members.iter().map(|&m| s.fd[m as usize]).sum::<f64>() / n;
            let fe: f64 = region.members.iter().map(|&m| s.fe[m as usize]).sum::<f64>() / n;
            out.insert(RegionKey::new(f as u32, r as u32), (fd, fe));
        }
    }
    Ok(out)
}
