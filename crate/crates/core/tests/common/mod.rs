//! Reference implementations and fixtures shared by the integration tests.
//! Every oracle here is written from the definitions with plain loops and
//! shares no code with the engine beyond its data types.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use lidal::config::{PseudoStrategy, SelectionOrder};
use lidal::regions::{FrameRegions, RegionInfo, RegionTable};
use lidal::registration::WorldFrame;
use lidal::scene::{ClassId, DatasetState, Frame, FrameSequence, Pose, ProbabilityField, RegionKey};
use lidal::selection::RegionScores;
use lidal::EngineConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- scoring

const EPS: f64 = 1e-6;

/// Divergence and entropy of one point from the definitions: smoothed KL of
/// the point's distribution against every member of its set (itself
/// included), averaged, and the smoothed entropy of the set's mean.
pub fn scalar_scores(own: &[f64], others: &[&[f64]]) -> (f64, f64) {
    let c = own.len();
    let s = |p: f64| (1.0 - EPS) * p + EPS / c as f64;
    let mut members: Vec<&[f64]> = vec![own];
    members.extend_from_slice(others);
    let mut kl_total = 0.0;
    for q in &members {
        let mut kl = 0.0;
        for k in 0..c {
            kl += s(own[k]) * (s(own[k]) / s(q[k])).ln();
        }
        kl_total += kl;
    }
    let fd = kl_total / members.len() as f64;
    let mut fe = 0.0;
    for k in 0..c {
        let mut m = 0.0;
        for q in &members {
            m += q[k];
        }
        m /= members.len() as f64;
        fe -= s(m) * s(m).ln();
    }
    (fd, fe)
}

// ---------------------------------------------------------------- windows and correspondences

/// Frames searched from frame `i`: `w / 2` before and the rest after.
pub fn window_oracle(i: usize, frames: usize, w: usize) -> Vec<usize> {
    (0..frames)
        .filter(|&j| (j < i && i - j <= w / 2) || (j > i && j - i <= w - w / 2))
        .collect()
}

/// All-pairs nearest neighbours within `threshold`: for every point of frame
/// `i`, one `(frame, point)` per window frame whose closest point (lowest
/// index on ties) is close enough.
pub fn brute_correspondences(frames: &[WorldFrame], i: usize, w: usize, threshold: f64) -> Vec<Vec<(u32, u32)>> {
    let window = window_oracle(i, frames.len(), w);
    frames[i]
        .points
        .iter()
        .map(|p| {
            let mut out = Vec::new();
            for &j in &window {
                let mut best = (f64::INFINITY, u32::MAX);
                for (q, x) in frames[j].points.iter().enumerate() {
                    let d = (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2) + (p[2] - x[2]).powi(2);
                    if d < best.0 {
                        best = (d, q as u32);
                    }
                }
                if best.1 != u32::MAX && best.0.sqrt() <= threshold {
                    out.push((j as u32, best.1));
                }
            }
            out
        })
        .collect()
}

/// A sequence of noisy overlapping views of one random cloud, so that many
/// points have partners in neighbouring frames.
pub fn random_sequence(rng: &mut ChaCha8Rng, frames: usize, max_points: usize) -> FrameSequence {
    let base: Vec<[f64; 3]> = (0..max_points)
        .map(|_| {
            [
                rng.random_range(0.0..8.0),
                rng.random_range(0.0..8.0),
                rng.random_range(0.0..2.0),
            ]
        })
        .collect();
    let mut out_frames = Vec::with_capacity(frames);
    let mut poses = Vec::with_capacity(frames);
    for f in 0..frames {
        let pose = Pose::from_yaw(
            rng.random_range(-0.4..0.4),
            [f as f64 * 0.5, rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0)],
        );
        let keep = rng.random_range(0.6..1.0);
        let noise = rng.random_range(0.0..0.06);
        let mut points: Vec<[f32; 3]> = Vec::with_capacity(base.len());
        for p in &base {
            if !rng.random_bool(keep) {
                continue;
            }
            let w = [
                p[0] + rng.random_range(-noise..=noise),
                p[1] + rng.random_range(-noise..=noise),
                p[2] + rng.random_range(-noise..=noise),
            ];
            points.push(pose.to_sensor(w).map(|v| v as f32));
        }
        out_frames.push(Frame::new(f as u32, points));
        poses.push(pose);
    }
    FrameSequence::new(out_frames, poses).expect("frames and poses agree")
}

/// A random class distribution: one-hot, near-uniform, peaked or generic.
pub fn random_row(rng: &mut ChaCha8Rng, c: usize) -> Vec<f64> {
    match rng.random_range(0..4) {
        0 => {
            let mut row = vec![0.0; c];
            row[rng.random_range(0..c)] = 1.0;
            row
        }
        1 => (0..c).map(|_| 1.0 + rng.random_range(-1e-3..1e-3)).collect(),
        2 => {
            let hot = rng.random_range(0..c);
            (0..c)
                .map(|k| if k == hot { 50.0 } else { rng.random_range(0.0..1.0) })
                .collect()
        }
        _ => (0..c).map(|_| rng.random_range(0.0..1.0)).collect(),
    }
}

pub fn random_field(rng: &mut ChaCha8Rng, frame_id: u32, n: usize, c: usize) -> ProbabilityField {
    let probs: Vec<f64> = (0..n).flat_map(|_| random_row(rng, c)).collect();
    ProbabilityField::from_rows(frame_id, c, probs).expect("valid rows")
}

// ---------------------------------------------------------------- constrained assignment

/// Minimum-cost assignment of points to `k` clusters with sizes in
/// `[lower, upper]`, by successive shortest paths: points enter one at a
/// time, each along a cheapest path that may reassign earlier points. The
/// lower bounds become a large negative reward on the first `lower` units
/// of every cluster. Returns the labels and their exact cost.
pub fn min_cost_assignment(costs: &[f64], k: usize, lower: usize, upper: usize) -> (Vec<u32>, f64) {
    let n = costs.len() / k;
    assert!(k * lower <= n && n <= k * upper, "infeasible instance");
    let c = |q: usize, a: usize| costs[q * k + a];
    let max_c = costs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let big = 4.0 * (k as f64 + 2.0) * (2.0 * max_c + 1.0);
    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    // moves[a][b] = cheapest (delta, point) for moving a point of a into b.
    let mut moves: Vec<Vec<(f64, usize)>> = vec![vec![(f64::INFINITY, usize::MAX); k]; k];
    let refresh = |a: usize, members: &Vec<Vec<usize>>, moves: &mut Vec<Vec<(f64, usize)>>| {
        for b in 0..k {
            let mut best = (f64::INFINITY, usize::MAX);
            if b != a {
                for &q in &members[a] {
                    let d = c(q, b) - c(q, a);
                    if d < best.0 {
                        best = (d, q);
                    }
                }
            }
            moves[a][b] = best;
        }
    };
    #[derive(Clone, Copy)]
    enum Pred {
        Source,
        Move(usize, usize),
        None,
    }
    for q in 0..n {
        let sink_cost = |a: usize, members: &Vec<Vec<usize>>| {
            let fill = members[a].len();
            if fill < lower {
                Some(-big)
            } else if fill < upper {
                Some(0.0)
            } else {
                None
            }
        };
        let mut dist: Vec<f64> = (0..k).map(|a| c(q, a)).collect();
        let mut pred = vec![Pred::Source; k];
        for _ in 0..=k {
            let mut changed = false;
            for a in 0..k {
                for b in 0..k {
                    let (d, p) = moves[a][b];
                    if p != usize::MAX && dist[a] + d < dist[b] - 1e-12 * big {
                        dist[b] = dist[a] + d;
                        pred[b] = Pred::Move(a, p);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut best: Option<(f64, usize)> = None;
        for a in 0..k {
            if let Some(s) = sink_cost(a, &members) {
                let v = dist[a] + s;
                if best.is_none_or(|(bv, _)| v < bv) {
                    best = Some((v, a));
                }
            }
        }
        let (_, mut at) = best.expect("capacity remains for every point");
        let mut touched = BTreeSet::new();
        let mut steps = 0;
        loop {
            touched.insert(at);
            match pred[at] {
                Pred::Source => {
                    label[q] = Some(at);
                    members[at].push(q);
                    break;
                }
                Pred::Move(from, p) => {
                    members[from].retain(|&x| x != p);
                    members[at].push(p);
                    label[p] = Some(at);
                    pred[at] = Pred::None;
                    at = from;
                }
                Pred::None => panic!("path revisits a cluster"),
            }
            steps += 1;
            assert!(steps <= k, "path longer than the cluster count");
        }
        for a in touched {
            refresh(a, &members, &mut moves);
        }
    }
    let labels: Vec<u32> = label.iter().map(|l| l.expect("every point placed") as u32).collect();
    for m in &members {
        assert!((lower..=upper).contains(&m.len()), "oracle broke the size band");
    }
    let cost = labels.iter().enumerate().map(|(q, &a)| c(q, a as usize)).sum();
    (labels, cost)
}

/// Exhaustive minimum over every labeling; for tiny instances only.
pub fn enumerate_assignment(costs: &[f64], k: usize, lower: usize, upper: usize) -> f64 {
    let n = costs.len() / k;
    let mut best = f64::INFINITY;
    let mut labels = vec![0usize; n];
    loop {
        let mut fill = vec![0usize; k];
        labels.iter().for_each(|&a| fill[a] += 1);
        if fill.iter().all(|f| (lower..=upper).contains(f)) {
            let cost: f64 = labels.iter().enumerate().map(|(q, &a)| costs[q * k + a]).sum();
            best = best.min(cost);
        }
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
    }
}

// ---------------------------------------------------------------- selection

/// A small selection problem with random layout, state and scores.
pub struct Instance {
    pub table: RegionTable,
    pub state: DatasetState,
    pub scores: RegionScores,
    pub fields: Vec<ProbabilityField>,
    pub config: EngineConfig,
}

/// Builds a table whose regions have the given sizes and centers; member
/// points are numbered consecutively within each frame.
pub fn table_from(frames: &[Vec<(usize, [f64; 3])>]) -> RegionTable {
    RegionTable {
        frames: frames
            .iter()
            .enumerate()
            .map(|(f, regions)| {
                let mut ids = Vec::new();
                let mut infos = Vec::new();
                for (r, &(size, center)) in regions.iter().enumerate() {
                    let start = ids.len() as u32;
                    ids.extend(std::iter::repeat_n(r as u32, size));
                    infos.push(RegionInfo {
                        members: (start..start + size as u32).collect(),
                        center,
                    });
                }
                FrameRegions {
                    frame_id: f as u32,
                    ids,
                    regions: infos,
                }
            })
            .collect(),
    }
}

/// Scores drawn from a coarse grid half of the time so that ties occur.
fn random_score(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random_bool(0.5) {
        f64::from(rng.random_range(0..6u8)) / 4.0
    } else {
        rng.random_range(0.0..2.0)
    }
}

pub fn random_instance(rng: &mut ChaCha8Rng, max_regions: usize) -> Instance {
    let frame_count = rng.random_range(1..=6);
    let per_frame = (max_regions / frame_count).max(1);
    let extent = rng.random_range(4.0..20.0);
    let layout: Vec<Vec<(usize, [f64; 3])>> = (0..frame_count)
        .map(|_| {
            (0..rng.random_range(1..=per_frame))
                .map(|_| {
                    (
                        rng.random_range(1..=20),
                        [rng.random_range(0.0..extent), rng.random_range(0.0..extent), 0.0],
                    )
                })
                .collect()
        })
        .collect();
    let table = table_from(&layout);
    let mut state = DatasetState::new(table.sizes()).expect("non-empty regions");
    let mut pseudo = BTreeMap::new();
    for key in table.keys() {
        match rng.random_range(0..10) {
            0 | 1 => {
                state.label(key);
            }
            2 | 3 => {
                pseudo.insert(key, vec![0 as ClassId; table.region(key).len()]);
            }
            _ => {}
        }
    }
    state.replace_pseudo(pseudo).expect("pseudo regions are unlabeled");
    let scores = table
        .keys()
        .map(|k| (k, (random_score(rng), random_score(rng))))
        .collect();
    let fields = table
        .frames
        .iter()
        .map(|fr| random_field(rng, fr.frame_id, fr.ids.len(), 3))
        .collect();
    let config = EngineConfig {
        class_count: 3,
        neighbor_window: rng.random_range(1..=4),
        overlap_radius: rng.random_range(1.0..8.0),
        x_active: rng.random_range(0.02..0.7),
        pseudo_target: rng.random_range(0.02..0.7),
        order: if rng.random_bool(0.5) {
            SelectionOrder::DivergenceThenEntropy
        } else {
            SelectionOrder::EntropyThenDivergence
        },
        pseudo_strategy: match rng.random_range(0..3) {
            0 => PseudoStrategy::Accumulate,
            1 => PseudoStrategy::Replace,
            _ => PseudoStrategy::ReplaceExcludingPrevious,
        },
        ..EngineConfig::default()
    };
    Instance {
        table,
        state,
        scores,
        fields,
        config,
    }
}

/// One pick of the reference greedy.
#[derive(Debug, Clone, PartialEq)]
pub struct OraclePick {
    pub region: RegionKey,
    pub anchor: RegionKey,
    pub set: Vec<RegionKey>,
    pub cum_points: usize,
}

/// Greedy selection by exhaustive re-scan. Every iteration recomputes the
/// extreme anchor value over the whole pool, takes the lowest key attaining
/// it, rebuilds the overlapping set by scanning every pool region, and picks
/// the extreme winner the same way. Returns the picks and whether the pool
/// ran dry before `target`.
pub fn greedy_oracle(
    inst: &Instance,
    mut pool: Vec<RegionKey>,
    target: f64,
    maximize: bool,
    order: SelectionOrder,
) -> (Vec<OraclePick>, bool) {
    let total: usize = inst.table.keys().map(|k| inst.table.region(k).len()).sum();
    let anchor_score = |k: &RegionKey| match order {
        SelectionOrder::DivergenceThenEntropy => inst.scores[k].0,
        SelectionOrder::EntropyThenDivergence => inst.scores[k].1,
    };
    let winner_score = |k: &RegionKey| match order {
        SelectionOrder::DivergenceThenEntropy => inst.scores[k].1,
        SelectionOrder::EntropyThenDivergence => inst.scores[k].0,
    };
    let extreme = |keys: &[RegionKey], f: &dyn Fn(&RegionKey) -> f64| -> RegionKey {
        let values: Vec<f64> = keys.iter().map(f).collect();
        let target = if maximize {
            values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        } else {
            values.iter().copied().fold(f64::INFINITY, f64::min)
        };
        let mut sorted: Vec<(RegionKey, f64)> = keys.iter().copied().zip(values).collect();
        sorted.sort_by_key(|(k, _)| *k);
        sorted.into_iter().find(|(_, v)| *v == target).expect("non-empty").0
    };
    let w = inst.config.neighbor_window;
    let r = inst.config.overlap_radius;
    let mut picks = Vec::new();
    let mut cum = 0usize;
    let mut reached = total == 0;
    while !reached && !pool.is_empty() {
        let anchor = extreme(&pool, &anchor_score);
        let ac = inst.table.region(anchor).center;
        let (af, frames) = (anchor.frame as usize, inst.table.frames.len());
        let mut set: Vec<RegionKey> = pool
            .iter()
            .copied()
            .filter(|k| {
                let kc = inst.table.region(*k).center;
                let d = (kc[0] - ac[0]).powi(2) + (kc[1] - ac[1]).powi(2) + (kc[2] - ac[2]).powi(2);
                let near = k.frame as usize == af || window_oracle(af, frames, w).contains(&(k.frame as usize));
                near && d <= r * r
            })
            .collect();
        if !set.contains(&anchor) {
            set.push(anchor);
        }
        set.sort();
        let winner = extreme(&set, &winner_score);
        cum += inst.table.region(winner).len();
        pool.retain(|k| !set.contains(k));
        picks.push(OraclePick {
            region: winner,
            anchor,
            set,
            cum_points: cum,
        });
        reached = cum as f64 / total as f64 >= target;
    }
    (picks, !reached)
}

/// Candidate pool of the pseudo-label selection under `strategy`.
pub fn pseudo_pool_oracle(state: &DatasetState, strategy: PseudoStrategy) -> Vec<RegionKey> {
    state
        .regions()
        .map(|(k, _)| *k)
        .filter(|k| match strategy {
            PseudoStrategy::Replace => !state.labeled().contains(k),
            _ => !state.labeled().contains(k) && !state.pseudo().contains_key(k),
        })
        .collect()
}

// ---------------------------------------------------------------- baselines

pub fn margin_oracle(row: &[f64]) -> f64 {
    let mut sorted = row.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    if sorted.len() < 2 {
        sorted[0]
    } else {
        sorted[0] - sorted[1]
    }
}

pub fn confidence_oracle(row: &[f64]) -> f64 {
    let mut sorted = row.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted[0]
}

pub fn entropy_oracle(row: &[f64]) -> f64 {
    let mut h = 0.0;
    for &p in row {
        if p > 0.0 {
            h -= p * p.ln();
        }
    }
    h
}

/// Point-weighted mean over regions of the entropy of each region's
/// arg-max label histogram.
pub fn segment_entropy_oracle(field: &ProbabilityField, members: &[Vec<u32>]) -> f64 {
    let c = field.class_count();
    let mut weighted = 0.0;
    let mut n = 0usize;
    for region in members {
        let mut hist = vec![0usize; c];
        for &m in region {
            let row = field.row(m as usize);
            let mut best = 0;
            for k in 1..c {
                if row[k] > row[best] {
                    best = k;
                }
            }
            hist[best] += 1;
        }
        let mut h = 0.0;
        for &count in &hist {
            if count > 0 {
                let q = count as f64 / region.len() as f64;
                h -= q * q.ln();
            }
        }
        weighted += h * region.len() as f64;
        n += region.len();
    }
    weighted / n as f64
}

/// Furthest-point sampling order over `open` frames, recomputing every
/// distance from scratch at each step. `covered` seeds the selected set.
pub fn fps_oracle(rows: &[Vec<f64>], covered: &[usize], open: &[usize]) -> Vec<usize> {
    let dist = |a: usize, b: usize| {
        rows[a]
            .iter()
            .zip(&rows[b])
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let mut chosen: Vec<usize> = covered.to_vec();
    let mut order = Vec::new();
    let mut left: Vec<usize> = open.to_vec();
    while !left.is_empty() {
        let score = |f: usize| chosen.iter().map(|&c| dist(f, c)).fold(f64::INFINITY, f64::min);
        let best_value = left.iter().map(|&f| score(f)).fold(f64::NEG_INFINITY, f64::max);
        let pos = left.iter().position(|&f| score(f) == best_value).expect("non-empty");
        let f = left.remove(pos);
        chosen.push(f);
        order.push(f);
    }
    order
}
