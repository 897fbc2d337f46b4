//! Comparison acquisition strategies: random frames or regions, segment
//! entropy, softmax margin, confidence and entropy, and feature-space
//! core-set selection.
//!
//! All strategies share the inclusive-stop budget used by LiDAL selection.
//! Frame-granular strategies label every not-yet-labeled region of a chosen
//! frame and emit one record line per region.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::regions::{FrameRegions, RegionTable};
use crate::scene::io::FrameFeatures;
use crate::scene::{ClassId, DatasetState, ProbabilityField, RegionKey};
use crate::selection::{Pick, PickKind, SelectionRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    RandFrames,
    RandRegions,
    SegmentEntropy,
    Margin,
    Confidence,
    Entropy,
    Coreset,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::RandFrames,
        Strategy::RandRegions,
        Strategy::SegmentEntropy,
        Strategy::Margin,
        Strategy::Confidence,
        Strategy::Entropy,
        Strategy::Coreset,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::RandFrames => "rand_fr",
            Strategy::RandRegions => "rand_re",
            Strategy::SegmentEntropy => "segent",
            Strategy::Margin => "mar",
            Strategy::Confidence => "conf",
            Strategy::Entropy => "ent",
            Strategy::Coreset => "cset",
        }
    }

    /// Direction of the score-ranked strategies; `None` for the others.
    pub fn direction(self) -> Option<Direction> {
        match self {
            Strategy::SegmentEntropy | Strategy::Entropy => Some(Direction::MaxFirst),
            Strategy::Margin | Strategy::Confidence => Some(Direction::MinFirst),
            _ => None,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown baseline strategy '{s}' (expected one of rand_fr, rand_re, segent, mar, conf, ent, cset)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    MaxFirst,
    MinFirst,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::MaxFirst => Direction::MinFirst,
            Direction::MinFirst => Direction::MaxFirst,
        }
    }
}

/// Largest minus second-largest probability.
pub fn point_margin(row: &[f64]) -> f64 {
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &p in row {
        if p > first {
            second = first;
            first = p;
        } else if p > second {
            second = p;
        }
    }
    if second.is_finite() {
        first - second
    } else {
        first
    }
}

pub fn point_confidence(row: &[f64]) -> f64 {
    row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Shannon entropy in nats with `0 ln 0 = 0`.
pub fn point_entropy(row: &[f64]) -> f64 {
    row.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum()
}

fn mean_over_points(field: &ProbabilityField, f: fn(&[f64]) -> f64) -> f64 {
    if field.is_empty() {
        return 0.0;
    }
    field.rows().map(f).sum::<f64>() / field.len() as f64
}

pub fn frame_margin(field: &ProbabilityField) -> f64 {
    mean_over_points(field, point_margin)
}

pub fn frame_confidence(field: &ProbabilityField) -> f64 {
    mean_over_points(field, point_confidence)
}

pub fn frame_entropy(field: &ProbabilityField) -> f64 {
    mean_over_points(field, point_entropy)
}

/// Entropy of the predicted-class histogram of one region.
pub fn region_label_entropy(labels: impl IntoIterator<Item = ClassId>, class_count: usize) -> f64 {
    let mut counts = vec![0usize; class_count];
    let mut n = 0usize;
    for l in labels {
        counts[l as usize] += 1;
        n += 1;
    }
    if n == 0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let q = c as f64 / n as f64;
            -q * q.ln()
        })
        .sum()
}

/// Point-weighted mean of the region label entropies of one frame.
pub fn segment_entropy(field: &ProbabilityField, regions: &FrameRegions) -> f64 {
    let predicted = field.predicted_labels();
    let mut total = 0.0;
    let mut n = 0usize;
    for region in &regions.regions {
        let e = region_label_entropy(
            region.members.iter().map(|&m| predicted[m as usize]),
            field.class_count(),
        );
        total += e * region.len() as f64;
        n += region.len();
    }
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

/// Per-frame scores of a score-ranked strategy.
pub fn frame_scores(strategy: Strategy, fields: &[ProbabilityField], table: &RegionTable) -> Result<Vec<f64>> {
    let scores: Vec<f64> = match strategy {
        Strategy::SegmentEntropy => {
            if fields.len() != table.frames.len() {
                return Err(Error::Structure(format!(
                    "{} probability fields for {} divided frames",
                    fields.len(),
                    table.frames.len()
                )));
            }
            fields
                .par_iter()
                .zip(&table.frames)
                .map(|(f, r)| segment_entropy(f, r))
                .collect()
        }
        Strategy::Margin => fields.par_iter().map(frame_margin).collect(),
        Strategy::Confidence => fields.par_iter().map(frame_confidence).collect(),
        Strategy::Entropy => fields.par_iter().map(frame_entropy).collect(),
        other => {
            return Err(Error::Config(format!("strategy {other} does not rank frames by score")));
        }
    };
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::Validation(format!("non-finite {strategy} score for frame {i}")));
    }
    Ok(scores)
}

/// A selectable unit: a frame's remaining regions or a single region.
#[derive(Debug, Clone)]
struct Unit {
    regions: Vec<RegionKey>,
    score: f64,
}

fn frame_units(state: &DatasetState) -> Vec<(u32, Vec<RegionKey>)> {
    state
        .frames()
        .into_iter()
        .filter_map(|f| {
            let open: Vec<RegionKey> = state
                .frame_regions(f)
                .into_iter()
                .filter(|k| !state.labeled().contains(k))
                .collect();
            (!open.is_empty()).then_some((f, open))
        })
        .collect()
}

/// Consumes units in order until the inclusive budget stop.
fn take_units(state: &DatasetState, units: impl IntoIterator<Item = Unit>, budget: f64, round: usize) -> SelectionRecord {
    let total = state.points_total();
    let mut record = SelectionRecord::empty(PickKind::Active, round, total);
    let mut cum = 0usize;
    let mut reached = total == 0;
    for unit in units {
        if reached {
            break;
        }
        let anchor = unit.regions[0];
        for &key in &unit.regions {
            cum += state.region_size(key);
            record.picks.push(Pick {
                region: key,
                anchor,
                corresponding: unit.regions.clone(),
                scores: (unit.score, f64::NAN),
                anchor_scores: (unit.score, f64::NAN),
                cum_points: cum,
                cum_fraction: cum as f64 / total as f64,
            });
        }
        reached = cum as f64 / total as f64 >= budget;
    }
    record.shortfall = !reached;
    record
}

/// Ranks open frames by `scores[frame]`; ties go to the lowest frame id.
pub fn select_ranked_frames(
    state: &DatasetState,
    scores: &[f64],
    direction: Direction,
    budget: f64,
    round: usize,
) -> Result<SelectionRecord> {
    let mut units = Vec::new();
    for (f, regions) in frame_units(state) {
        let score = *scores
            .get(f as usize)
            .ok_or_else(|| Error::Structure(format!("no score for frame {f}")))?;
        units.push((f, Unit { regions, score }));
    }
    units.sort_by(|(fa, a), (fb, b)| {
        let ord = match direction {
            Direction::MaxFirst => b.score.total_cmp(&a.score),
            Direction::MinFirst => a.score.total_cmp(&b.score),
        };
        ord.then(fa.cmp(fb))
    });
    Ok(take_units(state, units.into_iter().map(|(_, u)| u), budget, round))
}

/// Uniformly shuffled open frames.
pub fn rand_frames(state: &DatasetState, budget: f64, seed: u64, round: usize) -> SelectionRecord {
    let mut units: Vec<Unit> = frame_units(state)
        .into_iter()
        .map(|(_, regions)| Unit { regions, score: 0.0 })
        .collect();
    units.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    take_units(state, units, budget, round)
}

/// Uniformly shuffled unlabeled regions.
pub fn rand_regions(state: &DatasetState, budget: f64, seed: u64, round: usize) -> SelectionRecord {
    let mut units: Vec<Unit> = state
        .not_labeled()
        .into_iter()
        .map(|k| Unit {
            regions: vec![k],
            score: 0.0,
        })
        .collect();
    units.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    take_units(state, units, budget, round)
}

fn feature_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Furthest-point sampling in feature space. Fully labeled frames seed the
/// covered set; with none, every distance is infinite and the lowest open
/// frame goes first.
pub fn coreset_select(features: &FrameFeatures, state: &DatasetState, budget: f64, round: usize) -> Result<SelectionRecord> {
    let frames = state.frames();
    if let Some(&last) = frames.iter().next_back() {
        if last as usize >= features.frames() {
            return Err(Error::Config(format!(
                "feature file covers {} frames but the dataset has frame {last}",
                features.frames()
            )));
        }
    }
    let open = frame_units(state);
    let covered: Vec<u32> = frames
        .iter()
        .copied()
        .filter(|f| !open.iter().any(|(o, _)| o == f))
        .collect();
    let mut nearest: Vec<f64> = open
        .iter()
        .map(|(f, _)| {
            covered
                .iter()
                .map(|&c| feature_distance(features.row(*f as usize), features.row(c as usize)))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut taken = vec![false; open.len()];
    let mut order = Vec::with_capacity(open.len());
    for _ in 0..open.len() {
        let mut best: Option<usize> = None;
        for i in 0..open.len() {
            if !taken[i] && best.is_none_or(|b| nearest[i] > nearest[b]) {
                best = Some(i);
            }
        }
        let b = best.expect("an untaken frame remains");
        taken[b] = true;
        order.push(Unit {
            regions: open[b].1.clone(),
            score: nearest[b],
        });
        let row = features.row(open[b].0 as usize);
        for i in 0..open.len() {
            if !taken[i] {
                nearest[i] = nearest[i].min(feature_distance(features.row(open[i].0 as usize), row));
            }
        }
    }
    // FPS order is final before budgeting since later picks only shrink
    // distances of frames that remain unpicked.
    Ok(take_units(state, order, budget, round))
}

/// Inputs a baseline may need beyond the dataset state.
#[derive(Debug, Clone, Copy, Default)]
pub struct BaselineInputs<'a> {
    pub fields: Option<&'a [ProbabilityField]>,
    pub table: Option<&'a RegionTable>,
    pub features: Option<&'a FrameFeatures>,
}

/// Runs one round of `strategy` with budget `x_active`.
pub fn run_baseline(
    strategy: Strategy,
    state: &DatasetState,
    inputs: BaselineInputs<'_>,
    config: &EngineConfig,
    seed: u64,
    round: usize,
) -> Result<SelectionRecord> {
    let budget = config.x_active;
    match strategy {
        Strategy::RandFrames => Ok(rand_frames(state, budget, seed, round)),
        Strategy::RandRegions => Ok(rand_regions(state, budget, seed, round)),
        Strategy::Coreset => {
            let features = inputs
                .features
                .ok_or_else(|| Error::Config("cset needs a frame feature file".into()))?;
            coreset_select(features, state, budget, round)
        }
        ranked => {
            let fields = inputs
                .fields
                .ok_or_else(|| Error::Config(format!("{ranked} needs probability files")))?;
            let table = inputs
                .table
                .ok_or_else(|| Error::Config(format!("{ranked} needs a region division")))?;
            let scores = frame_scores(ranked, fields, table)?;
            let direction = ranked.direction().expect("ranked strategies have a direction");
            select_ranked_frames(state, &scores, direction, budget, round)
        }
    }
}
