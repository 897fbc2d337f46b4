//! Greedy region selection for annotation and for pseudo-labeling.
//!
//! Active selection repeatedly takes the unlabeled region with the highest
//! divergence as anchor, gathers the regions overlapping it, labels the one
//! with the highest entropy and retires the whole overlapping set for the
//! rest of the round. Pseudo-label selection mirrors this with minima.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::config::{EngineConfig, PseudoStrategy, SelectionOrder};
use crate::error::{Error, Result};
use crate::regions::{corresponding_set, RegionTable};
use crate::scene::{ClassId, DatasetState, FrameSequence, ProbabilityField, RegionKey};

pub type RegionScores = BTreeMap<RegionKey, (f64, f64)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PickKind {
    Active,
    Pseudo,
}

impl fmt::Display for PickKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PickKind::Active => "active",
            PickKind::Pseudo => "pseudo",
        })
    }
}

impl FromStr for PickKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "active" => Ok(PickKind::Active),
            "pseudo" => Ok(PickKind::Pseudo),
            _ => Err(Error::Validation(format!("unknown pick kind '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Extremum {
    Max,
    Min,
}

/// One selected region and how it was reached.
#[derive(Debug, Clone, PartialEq)]
pub struct Pick {
    pub region: RegionKey,
    pub anchor: RegionKey,
    /// Regions retired together with this pick, including the pick itself.
    pub corresponding: Vec<RegionKey>,
    /// `(fd, fe)` of the picked region. Baselines store their unit score as
    /// `fd` and NaN as `fe`.
    pub scores: (f64, f64),
    pub anchor_scores: (f64, f64),
    /// Points selected by this record so far, this pick included.
    pub cum_points: usize,
    pub cum_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRecord {
    pub kind: PickKind,
    pub round: usize,
    pub points_total: usize,
    pub picks: Vec<Pick>,
    /// The pool ran dry before the budget was met.
    pub shortfall: bool,
}

impl SelectionRecord {
    pub fn empty(kind: PickKind, round: usize, points_total: usize) -> Self {
        SelectionRecord {
            kind,
            round,
            points_total,
            picks: Vec::new(),
            shortfall: false,
        }
    }

    pub fn regions(&self) -> Vec<RegionKey> {
        self.picks.iter().map(|p| p.region).collect()
    }

    pub fn selected_points(&self) -> usize {
        self.picks.last().map_or(0, |p| p.cum_points)
    }

    /// `round frame_id region_id kind fd fe cum_fraction`, one line per pick.
    pub fn to_text(&self) -> String {
        self.picks
            .iter()
            .map(|p| {
                format!(
                    "{} {} {} {} {} {} {}\n",
                    self.round,
                    p.region.frame,
                    p.region.region,
                    self.kind,
                    p.scores.0,
                    p.scores.1,
                    p.cum_fraction
                )
            })
            .collect()
    }
}

/// A parsed line of a selection output file.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordLine {
    pub round: usize,
    pub region: RegionKey,
    pub kind: PickKind,
    pub fd: f64,
    pub fe: f64,
    pub cum_fraction: f64,
}

pub fn parse_record_lines(text: &str) -> Result<Vec<RecordLine>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let bad = || Error::Validation(format!("selection line {}: malformed", i + 1));
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 7 {
                return Err(bad());
            }
            Ok(RecordLine {
                round: f[0].parse().map_err(|_| bad())?,
                region: RegionKey::new(f[1].parse().map_err(|_| bad())?, f[2].parse().map_err(|_| bad())?),
                kind: f[3].parse()?,
                fd: f[4].parse().map_err(|_| bad())?,
                fe: f[5].parse().map_err(|_| bad())?,
                cum_fraction: f[6].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

fn score_of(scores: &RegionScores, key: RegionKey) -> Result<(f64, f64)> {
    let s = scores
        .get(&key)
        .copied()
        .ok_or_else(|| Error::Structure(format!("no scores for region {key}")))?;
    if !s.0.is_finite() || !s.1.is_finite() {
        return Err(Error::Validation(format!("non-finite scores for region {key}")));
    }
    Ok(s)
}

/// Extremal region of `set` under `value`; ties go to the lowest key.
fn extremal(
    set: &BTreeSet<RegionKey>,
    scores: &RegionScores,
    value: impl Fn((f64, f64)) -> f64,
    ext: Extremum,
) -> Option<RegionKey> {
    let mut best: Option<(RegionKey, f64)> = None;
    for &k in set {
        let v = value(scores[&k]);
        let better = match best {
            None => true,
            Some((_, b)) => match ext {
                Extremum::Max => v > b,
                Extremum::Min => v < b,
            },
        };
        if better {
            best = Some((k, v));
        }
    }
    best.map(|(k, _)| k)
}

struct Greedy<'a> {
    scores: &'a RegionScores,
    table: &'a RegionTable,
    config: &'a EngineConfig,
    sizes: &'a DatasetState,
    ext: Extremum,
    order: SelectionOrder,
}

impl Greedy<'_> {
    fn run(&self, mut pool: BTreeSet<RegionKey>, target: f64, kind: PickKind, round: usize) -> Result<SelectionRecord> {
        for &k in &pool {
            score_of(self.scores, k)?;
        }
        let total = self.sizes.points_total();
        let mut record = SelectionRecord::empty(kind, round, total);
        let (anchor_value, winner_value): (fn((f64, f64)) -> f64, fn((f64, f64)) -> f64) = match self.order {
            SelectionOrder::DivergenceThenEntropy => (|s| s.0, |s| s.1),
            SelectionOrder::EntropyThenDivergence => (|s| s.1, |s| s.0),
        };
        let mut cum = 0usize;
        let mut reached = total == 0;
        while !reached {
            let Some(anchor) = extremal(&pool, self.scores, anchor_value, self.ext) else {
                break;
            };
            let set = corresponding_set(anchor, self.table, &pool, self.config);
            let winner = extremal(&set, self.scores, winner_value, self.ext)
                .expect("corresponding set contains its anchor");
            cum += self.sizes.region_size(winner);
            let cum_fraction = cum as f64 / total as f64;
            for k in &set {
                pool.remove(k);
            }
            record.picks.push(Pick {
                region: winner,
                anchor,
                corresponding: set.into_iter().collect(),
                scores: self.scores[&winner],
                anchor_scores: self.scores[&anchor],
                cum_points: cum,
                cum_fraction,
            });
            reached = cum_fraction >= target;
        }
        record.shortfall = !reached;
        Ok(record)
    }
}

/// Picks regions for annotation until the newly selected points reach
/// `x_active` of the dataset or no candidates remain. Pseudo-labeled regions
/// are candidates too: human labels take precedence. The state is not
/// modified; see [`simulate_annotation`] and [`apply_annotation`].
pub fn select_active(
    state: &DatasetState,
    scores: &RegionScores,
    table: &RegionTable,
    config: &EngineConfig,
    round: usize,
) -> Result<SelectionRecord> {
    let greedy = Greedy {
        scores,
        table,
        config,
        sizes: state,
        ext: Extremum::Max,
        order: config.order,
    };
    greedy.run(state.not_labeled(), config.x_active, PickKind::Active, round)
}

/// Candidate pool for pseudo-labeling under the configured strategy.
pub fn pseudo_pool(state: &DatasetState, strategy: PseudoStrategy) -> BTreeSet<RegionKey> {
    match strategy {
        PseudoStrategy::Replace => state.not_labeled(),
        PseudoStrategy::Accumulate | PseudoStrategy::ReplaceExcludingPrevious => state.unlabeled().clone(),
    }
}

/// Picks regions for pseudo-labeling with minima instead of maxima and
/// returns the arg-max class of each picked point as its pseudo-label.
pub fn select_pseudo(
    state: &DatasetState,
    scores: &RegionScores,
    table: &RegionTable,
    fields: &[ProbabilityField],
    config: &EngineConfig,
    round: usize,
) -> Result<(SelectionRecord, BTreeMap<RegionKey, Vec<ClassId>>)> {
    let greedy = Greedy {
        scores,
        table,
        config,
        sizes: state,
        ext: Extremum::Min,
        order: config.order,
    };
    let record = greedy.run(
        pseudo_pool(state, config.pseudo_strategy),
        config.pseudo_target,
        PickKind::Pseudo,
        round,
    )?;
    let mut labels = BTreeMap::new();
    for pick in &record.picks {
        let field = fields.get(pick.region.frame as usize).ok_or_else(|| {
            Error::Structure(format!("no probabilities for frame {}", pick.region.frame))
        })?;
        let region = table.region(pick.region);
        labels.insert(
            pick.region,
            region.members.iter().map(|&m| field.argmax(m as usize)).collect(),
        );
    }
    Ok((record, labels))
}

/// Installs a round's pseudo-labels according to the strategy.
pub fn apply_pseudo(
    state: &mut DatasetState,
    new: BTreeMap<RegionKey, Vec<ClassId>>,
    strategy: PseudoStrategy,
) -> Result<()> {
    let next = match strategy {
        PseudoStrategy::Accumulate => {
            let mut all = state.pseudo().clone();
            all.extend(new);
            all
        }
        PseudoStrategy::Replace | PseudoStrategy::ReplaceExcludingPrevious => new,
    };
    state.replace_pseudo(next)
}

/// Marks every picked region as labeled without reading any labels.
pub fn apply_annotation(record: &SelectionRecord, state: &mut DatasetState) {
    for pick in &record.picks {
        state.label(pick.region);
    }
}

/// Annotates picked regions with ground truth and marks them labeled.
pub fn simulate_annotation(
    record: &SelectionRecord,
    sequence: &FrameSequence,
    table: &RegionTable,
    state: &mut DatasetState,
) -> Result<BTreeMap<RegionKey, Vec<ClassId>>> {
    let mut out = BTreeMap::new();
    for pick in &record.picks {
        let frame = &sequence.frames[pick.region.frame as usize];
        let labels = frame.labels.as_ref().ok_or_else(|| {
            Error::Validation(format!(
                "frame {} has no ground-truth labels; supply labels/ or run without the annotation oracle",
                frame.frame_id
            ))
        })?;
        let region = table.region(pick.region);
        out.insert(
            pick.region,
            region.members.iter().map(|&m| labels[m as usize]).collect(),
        );
    }
    apply_annotation(record, state);
    Ok(out)
}
