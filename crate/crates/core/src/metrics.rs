//! Segmentation quality and selection diagnostics.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::regions::RegionTable;
use crate::scene::{ClassId, FrameSequence, RegionKey};
use crate::selection::SelectionRecord;

/// Rows are ground truth, columns are predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    class_count: usize,
    ignore: Option<ClassId>,
    counts: Vec<u64>,
}

const PAR_CHUNK: usize = 1 << 16;

impl ConfusionMatrix {
    pub fn new(class_count: usize, ignore: Option<ClassId>) -> Self {
        ConfusionMatrix {
            class_count,
            ignore,
            counts: vec![0; class_count * class_count],
        }
    }

    pub fn from_labels(class_count: usize, ignore: Option<ClassId>, gt: &[ClassId], pred: &[ClassId]) -> Result<Self> {
        let mut cm = Self::new(class_count, ignore);
        cm.accumulate(gt, pred)?;
        Ok(cm)
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn ignore(&self) -> Option<ClassId> {
        self.ignore
    }

    pub fn get(&self, gt: ClassId, pred: ClassId) -> u64 {
        self.counts[gt as usize * self.class_count + pred as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.class_count).all(|g| (0..self.class_count).all(|p| g == p || self.counts[g * self.class_count + p] == 0))
    }

    fn check(&self, what: &str, labels: &[ClassId], offset: usize) -> Result<()> {
        match labels.iter().position(|&l| l as usize >= self.class_count) {
            Some(i) => Err(Error::Validation(format!(
                "{what} label {} at index {} is not below the class count {}",
                labels[i],
                offset + i,
                self.class_count
            ))),
            None => Ok(()),
        }
    }

    fn accumulate_serial(&mut self, gt: &[ClassId], pred: &[ClassId]) {
        for (&g, &p) in gt.iter().zip(pred) {
            if Some(g) != self.ignore {
                self.counts[g as usize * self.class_count + p as usize] += 1;
            }
        }
    }

    /// Adds one label pair per point, skipping points whose ground truth is
    /// the ignore class. Large inputs are counted in parallel chunks.
    pub fn accumulate(&mut self, gt: &[ClassId], pred: &[ClassId]) -> Result<()> {
        if gt.len() != pred.len() {
            return Err(Error::Structure(format!(
                "{} ground-truth labels but {} predictions",
                gt.len(),
                pred.len()
            )));
        }
        self.check("ground-truth", gt, 0)?;
        self.check("predicted", pred, 0)?;
        if gt.len() <= PAR_CHUNK {
            self.accumulate_serial(gt, pred);
            return Ok(());
        }
        let (c, ignore) = (self.class_count, self.ignore);
        let part = gt
            .par_chunks(PAR_CHUNK)
            .zip(pred.par_chunks(PAR_CHUNK))
            .map(|(g, p)| {
                let mut cm = ConfusionMatrix::new(c, ignore);
                cm.accumulate_serial(g, p);
                cm
            })
            .reduce(|| ConfusionMatrix::new(c, ignore), |mut a, b| {
                a.merge(&b);
                a
            });
        self.merge(&part);
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.class_count, other.class_count, "merging matrices of different sizes");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    /// Per-class IoU; `None` where the class never occurs in either role or
    /// is the ignore class.
    pub fn iou(&self) -> Vec<Option<f64>> {
        let c = self.class_count;
        (0..c)
            .map(|k| {
                if Some(k as ClassId) == self.ignore {
                    return None;
                }
                let tp = self.counts[k * c + k];
                let fn_: u64 = (0..c).map(|p| self.counts[k * c + p]).sum::<u64>() - tp;
                let fp: u64 = (0..c).map(|g| self.counts[g * c + k]).sum::<u64>() - tp;
                let denom = tp + fp + fn_;
                (denom > 0).then(|| tp as f64 / denom as f64)
            })
            .collect()
    }

    pub fn miou(&self) -> MiouReport {
        let per_class = self.iou();
        let present: Vec<f64> = per_class.iter().flatten().copied().collect();
        let miou = (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64);
        MiouReport { miou, per_class }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiouReport {
    /// `None` when no class has a non-zero denominator.
    pub miou: Option<f64>,
    pub per_class: Vec<Option<f64>>,
}

impl MiouReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{:.4}", x));
        let _ = writeln!(out, "{:<8} {:>8}", "class", "iou");
        for (c, v) in self.per_class.iter().enumerate() {
            let _ = writeln!(out, "{:<8} {:>8}", c, fmt(*v));
        }
        let _ = writeln!(out, "{:<8} {:>8}", "mean", fmt(self.miou));
        out
    }

    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        let mut out = String::from("class,iou\n");
        for (c, v) in self.per_class.iter().enumerate() {
            let _ = writeln!(out, "{c},{}", fmt(*v));
        }
        let _ = writeln!(out, "mean,{}", fmt(self.miou));
        out
    }
}

/// Ground-truth labels of one region's member points.
pub fn region_labels(sequence: &FrameSequence, table: &RegionTable, key: RegionKey) -> Result<Vec<ClassId>> {
    let frame = sequence
        .frames
        .get(key.frame as usize)
        .ok_or_else(|| Error::Structure(format!("no frame {}", key.frame)))?;
    let labels = frame
        .labels
        .as_ref()
        .ok_or_else(|| Error::Validation(format!("frame {} has no ground-truth labels", frame.frame_id)))?;
    let region = table
        .get(key)
        .ok_or_else(|| Error::Structure(format!("no region {key}")))?;
    Ok(region.members.iter().map(|&m| labels[m as usize]).collect())
}

/// Per-mille share of each class among the points of the picked regions.
pub fn class_distribution(
    record: &SelectionRecord,
    truth: impl Fn(RegionKey) -> Result<Vec<ClassId>>,
    class_count: usize,
) -> Result<Vec<f64>> {
    let mut counts = vec![0u64; class_count];
    for pick in &record.picks {
        for l in truth(pick.region)? {
            *counts.get_mut(l as usize).ok_or_else(|| {
                Error::Validation(format!("label {l} in region {} is not below {class_count}", pick.region))
            })? += 1;
        }
    }
    let total: u64 = counts.iter().sum();
    Ok(counts
        .iter()
        .map(|&c| if total == 0 { 0.0 } else { 1000.0 * c as f64 / total as f64 })
        .collect())
}

/// Correct and total pseudo-labeled points.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub correct: u64,
    pub total: u64,
}

impl Tally {
    pub fn accuracy(&self) -> Option<f64> {
        (self.total > 0).then(|| self.correct as f64 / self.total as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoAccuracy {
    pub overall: Tally,
    /// Band `b` holds picks whose cumulative fraction lies in
    /// `(b%, (b + 1)%]` of the dataset points.
    pub bands: BTreeMap<usize, Tally>,
}

/// Whole-percent band of a cumulative point count, upper edge inclusive.
pub fn percent_band(cum_points: usize, points_total: usize) -> usize {
    let scaled = cum_points as u128 * 100;
    let total = points_total.max(1) as u128;
    (scaled.div_ceil(total) as usize).saturating_sub(1)
}

pub fn pseudo_accuracy(
    record: &SelectionRecord,
    pseudo: &BTreeMap<RegionKey, Vec<ClassId>>,
    truth: impl Fn(RegionKey) -> Result<Vec<ClassId>>,
) -> Result<PseudoAccuracy> {
    let mut out = PseudoAccuracy {
        overall: Tally::default(),
        bands: BTreeMap::new(),
    };
    for pick in &record.picks {
        let guess = pseudo
            .get(&pick.region)
            .ok_or_else(|| Error::Structure(format!("no pseudo-labels for region {}", pick.region)))?;
        let gt = truth(pick.region)?;
        if gt.len() != guess.len() {
            return Err(Error::Structure(format!(
                "region {} has {} pseudo-labels for {} points",
                pick.region,
                guess.len(),
                gt.len()
            )));
        }
        let correct = gt.iter().zip(guess).filter(|(a, b)| a == b).count() as u64;
        let tally = Tally {
            correct,
            total: gt.len() as u64,
        };
        let band = out
            .bands
            .entry(percent_band(pick.cum_points, record.points_total))
            .or_default();
        band.correct += tally.correct;
        band.total += tally.total;
        out.overall.correct += tally.correct;
        out.overall.total += tally.total;
    }
    Ok(out)
}
