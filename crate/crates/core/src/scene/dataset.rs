use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ClassId;
use crate::config::EngineConfig;
use crate::error::{Error, Result};

/// A region of a frame: the atomic labeling unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RegionKey {
    pub frame: u32,
    pub region: u32,
}

impl RegionKey {
    pub const fn new(frame: u32, region: u32) -> Self {
        RegionKey { frame, region }
    }
}

impl fmt::Display for RegionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.frame, self.region)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionStatus {
    Labeled,
    Unlabeled,
    Pseudo,
}

/// The evolving split of a training sequence at region granularity.
///
/// Every region is in exactly one of the labeled, unlabeled or pseudo sets.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetState {
    sizes: BTreeMap<RegionKey, usize>,
    labeled: BTreeSet<RegionKey>,
    unlabeled: BTreeSet<RegionKey>,
    pseudo: BTreeMap<RegionKey, Vec<ClassId>>,
    points_total: usize,
    points_labeled: usize,
    /// Set when the initial draw exhausted the dataset before reaching `x_init`.
    pub saturated: bool,
}

impl DatasetState {
    /// All regions start unlabeled.
    pub fn new(sizes: BTreeMap<RegionKey, usize>) -> Result<Self> {
        if let Some((k, _)) = sizes.iter().find(|(_, &n)| n == 0) {
            return Err(Error::Validation(format!("region {k} is empty")));
        }
        let points_total = sizes.values().sum();
        Ok(DatasetState {
            unlabeled: sizes.keys().copied().collect(),
            sizes,
            labeled: BTreeSet::new(),
            pseudo: BTreeMap::new(),
            points_total,
            points_labeled: 0,
            saturated: false,
        })
    }

    /// Draws whole frames uniformly without replacement until the labeled
    /// fraction reaches `x_init`; the frame that crosses the threshold is kept.
    pub fn init(sizes: BTreeMap<RegionKey, usize>, config: &EngineConfig, seed: u64) -> Result<Self> {
        let mut state = Self::new(sizes)?;
        let mut frames: Vec<u32> = state.frames().into_iter().collect();
        frames.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut reached = state.points_total == 0;
        for frame in frames {
            if reached {
                break;
            }
            for key in state.frame_regions(frame) {
                state.label(key);
            }
            reached = state.labeled_fraction() >= config.x_init;
        }
        state.saturated = !reached || state.unlabeled.is_empty();
        Ok(state)
    }

    pub fn frames(&self) -> BTreeSet<u32> {
        self.sizes.keys().map(|k| k.frame).collect()
    }

    pub fn frame_regions(&self, frame: u32) -> Vec<RegionKey> {
        self.sizes
            .range(RegionKey::new(frame, 0)..=RegionKey::new(frame, u32::MAX))
            .map(|(k, _)| *k)
            .collect()
    }

    pub fn regions(&self) -> impl Iterator<Item = (&RegionKey, &usize)> {
        self.sizes.iter()
    }

    pub fn region_size(&self, key: RegionKey) -> usize {
        self.sizes.get(&key).copied().unwrap_or(0)
    }

    pub fn status(&self, key: RegionKey) -> Option<RegionStatus> {
        if self.labeled.contains(&key) {
            Some(RegionStatus::Labeled)
        } else if self.pseudo.contains_key(&key) {
            Some(RegionStatus::Pseudo)
        } else if self.unlabeled.contains(&key) {
            Some(RegionStatus::Unlabeled)
        } else {
            None
        }
    }

    pub fn labeled(&self) -> &BTreeSet<RegionKey> {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &BTreeSet<RegionKey> {
        &self.unlabeled
    }

    pub fn pseudo(&self) -> &BTreeMap<RegionKey, Vec<ClassId>> {
        &self.pseudo
    }

    /// Regions without human labels: the unlabeled and pseudo sets together.
    pub fn not_labeled(&self) -> BTreeSet<RegionKey> {
        self.unlabeled
            .iter()
            .chain(self.pseudo.keys())
            .copied()
            .collect()
    }

    pub fn points_total(&self) -> usize {
        self.points_total
    }

    pub fn points_labeled(&self) -> usize {
        self.points_labeled
    }

    pub fn points_pseudo(&self) -> usize {
        self.pseudo.keys().map(|k| self.sizes[k]).sum()
    }

    pub fn labeled_fraction(&self) -> f64 {
        if self.points_total == 0 {
            return 0.0;
        }
        self.points_labeled as f64 / self.points_total as f64
    }

    /// Moves a region to the labeled set. Human labels override pseudo-labels.
    /// Returns false when the region was already labeled or is unknown.
    pub fn label(&mut self, key: RegionKey) -> bool {
        if !self.sizes.contains_key(&key) || self.labeled.contains(&key) {
            return false;
        }
        self.unlabeled.remove(&key);
        self.pseudo.remove(&key);
        self.labeled.insert(key);
        self.points_labeled += self.sizes[&key];
        true
    }

    /// Replaces the pseudo set. Previous members that are not kept return to
    /// the unlabeled set.
    pub fn replace_pseudo(&mut self, pseudo: BTreeMap<RegionKey, Vec<ClassId>>) -> Result<()> {
        for (key, labels) in &pseudo {
            let Some(&size) = self.sizes.get(key) else {
                return Err(Error::Validation(format!("unknown pseudo region {key}")));
            };
            if self.labeled.contains(key) {
                return Err(Error::Validation(format!(
                    "region {key} is human-labeled and cannot be pseudo-labeled"
                )));
            }
            if labels.len() != size {
                return Err(Error::Structure(format!(
                    "pseudo region {key}: {} labels for {size} points",
                    labels.len()
                )));
            }
        }
        let previous = std::mem::take(&mut self.pseudo);
        self.unlabeled.extend(previous.into_keys());
        for key in pseudo.keys() {
            self.unlabeled.remove(key);
        }
        self.pseudo = pseudo;
        Ok(())
    }

    /// Checks disjointness, coverage and the labeled point count.
    pub fn audit(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Validation(m));
        for key in &self.labeled {
            if self.unlabeled.contains(key) || self.pseudo.contains_key(key) {
                return fail(format!("region {key} is labeled and also unlabeled or pseudo"));
            }
        }
        for key in self.pseudo.keys() {
            if self.unlabeled.contains(key) {
                return fail(format!("region {key} is both pseudo and unlabeled"));
            }
        }
        let covered = self.labeled.len() + self.unlabeled.len() + self.pseudo.len();
        if covered != self.sizes.len() {
            return fail(format!(
                "{covered} regions accounted for but {} exist",
                self.sizes.len()
            ));
        }
        for key in self.labeled.iter().chain(&self.unlabeled).chain(self.pseudo.keys()) {
            if !self.sizes.contains_key(key) {
                return fail(format!("unknown region {key}"));
            }
        }
        let counted: usize = self.labeled.iter().map(|k| self.sizes[k]).sum();
        if counted != self.points_labeled {
            return fail(format!(
                "labeled point count {} disagrees with region sizes {counted}",
                self.points_labeled
            ));
        }
        if self.sizes.values().sum::<usize>() != self.points_total {
            return fail("total point count disagrees with region sizes".into());
        }
        Ok(())
    }

    /// Text form: a `total` line, then one `<status> <frame> <region> <size>`
    /// line per region. Pseudo-label arrays are stored separately.
    pub fn to_text(&self) -> String {
        let mut out = format!("total {} labeled {}\n", self.points_total, self.points_labeled);
        for (key, size) in &self.sizes {
            let status = match self.status(*key) {
                Some(RegionStatus::Labeled) => "labeled",
                Some(RegionStatus::Pseudo) => "pseudo",
                _ => "unlabeled",
            };
            out.push_str(&format!("{status} {} {} {size}\n", key.frame, key.region));
        }
        out
    }

    /// Parses [`DatasetState::to_text`]. Pseudo regions come back with the
    /// labels supplied by `pseudo_labels`.
    pub fn from_text(
        path: &Path,
        text: &str,
        mut pseudo_labels: impl FnMut(RegionKey, usize) -> Result<Vec<ClassId>>,
    ) -> Result<Self> {
        let bad = |line: usize, m: &str| {
            Error::Validation(format!("{} line {}: {m}", path.display(), line + 1))
        };
        let mut lines = text.lines().enumerate();
        let (_, head) = lines.next().ok_or_else(|| bad(0, "empty state file"))?;
        let head: Vec<&str> = head.split_whitespace().collect();
        let (total, labeled_count) = match head.as_slice() {
            ["total", t, "labeled", l] => (
                t.parse::<usize>().map_err(|_| bad(0, "invalid total"))?,
                l.parse::<usize>().map_err(|_| bad(0, "invalid labeled count"))?,
            ),
            _ => return Err(bad(0, "expected 'total <n> labeled <n>'")),
        };
        let mut sizes = BTreeMap::new();
        let mut labeled = BTreeSet::new();
        let mut unlabeled = BTreeSet::new();
        let mut pseudo = BTreeMap::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [status, f, r, n] = fields.as_slice() else {
                return Err(bad(i, "expected '<status> <frame> <region> <size>'"));
            };
            let key = RegionKey::new(
                f.parse().map_err(|_| bad(i, "invalid frame id"))?,
                r.parse().map_err(|_| bad(i, "invalid region id"))?,
            );
            let size: usize = n.parse().map_err(|_| bad(i, "invalid size"))?;
            if sizes.insert(key, size).is_some() {
                return Err(bad(i, "duplicate region"));
            }
            match *status {
                "labeled" => {
                    labeled.insert(key);
                }
                "unlabeled" => {
                    unlabeled.insert(key);
                }
                "pseudo" => {
                    pseudo.insert(key, pseudo_labels(key, size)?);
                }
                _ => return Err(bad(i, "unknown status")),
            }
        }
        Ok(DatasetState {
            sizes,
            labeled,
            unlabeled,
            pseudo,
            points_total: total,
            points_labeled: labeled_count,
            saturated: false,
        })
    }
}
