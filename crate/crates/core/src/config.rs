//! Engine configuration shared by every pipeline stage.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which score picks the anchor region and which picks the winner inside
/// its corresponding set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionOrder {
    /// Anchor by inter-frame divergence, winner by inter-frame entropy.
    #[default]
    DivergenceThenEntropy,
    /// Anchor by entropy, winner by divergence. Kept for ablations.
    EntropyThenDivergence,
}

/// How the pseudo-label set evolves between rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PseudoStrategy {
    /// Grow the set with each round's new picks.
    Accumulate,
    /// Rebuild the set each round; previous members may be picked again.
    Replace,
    /// Rebuild the set each round from regions that were not in the previous set.
    #[default]
    ReplaceExcludingPrevious,
}

impl FromStr for SelectionOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fd_fe" | "fd-fe" => Ok(SelectionOrder::DivergenceThenEntropy),
            "fe_fd" | "fe-fd" => Ok(SelectionOrder::EntropyThenDivergence),
            _ => Err(Error::Config(format!(
                "unknown selection order '{s}' (expected fd_fe or fe_fd)"
            ))),
        }
    }
}

impl fmt::Display for SelectionOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectionOrder::DivergenceThenEntropy => f.write_str("fd_fe"),
            SelectionOrder::EntropyThenDivergence => f.write_str("fe_fd"),
        }
    }
}

impl FromStr for PseudoStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s1" => Ok(PseudoStrategy::Accumulate),
            "s2" => Ok(PseudoStrategy::Replace),
            "s3" => Ok(PseudoStrategy::ReplaceExcludingPrevious),
            _ => Err(Error::Config(format!(
                "unknown pseudo strategy '{s}' (expected s1, s2 or s3)"
            ))),
        }
    }
}

impl fmt::Display for PseudoStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PseudoStrategy::Accumulate => f.write_str("s1"),
            PseudoStrategy::Replace => f.write_str("s2"),
            PseudoStrategy::ReplaceExcludingPrevious => f.write_str("s3"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub class_count: usize,
    /// Number of augmented inference runs averaged per frame.
    pub augmented_runs: usize,
    /// Number of neighbouring frames searched for correspondences.
    pub neighbor_window: usize,
    /// Maximum correspondence distance in meters.
    pub correspondence_threshold: f64,
    pub regions_per_frame: usize,
    /// Relative tolerance on region sizes around `|F| / K`.
    pub size_band: f64,
    /// Maximum weight-center distance, in meters, for two regions to overlap.
    pub overlap_radius: f64,
    pub x_init: f64,
    pub x_active: f64,
    pub rounds: usize,
    pub pseudo_target: f64,
    pub seed: u64,
    pub order: SelectionOrder,
    pub pseudo_strategy: PseudoStrategy,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            class_count: 19,
            augmented_runs: 8,
            neighbor_window: 24,
            correspondence_threshold: 0.1,
            regions_per_frame: 20,
            size_band: 0.05,
            overlap_radius: 5.0,
            x_init: 0.01,
            x_active: 0.01,
            rounds: 4,
            pseudo_target: 0.01,
            seed: 0,
            order: SelectionOrder::default(),
            pseudo_strategy: PseudoStrategy::default(),
        }
    }
}

/// Names accepted by [`EngineConfig::set`], in the order they are echoed.
pub const CONFIG_KEYS: &[&str] = &[
    "classes",
    "runs",
    "n_nei",
    "t_p",
    "k",
    "rho",
    "t_r",
    "x_init",
    "x_active",
    "rounds",
    "pseudo_target",
    "seed",
    "order",
    "pseudo_strategy",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for key '{key}'")))
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.class_count < 2 {
            return fail("class count must be at least 2");
        }
        if self.class_count > u16::MAX as usize {
            return fail("class count must fit in 16 bits");
        }
        if self.augmented_runs < 1 {
            return fail("augmented runs must be at least 1");
        }
        if self.neighbor_window < 1 {
            return fail("neighbor window must be at least 1");
        }
        if !(self.correspondence_threshold > 0.0 && self.correspondence_threshold.is_finite()) {
            return fail("correspondence threshold must be positive");
        }
        if self.regions_per_frame < 1 {
            return fail("regions per frame must be at least 1");
        }
        if !(0.0..1.0).contains(&self.size_band) {
            return fail("size band must lie in [0, 1)");
        }
        if !(self.overlap_radius > 0.0 && self.overlap_radius.is_finite()) {
            return fail("overlap radius must be positive");
        }
        for (name, v) in [
            ("x_init", self.x_init),
            ("x_active", self.x_active),
            ("pseudo_target", self.pseudo_target),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        Ok(())
    }

    /// Sets one key from its textual form. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        match key.as_str() {
            "classes" | "class_count" => self.class_count = parse(&key, value)?,
            "runs" | "augmented_runs" => self.augmented_runs = parse(&key, value)?,
            "n_nei" | "neighbor_window" => self.neighbor_window = parse(&key, value)?,
            "t_p" | "correspondence_threshold" => self.correspondence_threshold = parse(&key, value)?,
            "k" | "regions_per_frame" => self.regions_per_frame = parse(&key, value)?,
            "rho" | "size_band" => self.size_band = parse(&key, value)?,
            "t_r" | "overlap_radius" => self.overlap_radius = parse(&key, value)?,
            "x_init" => self.x_init = parse(&key, value)?,
            "x_active" => self.x_active = parse(&key, value)?,
            "rounds" => self.rounds = parse(&key, value)?,
            "pseudo_target" => self.pseudo_target = parse(&key, value)?,
            "seed" => self.seed = parse(&key, value)?,
            "order" => self.order = value.trim().parse()?,
            "pseudo_strategy" => self.pseudo_strategy = value.trim().parse()?,
            _ => return Err(Error::Config(format!("unknown configuration key '{key}'"))),
        }
        Ok(())
    }

    /// Renders the configuration as `key = value` lines readable by [`EngineConfig::set`].
    pub fn to_text(&self) -> String {
        let values = [
            self.class_count.to_string(),
            self.augmented_runs.to_string(),
            self.neighbor_window.to_string(),
            self.correspondence_threshold.to_string(),
            self.regions_per_frame.to_string(),
            self.size_band.to_string(),
            self.overlap_radius.to_string(),
            self.x_init.to_string(),
            self.x_active.to_string(),
            self.rounds.to_string(),
            self.pseudo_target.to_string(),
            self.seed.to_string(),
            self.order.to_string(),
            self.pseudo_strategy.to_string(),
        ];
        CONFIG_KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Region size bounds `(N_min, N_max)` for a frame of `n` points.
    ///
    /// Bounds are rounded toward feasibility: floor on the lower bound,
    /// ceiling on the upper. A relative slack of 1e-9 absorbs the binary
    /// representation error of `ρ` so that, e.g., `0.95 * 100` floors to 95.
    pub fn size_bounds(&self, n: usize) -> (usize, usize) {
        let k = self.regions_per_frame as f64;
        let lower = (1.0 - self.size_band) * n as f64 / k;
        let upper = (1.0 + self.size_band) * n as f64 / k;
        let lower = (lower * (1.0 + 1e-9)).floor() as usize;
        let upper = (upper * (1.0 - 1e-9)).ceil() as usize;
        (lower, upper)
    }
}
