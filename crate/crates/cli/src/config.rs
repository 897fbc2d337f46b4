//! Run configuration: engine parameters plus paths and harness settings,
//! merged from defaults, an optional `key = value` file and command-line flags.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use lidal::{EngineConfig, Error, Result};

/// Keys accepted besides the engine keys, in the order they are echoed.
pub const RUN_KEYS: &[&str] = &[
    "root",
    "state",
    "out",
    "round",
    "strategy",
    "features",
    "pred",
    "gt",
    "ignore",
    "frames",
    "points",
    "alpha",
    "beta",
    "gamma",
    "sigma",
    "patch_size",
    "predictor",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub engine: EngineConfig,
    /// Run keys that were set, by name.
    extra: Vec<(&'static str, String)>,
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for key '{key}'")))
}

impl RunConfig {
    pub fn new(engine: EngineConfig) -> Self {
        RunConfig {
            engine,
            extra: Vec::new(),
        }
    }

    /// Sets an engine or run key. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        if let Some(&name) = RUN_KEYS.iter().find(|k| **k == key) {
            let value = value.trim().to_string();
            match self.extra.iter_mut().find(|(k, _)| *k == name) {
                Some(slot) => slot.1 = value,
                None => self.extra.push((name, value)),
            }
            return Ok(());
        }
        self.engine.set(&key, value)
    }

    /// Applies every `key = value` line of `text`; `#` starts a comment.
    pub fn apply_text(&mut self, path: &Path, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("{} line {}: expected 'key = value'", path.display(), i + 1))
            })?;
            self.set(key, value)
                .map_err(|e| Error::Config(format!("{} line {}: {e}", path.display(), i + 1)))?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.extra
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(PathBuf::from)
    }

    pub fn require_path(&self, key: &str) -> Result<PathBuf> {
        self.path(key)
            .ok_or_else(|| Error::Config(format!("missing required setting '{key}' (use --{key})")))
    }

    pub fn number<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        self.get(key).map_or(Ok(default), |v| parse(key, v))
    }

    /// Directory for pipeline artifacts: `out`, falling back to `root`.
    pub fn work_dir(&self) -> Result<PathBuf> {
        match self.path("out") {
            Some(p) => Ok(p),
            None => self.require_path("root"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.engine.validate()?;
        for key in ["round", "frames", "points"] {
            self.number::<usize>(key, 0)?;
        }
        for key in ["alpha", "beta", "gamma", "sigma", "patch_size"] {
            self.number::<f64>(key, 0.0)?;
        }
        Ok(())
    }

    /// `key = value` lines: every engine key, then the run keys that were set.
    pub fn to_text(&self) -> String {
        let mut out = self.engine.to_text();
        for key in RUN_KEYS {
            if let Some(v) = self.get(key) {
                let _ = writeln!(out, "{key} = {v}");
            }
        }
        out
    }
}

