//! A stand-in for a trained segmentation network whose errors depend on how
//! much of each class has been labeled.
//!
//! Per point: start from the ground-truth class; swap it for the class's
//! confuser with probability `(1 − α)(1 − coverage)`, one draw per frame
//! and world-space patch so that errors form coherent blobs; swap whole boxes seen
//! from beyond their critical angle with probability `γ(1 − coverage)`; mix
//! the one-hot row toward uniform with weight `min(1, β·range)`; then, per
//! augmented run, add `|N(0, σ)|` to every entry and renormalize.
//!
//! The random draws depend only on the seed and the point, box, frame and
//! run indices, never on coverage, so predictions for different labeled
//! sets are directly comparable.

use std::f64::consts::PI;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::scene::{Scene, Surface};
use crate::error::{Error, Result};
use crate::regions::RegionTable;
use crate::scene::io::{prob_path, write_prob, FrameFeatures};
use crate::scene::{ClassId, DatasetState, ProbabilityField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MockPredictorParams {
    /// Accuracy at zero coverage.
    pub alpha: f64,
    /// Range-noise slope per meter.
    pub beta: f64,
    /// Viewpoint flip rate at zero coverage.
    pub gamma: f64,
    /// Per-run jitter scale.
    pub sigma: f64,
    /// Edge of the world-space cubes that share one confuser draw per
    /// frame; `0` draws per point.
    pub patch_size: f64,
    pub runs: usize,
    pub seed: u64,
}

impl Default for MockPredictorParams {
    fn default() -> Self {
        MockPredictorParams {
            alpha: 0.8,
            beta: 0.01,
            gamma: 0.5,
            sigma: 0.05,
            patch_size: 4.0,
            runs: 8,
            seed: 0,
        }
    }
}

impl MockPredictorParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) || !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config("alpha and gamma must lie in [0, 1]".into()));
        }
        if !(self.beta >= 0.0) || !(self.sigma >= 0.0) || !(self.patch_size >= 0.0) {
            return Err(Error::Config("beta, sigma and patch size must be non-negative".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("the predictor needs at least one run".into()));
        }
        Ok(())
    }

    /// Probability that a point of a class with this coverage keeps its true
    /// class before viewpoint flips and range mixing.
    pub fn expected_accuracy(&self, coverage: f64) -> f64 {
        1.0 - (1.0 - self.alpha) * (1.0 - coverage.clamp(0.0, 1.0))
    }
}

/// The class a given class is mistaken for.
pub fn confuser(class: ClassId, class_count: usize) -> ClassId {
    ((class as usize + 1) % class_count) as ClassId
}

const TAG_SWAP: u64 = 1;
const TAG_FLIP: u64 = 2;
const TAG_RUN: u64 = 3;

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic hash of a seed and up to three indices.
pub(crate) fn derive(seed: u64, tag: u64, a: u64, b: u64) -> u64 {
    mix(mix(mix(mix(seed) ^ tag) ^ a) ^ b)
}

fn unit(seed: u64, tag: u64, a: u64, b: u64) -> f64 {
    (derive(seed, tag, a, b) >> 11) as f64 / (1u64 << 53) as f64
}

fn wrap_angle(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    r.abs()
}

/// Whether box `b` is viewed from beyond its critical angle in frame `f`.
pub fn off_axis(scene: &Scene, b: usize, f: usize) -> bool {
    let bx = &scene.spec.boxes[b];
    let c = bx.center();
    let s = scene.spec.poses[f].translation;
    let azimuth = (c[1] - s[1]).atan2(c[0] - s[0]);
    wrap_angle(azimuth - bx.preferred_azimuth) > bx.critical_angle
}

/// Key of the confuser draw of point `p` in frame `f`.
fn patch(scene: &Scene, params: &MockPredictorParams, f: usize, p: usize) -> u64 {
    let id = scene.pool_ids[f][p];
    if params.patch_size <= 0.0 {
        return u64::from(id);
    }
    let cell = scene.pool[id as usize].map(|v| (v / params.patch_size).floor() as i64);
    derive(cell[0] as u64, TAG_SWAP, cell[1] as u64, cell[2] as u64)
}

/// Predicted class of every point of frame `f` before range mixing.
pub fn predicted_classes(scene: &Scene, params: &MockPredictorParams, coverage: &[f64], f: usize) -> Vec<ClassId> {
    let c = scene.spec.class_count;
    let labels = scene.labels(f);
    let miss = |class: ClassId| 1.0 - coverage[class as usize].clamp(0.0, 1.0);
    let flipped: Vec<bool> = (0..scene.spec.boxes.len())
        .map(|b| {
            let class = scene.spec.boxes[b].class;
            off_axis(scene, b, f) && unit(params.seed, TAG_FLIP, b as u64, f as u64) < params.gamma * miss(class)
        })
        .collect();
    labels
        .iter()
        .enumerate()
        .map(|(p, &gt)| {
            let swapped = unit(params.seed, TAG_SWAP, f as u64, patch(scene, params, f, p)) < (1.0 - params.alpha) * miss(gt);
            let flip = matches!(scene.surfaces[f][p], Surface::Box(b) if flipped[b as usize]);
            if swapped || flip {
                confuser(gt, c)
            } else {
                gt
            }
        })
        .collect()
}

/// Softmax dumps of frame `f`, one `N × C` row-major array per run.
pub fn predict_frame(scene: &Scene, params: &MockPredictorParams, coverage: &[f64], f: usize) -> Vec<Vec<f32>> {
    let c = scene.spec.class_count;
    let classes = predicted_classes(scene, params, coverage, f);
    let base: Vec<Vec<f64>> = classes
        .iter()
        .zip(&scene.ranges[f])
        .map(|(&k, &range)| {
            let w = (params.beta * range).min(1.0);
            let mut row = vec![w / c as f64; c];
            row[k as usize] += 1.0 - w;
            row
        })
        .collect();
    (0..params.runs)
        .map(|run| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive(params.seed, TAG_RUN, f as u64, run as u64));
            let normal = (params.sigma > 0.0).then(|| Normal::new(0.0, params.sigma).expect("finite sigma"));
            let mut out = Vec::with_capacity(base.len() * c);
            for row in &base {
                let jittered: Vec<f64> = row
                    .iter()
                    .map(|&v| v + normal.as_ref().map_or(0.0, |n| n.sample(&mut rng).abs()))
                    .collect();
                let sum: f64 = jittered.iter().sum();
                out.extend(jittered.iter().map(|v| (v / sum) as f32));
            }
            out
        })
        .collect()
}

/// Dumps for every frame, computed in parallel.
pub fn mock_predict(scene: &Scene, params: &MockPredictorParams, coverage: &[f64]) -> Vec<Vec<Vec<f32>>> {
    (0..scene.frame_count())
        .into_par_iter()
        .map(|f| predict_frame(scene, params, coverage, f))
        .collect()
}

/// Averages the per-run dumps of each frame, exactly as loading them from
/// disk would.
pub fn average_dumps(dumps: &[Vec<Vec<f32>>], class_count: usize) -> Result<Vec<ProbabilityField>> {
    dumps
        .par_iter()
        .enumerate()
        .map(|(f, runs)| {
            let wide: Vec<Vec<f64>> = runs.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
            ProbabilityField::average(f as u32, class_count, &wide)
        })
        .collect()
}

/// Writes dumps as `probs/run_R/NNNNNN.prob` under `root`.
pub fn write_dumps(root: &Path, dumps: &[Vec<Vec<f32>>], class_count: usize) -> Result<()> {
    for (f, runs) in dumps.iter().enumerate() {
        for (r, rows) in runs.iter().enumerate() {
            write_prob(&prob_path(root, r, f), class_count, rows)?;
        }
    }
    Ok(())
}

/// Effective per-class training coverage: human labels count fully, and
/// each pseudo-labeled point counts `+1` toward its true class when correct
/// and `−1` when wrong. Clamped to `[0, 1]`.
pub fn class_coverage(scene: &Scene, table: &RegionTable, state: &DatasetState) -> Vec<f64> {
    let totals = scene.class_totals();
    let mut credit = vec![0i64; totals.len()];
    for &key in state.labeled() {
        for &m in &table.region(key).members {
            credit[scene.labels(key.frame as usize)[m as usize] as usize] += 1;
        }
    }
    for (key, pseudo) in state.pseudo() {
        let labels = scene.labels(key.frame as usize);
        for (&m, &guess) in table.region(*key).members.iter().zip(pseudo) {
            let gt = labels[m as usize];
            credit[gt as usize] += if gt == guess { 1 } else { -1 };
        }
    }
    credit
        .iter()
        .zip(&totals)
        .map(|(&c, &t)| if t == 0 { 1.0 } else { (c as f64 / t as f64).clamp(0.0, 1.0) })
        .collect()
}

/// Per-frame stand-in for penultimate-layer features: the predicted class
/// histogram followed by the sensor position in units of 10 m.
pub fn mock_features(scene: &Scene, fields: &[ProbabilityField]) -> FrameFeatures {
    let c = scene.spec.class_count;
    let dim = c + 3;
    let mut values = Vec::with_capacity(fields.len() * dim);
    for (f, field) in fields.iter().enumerate() {
        let mut hist = vec![0.0f64; c];
        for l in field.predicted_labels() {
            hist[l as usize] += 1.0;
        }
        let n = field.len().max(1) as f64;
        values.extend(hist.iter().map(|h| (h / n) as f32));
        values.extend(scene.spec.poses[f].translation.map(|t| (t / 10.0) as f32));
    }
    FrameFeatures { dim, values }
}

/// The lines of a labeled-list file handed to an external predictor.
pub fn labeled_list(state: &DatasetState) -> String {
    let mut out = String::new();
    for key in state.labeled() {
        out.push_str(&format!("{} {} labeled\n", key.frame, key.region));
    }
    for key in state.pseudo().keys() {
        out.push_str(&format!("{} {} pseudo\n", key.frame, key.region));
    }
    out
}

