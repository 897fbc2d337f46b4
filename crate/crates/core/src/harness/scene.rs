//! Synthetic LiDAR scenes: a ground plane and axis-aligned boxes observed
//! from a moving sensor.
//!
//! Each scene owns a fixed pool of surface points. A frame keeps the pool
//! points that are in range and not hidden behind a box, then samples them
//! with weight proportional to `range^-falloff`, so near surfaces are dense and
//! the same world point is often seen from several frames.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scene::io::{self, write_atomic};
use crate::scene::{ClassId, Frame, FrameSequence, Pose};

#[derive(Debug, Clone, PartialEq)]
pub struct SceneBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub class: ClassId,
    /// Viewing azimuth (world frame, radians) at which the object is
    /// recognised most reliably.
    pub preferred_azimuth: f64,
    /// Deviation from the preferred azimuth beyond which the object may be
    /// mistaken for its confuser class.
    pub critical_angle: f64,
}

impl SceneBox {
    pub fn center(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| 0.5 * (self.min[a] + self.max[a]))
    }

    pub fn contains(&self, p: [f64; 3], tolerance: f64) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] - tolerance && p[a] <= self.max[a] + tolerance)
    }

    fn face_areas(&self) -> [f64; 5] {
        let [dx, dy, dz] = [0, 1, 2].map(|a| self.max[a] - self.min[a]);
        [dx * dy, dx * dz, dx * dz, dy * dz, dy * dz]
    }

    fn sample_face<R: Rng>(&self, face: usize, rng: &mut R) -> [f64; 3] {
        let mut p = [0, 1, 2].map(|a| rng.random_range(self.min[a]..=self.max[a]));
        match face {
            0 => p[2] = self.max[2],
            1 => p[1] = self.min[1],
            2 => p[1] = self.max[1],
            3 => p[0] = self.min[0],
            _ => p[0] = self.max[0],
        }
        p
    }

    /// Whether the open segment `from → from + t·dir`, `t ∈ (0, t_max)`,
    /// passes through the box interior.
    fn blocks(&self, from: [f64; 3], dir: [f64; 3], t_max: f64) -> bool {
        let (mut lo, mut hi) = (0.0f64, t_max);
        for a in 0..3 {
            if dir[a].abs() < 1e-15 {
                if from[a] <= self.min[a] || from[a] >= self.max[a] {
                    return false;
                }
                continue;
            }
            let t1 = (self.min[a] - from[a]) / dir[a];
            let t2 = (self.max[a] - from[a]) / dir[a];
            lo = lo.max(t1.min(t2));
            hi = hi.min(t1.max(t2));
        }
        hi - lo > 1e-9
    }
}

/// Ground rectangle at `z = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundPlane {
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub class: ClassId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSceneSpec {
    pub class_count: usize,
    pub ground: GroundPlane,
    pub boxes: Vec<SceneBox>,
    /// Sensor pose per frame; the frame count is `poses.len()`.
    pub poses: Vec<Pose>,
    pub points_per_frame: usize,
    /// Size of the shared surface pool the frames sample from.
    pub pool_points: usize,
    pub max_range: f64,
    /// Visible pool points are sampled with weight `range^-falloff`.
    pub range_falloff: f64,
    pub seed: u64,
}

/// Box footprints `(dx, dy, dz)` ranges used for random layouts, cycled
/// over the non-ground classes.
const TEMPLATES: [([f64; 2], [f64; 2], [f64; 2], [f64; 2]); 5] = [
    // dx, dy, dz, |y| placement
    ([8.0, 14.0], [4.0, 7.0], [5.0, 9.0], [13.0, 20.0]),
    ([3.8, 4.6], [1.7, 2.0], [1.4, 1.7], [3.0, 6.0]),
    ([0.3, 0.5], [0.3, 0.5], [4.0, 6.0], [6.0, 9.0]),
    ([2.0, 4.0], [2.0, 4.0], [2.0, 4.0], [8.0, 12.0]),
    ([6.0, 12.0], [0.2, 0.4], [1.2, 1.8], [9.5, 11.0]),
];

impl SyntheticSceneSpec {
    /// The desk-scale default: 5 frames of 2000 points, 6 classes, class 0
    /// the ground, and a random street-like layout drawn from `seed`.
    pub fn desk(seed: u64) -> Self {
        Self::random_layout(5, 2000, 6, seed)
    }

    pub fn random_layout(frames: usize, points_per_frame: usize, class_count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5CE7_E5EE_D000_0001);
        let step = 1.5;
        let travel = step * frames.saturating_sub(1) as f64;
        let poses = (0..frames)
            .map(|i| {
                let yaw = 0.08 * (i as f64 * 1.3).sin();
                Pose::from_yaw(yaw, [i as f64 * step, 0.3 * (i as f64 * 0.7).sin(), 1.8])
            })
            .collect();
        let mut boxes = Vec::new();
        if class_count > 1 {
            for i in 0..4 * (class_count - 1) {
                let class = (1 + i % (class_count - 1)) as ClassId;
                let (dx, dy, dz, off) = TEMPLATES[(class as usize - 1) % TEMPLATES.len()];
                let size = [dx, dy, dz].map(|r| rng.random_range(r[0]..=r[1]));
                let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let x = rng.random_range(-18.0..travel + 18.0);
                let y = side * rng.random_range(off[0]..=off[1]);
                boxes.push(SceneBox {
                    min: [x - size[0] / 2.0, y - size[1] / 2.0, 0.0],
                    max: [x + size[0] / 2.0, y + size[1] / 2.0, size[2]],
                    class,
                    preferred_azimuth: rng.random_range(-PI..PI),
                    critical_angle: rng.random_range(PI / 6.0..PI / 2.0),
                });
            }
        }
        SyntheticSceneSpec {
            class_count,
            ground: GroundPlane {
                min: [-30.0, -24.0],
                max: [travel + 30.0, 24.0],
                class: 0,
            },
            boxes,
            poses,
            points_per_frame,
            pool_points: 4 * points_per_frame,
            max_range: 32.0,
            range_falloff: 1.0,
            seed,
        }
    }

    /// Same layout and trajectory, different sampling seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        SyntheticSceneSpec { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points_per_frame == 0 {
            return Err(Error::Config("points per frame must be positive".into()));
        }
        if self.poses.is_empty() {
            return Err(Error::Config("the trajectory has no poses".into()));
        }
        if self.class_count == 0 || self.class_count > usize::from(ClassId::MAX) + 1 {
            return Err(Error::Config(format!("class count {} is out of range", self.class_count)));
        }
        let classes = std::iter::once(self.ground.class).chain(self.boxes.iter().map(|b| b.class));
        if let Some(c) = classes.into_iter().find(|&c| c as usize >= self.class_count) {
            return Err(Error::Config(format!("layout uses class {c} but only {} classes exist", self.class_count)));
        }
        for (i, b) in self.boxes.iter().enumerate() {
            if (0..3).any(|a| !(b.max[a] > b.min[a])) {
                return Err(Error::Config(format!("box {i} has a non-positive extent")));
            }
        }
        for (i, p) in self.poses.iter().enumerate() {
            p.validate().map_err(|e| Error::Config(format!("pose {i}: {e}")))?;
        }
        if !(self.max_range > 0.0) {
            return Err(Error::Config("max range must be positive".into()));
        }
        Ok(())
    }

    /// Plain-text description of the layout.
    pub fn layout_text(&self) -> String {
        let mut out = String::new();
        let g = &self.ground;
        let _ = writeln!(out, "ground {} {} {} {} {}", g.class, g.min[0], g.min[1], g.max[0], g.max[1]);
        for b in &self.boxes {
            let _ = writeln!(
                out,
                "box {} {} {} {} {} {} {} {} {}",
                b.class, b.min[0], b.min[1], b.min[2], b.max[0], b.max[1], b.max[2], b.preferred_azimuth, b.critical_angle
            );
        }
        out
    }
}

/// Which surface a point was sampled from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surface {
    Ground,
    Box(u32),
}

/// A generated sequence plus the per-point bookkeeping the mock predictor
/// needs.
#[derive(Debug, Clone)]
pub struct Scene {
    pub spec: SyntheticSceneSpec,
    pub sequence: FrameSequence,
    /// Sensor range of every point, per frame.
    pub ranges: Vec<Vec<f64>>,
    pub surfaces: Vec<Vec<Surface>>,
    /// Pool index of every point, per frame.
    pub pool_ids: Vec<Vec<u32>>,
    /// World position of every pool point.
    pub pool: Vec<[f64; 3]>,
}

impl Scene {
    pub fn frame_count(&self) -> usize {
        self.sequence.len()
    }

    pub fn labels(&self, frame: usize) -> &[ClassId] {
        self.sequence.frames[frame].labels.as_deref().expect("synthetic frames are labeled")
    }

    /// Points per class over the whole sequence.
    pub fn class_totals(&self) -> Vec<usize> {
        let mut totals = vec![0; self.spec.class_count];
        for f in 0..self.frame_count() {
            for &l in self.labels(f) {
                totals[l as usize] += 1;
            }
        }
        totals
    }

    /// Writes points, labels, poses and a layout description under `root`.
    pub fn write(&self, root: &Path) -> Result<()> {
        io::save_sequence(root, &self.sequence)?;
        write_atomic(&root.join("layout.txt"), self.spec.layout_text().as_bytes())
    }
}

fn sample_pool(spec: &SyntheticSceneSpec, rng: &mut ChaCha8Rng) -> Vec<([f64; 3], Surface)> {
    let g = &spec.ground;
    let ground_area = (g.max[0] - g.min[0]) * (g.max[1] - g.min[1]);
    let mut weights = vec![ground_area];
    for b in &spec.boxes {
        weights.extend(b.face_areas());
    }
    let total: f64 = weights.iter().sum();
    let mut pool = Vec::with_capacity(spec.pool_points);
    while pool.len() < spec.pool_points {
        let mut pick = rng.random::<f64>() * total;
        let mut idx = weights.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            if pick < *w {
                idx = i;
                break;
            }
            pick -= w;
        }
        if idx == 0 {
            let p = [rng.random_range(g.min[0]..=g.max[0]), rng.random_range(g.min[1]..=g.max[1]), 0.0];
            // Ground under a box is never visible.
            if spec.boxes.iter().any(|b| b.contains(p, 0.0)) {
                continue;
            }
            pool.push((p, Surface::Ground));
        } else {
            let (b, face) = ((idx - 1) / 5, (idx - 1) % 5);
            let p = spec.boxes[b].sample_face(face, rng);
            pool.push((p, Surface::Box(b as u32)));
        }
    }
    pool
}

fn visible(spec: &SyntheticSceneSpec, sensor: [f64; 3], p: [f64; 3]) -> Option<f64> {
    let dir = [p[0] - sensor[0], p[1] - sensor[1], p[2] - sensor[2]];
    let range = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
    if range > spec.max_range || range < 1e-6 {
        return None;
    }
    let t_max = 1.0 - 1e-6 / range;
    (!spec.boxes.iter().any(|b| b.blocks(sensor, dir, t_max))).then_some(range)
}

/// Generates the frames of `spec`. Deterministic under `spec.seed`.
pub fn generate_scene(spec: &SyntheticSceneSpec) -> Result<Scene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let pool = sample_pool(spec, &mut rng);
    let mut frames = Vec::with_capacity(spec.poses.len());
    let (mut ranges, mut surfaces, mut pool_ids) = (Vec::new(), Vec::new(), Vec::new());
    for (i, pose) in spec.poses.iter().enumerate() {
        let sensor = pose.translation;
        // Efraimidis–Spirakis keys: ln(u) / w with w = range^-falloff.
        let mut keyed: Vec<(f64, u32, f64)> = Vec::new();
        for (j, (p, _)) in pool.iter().enumerate() {
            let u: f64 = rng.random();
            if let Some(range) = visible(spec, sensor, *p) {
                keyed.push((u.max(f64::MIN_POSITIVE).ln() * range.powf(spec.range_falloff), j as u32, range));
            }
        }
        if keyed.len() < spec.points_per_frame {
            return Err(Error::Config(format!(
                "frame {i}: only {} pool points are visible but {} are requested",
                keyed.len(),
                spec.points_per_frame
            )));
        }
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        keyed.truncate(spec.points_per_frame);
        keyed.sort_by_key(|k| k.1);
        let mut points = Vec::with_capacity(keyed.len());
        let mut labels = Vec::with_capacity(keyed.len());
        let mut fr_ranges = Vec::with_capacity(keyed.len());
        let mut fr_surfaces = Vec::with_capacity(keyed.len());
        for &(_, j, range) in &keyed {
            let (p, surface) = pool[j as usize];
            let s = pose.to_sensor(p);
            points.push(s.map(|v| v as f32));
            labels.push(match surface {
                Surface::Ground => spec.ground.class,
                Surface::Box(b) => spec.boxes[b as usize].class,
            });
            fr_ranges.push(range);
            fr_surfaces.push(surface);
        }
        let mut frame = Frame::new(i as u32, points);
        frame.labels = Some(labels);
        frames.push(frame);
        ranges.push(fr_ranges);
        surfaces.push(fr_surfaces);
        pool_ids.push(keyed.iter().map(|k| k.1).collect());
    }
    Ok(Scene {
        spec: spec.clone(),
        sequence: FrameSequence::new(frames, spec.poses.clone())?,
        ranges,
        surfaces,
        pool_ids,
        pool: pool.into_iter().map(|(p, _)| p).collect(),
    })
}
