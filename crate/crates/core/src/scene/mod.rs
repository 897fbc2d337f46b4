//! Core domain types: frames, poses, probability fields and the dataset split.

mod dataset;
pub mod io;

pub use dataset::{DatasetState, RegionKey, RegionStatus};

use crate::config::EngineConfig;
use crate::error::{Error, Result};

pub type ClassId = u16;

/// One LiDAR scan in sensor coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub frame_id: u32,
    pub points: Vec<[f32; 3]>,
    pub intensities: Option<Vec<f32>>,
    pub labels: Option<Vec<ClassId>>,
}

impl Frame {
    pub fn new(frame_id: u32, points: Vec<[f32; 3]>) -> Self {
        Frame {
            frame_id,
            points,
            intensities: None,
            labels: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self, class_count: usize) -> Result<()> {
        let n = self.points.len();
        if n == 0 {
            return Err(Error::Validation(format!("frame {} has no points", self.frame_id)));
        }
        if let Some(i) = self.points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::Validation(format!(
                "frame {}: non-finite coordinate at point {i}",
                self.frame_id
            )));
        }
        if let Some(int) = &self.intensities {
            if int.len() != n {
                return Err(Error::Structure(format!(
                    "frame {}: {} intensities for {n} points",
                    self.frame_id,
                    int.len()
                )));
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != n {
                return Err(Error::Structure(format!(
                    "frame {}: {} labels for {n} points",
                    self.frame_id,
                    labels.len()
                )));
            }
            if let Some(i) = labels.iter().position(|&l| l as usize >= class_count) {
                return Err(Error::Validation(format!(
                    "frame {}: label {} at point {i} exceeds class count {class_count}",
                    self.frame_id, labels[i]
                )));
            }
        }
        Ok(())
    }
}

/// Rigid transform from sensor to world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        translation: [0.0; 3],
    };

    pub fn from_translation(t: [f64; 3]) -> Self {
        Pose {
            translation: t,
            ..Pose::IDENTITY
        }
    }

    /// Rotation about the vertical axis by `yaw` radians followed by a translation.
    pub fn from_yaw(yaw: f64, t: [f64; 3]) -> Self {
        let (s, c) = yaw.sin_cos();
        Pose {
            rotation: [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
            translation: t,
        }
    }

    /// Largest absolute entry of `RᵀR − I`.
    pub fn orthonormality_error(&self) -> f64 {
        let r = &self.rotation;
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| r[k][i] * r[k][j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    pub fn determinant(&self) -> f64 {
        let r = &self.rotation;
        r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
    }

    pub fn validate(&self) -> Result<()> {
        if self.rotation.iter().flatten().any(|v| !v.is_finite())
            || self.translation.iter().any(|v| !v.is_finite())
        {
            return Err(Error::Validation("pose has non-finite entries".into()));
        }
        let err = self.orthonormality_error();
        if err > 1e-5 {
            return Err(Error::Validation(format!(
                "pose rotation is not orthonormal (max deviation {err:e})"
            )));
        }
        if self.determinant() <= 0.0 {
            return Err(Error::Validation("pose rotation has negative determinant".into()));
        }
        Ok(())
    }

    /// Applies the transform to a world-space offset inverse: sensor = Rᵀ (world − t).
    pub fn to_sensor(&self, world: [f64; 3]) -> [f64; 3] {
        let d = [
            world[0] - self.translation[0],
            world[1] - self.translation[1],
            world[2] - self.translation[2],
        ];
        let r = &self.rotation;
        [
            r[0][0] * d[0] + r[1][0] * d[1] + r[2][0] * d[2],
            r[0][1] * d[0] + r[1][1] * d[1] + r[2][1] * d[2],
            r[0][2] * d[0] + r[1][2] * d[1] + r[2][2] * d[2],
        ]
    }
}

/// Ordered frames of one sequence with their ego-poses.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub frames: Vec<Frame>,
    pub poses: Vec<Pose>,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>, poses: Vec<Pose>) -> Result<Self> {
        if frames.len() != poses.len() {
            return Err(Error::Structure(format!(
                "{} frames but {} poses",
                frames.len(),
                poses.len()
            )));
        }
        Ok(FrameSequence { frames, poses })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn total_points(&self) -> usize {
        self.frames.iter().map(Frame::len).sum()
    }

    pub fn has_labels(&self) -> bool {
        self.frames.iter().all(|f| f.labels.is_some())
    }

    pub fn validate(&self, config: &EngineConfig) -> Result<()> {
        for (i, (frame, pose)) in self.frames.iter().zip(&self.poses).enumerate() {
            frame.validate(config.class_count)?;
            pose.validate()
                .map_err(|e| Error::Validation(format!("pose of frame {i}: {e}")))?;
        }
        Ok(())
    }
}

/// Per-point class distributions of one frame, stored row-major as `N × C`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityField {
    pub frame_id: u32,
    class_count: usize,
    probs: Vec<f64>,
}

impl ProbabilityField {
    /// Builds a field from rows that already form distributions. Rows are
    /// renormalized; all-zero rows become uniform.
    pub fn from_rows(frame_id: u32, class_count: usize, mut probs: Vec<f64>) -> Result<Self> {
        if class_count == 0 || probs.len() % class_count != 0 {
            return Err(Error::Structure(format!(
                "probability buffer of length {} is not a multiple of {class_count} classes",
                probs.len()
            )));
        }
        for (p, row) in probs.chunks_exact_mut(class_count).enumerate() {
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Validation(format!(
                    "frame {frame_id}: invalid probability at point {p}"
                )));
            }
            normalize_row(row);
        }
        Ok(ProbabilityField {
            frame_id,
            class_count,
            probs,
        })
    }

    /// Element-wise mean of several per-run fields, renormalized.
    pub fn average(frame_id: u32, class_count: usize, runs: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = runs.first() else {
            return Err(Error::Structure("no probability runs to average".into()));
        };
        if runs.iter().any(|r| r.len() != first.len()) {
            return Err(Error::Structure("probability runs differ in size".into()));
        }
        let scale = 1.0 / runs.len() as f64;
        let mut mean = vec![0.0; first.len()];
        for run in runs {
            for (m, v) in mean.iter_mut().zip(run) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m *= scale);
        Self::from_rows(frame_id, class_count, mean)
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.probs.len() / self.class_count
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn row(&self, p: usize) -> &[f64] {
        &self.probs[p * self.class_count..(p + 1) * self.class_count]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks_exact(self.class_count)
    }

    /// Most probable class of point `p`; ties go to the lowest class id.
    pub fn argmax(&self, p: usize) -> ClassId {
        argmax(self.row(p)) as ClassId
    }

    pub fn predicted_labels(&self) -> Vec<ClassId> {
        self.rows().map(|r| argmax(r) as ClassId).collect()
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (c, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = c;
        }
    }
    best
}

fn normalize_row(row: &mut [f64]) {
    let sum: f64 = row.iter().sum();
    if sum > 0.0 {
        row.iter_mut().for_each(|v| *v /= sum);
    } else {
        let u = 1.0 / row.len() as f64;
        row.iter_mut().for_each(|v| *v = u);
    }
}
