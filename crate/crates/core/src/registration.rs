//! Registration of sensor-frame points into world coordinates.

use rayon::prelude::*;

use crate::scene::{Frame, FrameSequence, Pose};

/// A frame's points expressed in the shared world coordinate system.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldFrame {
    pub frame_id: u32,
    pub points: Vec<[f64; 3]>,
}

impl WorldFrame {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Applies `world = R · p + t` to every point, in 64-bit arithmetic.
pub fn register(frame: &Frame, pose: &Pose) -> WorldFrame {
    let r = &pose.rotation;
    let t = &pose.translation;
    let points = frame
        .points
        .iter()
        .map(|p| {
            let p = [f64::from(p[0]), f64::from(p[1]), f64::from(p[2])];
            [
                r[0][0] * p[0] + r[0][1] * p[1] + r[0][2] * p[2] + t[0],
                r[1][0] * p[0] + r[1][1] * p[1] + r[1][2] * p[2] + t[1],
                r[2][0] * p[0] + r[2][1] * p[1] + r[2][2] * p[2] + t[2],
            ]
        })
        .collect();
    WorldFrame {
        frame_id: frame.frame_id,
        points,
    }
}

pub fn register_sequence(seq: &FrameSequence) -> Vec<WorldFrame> {
    seq.frames
        .par_iter()
        .zip(&seq.poses)
        .map(|(f, p)| register(f, p))
        .collect()
}
