//! Bit-exact readers and writers for the on-disk formats.
//!
//! All binary formats are little-endian. Layout of a sequence root:
//!
//! ```text
//! <root>/points/NNNNNN.bin      4 × f32 per point (x, y, z, intensity)
//! <root>/labels/NNNNNN.label    u32 per point, class id in the low 16 bits
//! <root>/poses.txt              12 floats per line, row-major [R|t]
//! <root>/probs/run_d/NNNNNN.prob
//! <root>/regions/NNNNNN.reg
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use super::{ClassId, Frame, FrameSequence, Pose, ProbabilityField};
use crate::config::EngineConfig;
use crate::error::{Error, Result};

pub const PROB_MAGIC: &[u8; 4] = b"LDPR";
pub const PROB_VERSION: u32 = 1;
pub const REGION_MAGIC: &[u8; 4] = b"LDRG";
pub const SCORE_MAGIC: &[u8; 4] = b"LDSC";
pub const MASK_MAGIC: &[u8; 4] = b"LDMK";
pub const CORR_MAGIC: &[u8; 4] = b"LDCM";
pub const FEATURE_MAGIC: &[u8; 4] = b"LDFT";

const POINT_STRIDE: usize = 16;

pub fn frame_stem(frame: usize) -> String {
    format!("{frame:06}")
}

pub fn points_path(root: &Path, frame: usize) -> PathBuf {
    root.join("points").join(format!("{}.bin", frame_stem(frame)))
}

pub fn labels_path(root: &Path, frame: usize) -> PathBuf {
    root.join("labels").join(format!("{}.label", frame_stem(frame)))
}

pub fn poses_path(root: &Path) -> PathBuf {
    root.join("poses.txt")
}

pub fn prob_path(root: &Path, run: usize, frame: usize) -> PathBuf {
    root.join("probs")
        .join(format!("run_{run}"))
        .join(format!("{}.prob", frame_stem(frame)))
}

pub fn region_path(root: &Path, frame: usize) -> PathBuf {
    root.join("regions").join(format!("{}.reg", frame_stem(frame)))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Writes `bytes` to a sibling temporary file and renames it into place, so
/// readers never observe a partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// Little-endian cursor that reports the byte offset of any short read.
pub(crate) struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(path: &'a Path, bytes: &'a [u8]) -> Self {
        Reader { path, bytes, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(
                self.path,
                self.pos as u64,
                format!("truncated {what}"),
            ));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let got = self.take(4, "header")?;
        if got != magic {
            return Err(Error::format(
                self.path,
                0,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(got),
                    String::from_utf8_lossy(magic)
                ),
            ));
        }
        Ok(())
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1, "record")?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        let b = self.take(2, "record")?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        let b = self.take(4, "record")?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub(crate) fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_bits(self.u32()?))
    }

    pub(crate) fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format(
                self.path,
                self.pos as u64,
                format!("{} trailing bytes", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }
}

fn header(magic: &[u8; 4], fields: &[u32], payload: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 4 * fields.len() + payload);
    out.extend_from_slice(magic);
    for f in fields {
        out.extend_from_slice(&f.to_le_bytes());
    }
    out
}

// ---------------------------------------------------------------- points

pub fn encode_points(frame: &Frame) -> Vec<u8> {
    let mut out = Vec::with_capacity(frame.len() * POINT_STRIDE);
    for (i, p) in frame.points.iter().enumerate() {
        for c in p {
            out.extend_from_slice(&c.to_le_bytes());
        }
        let intensity = frame.intensities.as_ref().map_or(0.0, |v| v[i]);
        out.extend_from_slice(&intensity.to_le_bytes());
    }
    out
}

/// Parses a KITTI velodyne scan. Intensities are always present after a read.
pub fn decode_points(path: &Path, frame_id: u32, bytes: &[u8]) -> Result<Frame> {
    if bytes.len() % POINT_STRIDE != 0 {
        let offset = (bytes.len() - bytes.len() % POINT_STRIDE) as u64;
        return Err(Error::format(path, offset, "truncated record"));
    }
    let mut points = Vec::with_capacity(bytes.len() / POINT_STRIDE);
    let mut intensities = Vec::with_capacity(bytes.len() / POINT_STRIDE);
    for rec in bytes.chunks_exact(POINT_STRIDE) {
        let f = |k: usize| f32::from_le_bytes([rec[4 * k], rec[4 * k + 1], rec[4 * k + 2], rec[4 * k + 3]]);
        points.push([f(0), f(1), f(2)]);
        intensities.push(f(3));
    }
    Ok(Frame {
        frame_id,
        points,
        intensities: Some(intensities),
        labels: None,
    })
}

// ---------------------------------------------------------------- labels

pub fn encode_labels(labels: &[ClassId]) -> Vec<u8> {
    labels
        .iter()
        .flat_map(|&l| u32::from(l).to_le_bytes())
        .collect()
}

/// Reads SemanticKITTI labels, keeping the low 16 bits of each word.
pub fn decode_labels(path: &Path, bytes: &[u8]) -> Result<Vec<ClassId>> {
    if bytes.len() % 4 != 0 {
        let offset = (bytes.len() - bytes.len() % 4) as u64;
        return Err(Error::format(path, offset, "truncated record"));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|b| (u32::from_le_bytes([b[0], b[1], b[2], b[3]]) & 0xFFFF) as ClassId)
        .collect())
}

pub fn read_labels(path: &Path) -> Result<Vec<ClassId>> {
    decode_labels(path, &read_file(path)?)
}

pub fn write_labels(path: &Path, labels: &[ClassId]) -> Result<()> {
    write_atomic(path, &encode_labels(labels))
}

// ---------------------------------------------------------------- poses

/// Formats like C's `%.6e`, the notation used by KITTI odometry pose files.
pub fn format_sci(v: f64) -> String {
    let s = format!("{v:.6e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

pub fn encode_poses(poses: &[Pose]) -> String {
    let mut out = String::new();
    for pose in poses {
        let mut fields = Vec::with_capacity(12);
        for r in 0..3 {
            for c in 0..3 {
                fields.push(format_sci(pose.rotation[r][c]));
            }
            fields.push(format_sci(pose.translation[r]));
        }
        out.push_str(&fields.join(" "));
        out.push('\n');
    }
    out
}

/// Parses one KITTI pose line: 12 floats forming the row-major 3×4 `[R|t]`.
pub fn parse_pose_line(line: &str) -> std::result::Result<Pose, String> {
    let values: Vec<f64> = line
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| format!("invalid number '{t}'")))
        .collect::<std::result::Result<_, _>>()?;
    if values.len() != 12 {
        return Err(format!("expected 12 values, found {}", values.len()));
    }
    let mut pose = Pose::IDENTITY;
    for r in 0..3 {
        for c in 0..3 {
            pose.rotation[r][c] = values[4 * r + c];
        }
        pose.translation[r] = values[4 * r + 3];
    }
    Ok(pose)
}

pub fn decode_poses(path: &Path, text: &str) -> Result<Vec<Pose>> {
    let mut poses = Vec::new();
    let mut offset = 0u64;
    for (lineno, line) in text.split_inclusive('\n').enumerate() {
        let trimmed = line.trim();
        if !trimmed.is_empty() {
            let pose = parse_pose_line(trimmed)
                .map_err(|m| Error::format(path, offset, format!("line {}: {m}", lineno + 1)))?;
            pose.validate().map_err(|e| {
                Error::Validation(format!("{} line {}: {e}", path.display(), lineno + 1))
            })?;
            poses.push(pose);
        }
        offset += line.len() as u64;
    }
    Ok(poses)
}

pub fn read_poses(path: &Path) -> Result<Vec<Pose>> {
    let bytes = read_file(path)?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| Error::format(path, e.valid_up_to() as u64, "invalid UTF-8"))?;
    decode_poses(path, text)
}

// ---------------------------------------------------------------- sequences

fn sorted_entries(dir: &Path, extension: &str) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == extension))
        .collect();
    files.sort();
    Ok(files)
}

/// Loads a sequence from `root`. Frames are numbered `0..F` in filename order;
/// labels are attached when a `labels/` directory exists.
pub fn load_sequence(root: &Path, config: &EngineConfig) -> Result<FrameSequence> {
    let point_files = sorted_entries(&root.join("points"), "bin")?;
    let poses = read_poses(&poses_path(root))?;
    if poses.len() != point_files.len() {
        return Err(Error::Structure(format!(
            "{} lists {} poses but {} frame files exist",
            poses_path(root).display(),
            poses.len(),
            point_files.len()
        )));
    }
    let label_dir = root.join("labels");
    let label_files = if label_dir.is_dir() {
        let files = sorted_entries(&label_dir, "label")?;
        if files.len() != point_files.len() {
            return Err(Error::Structure(format!(
                "{} label files for {} frames",
                files.len(),
                point_files.len()
            )));
        }
        Some(files)
    } else {
        None
    };
    let mut frames = Vec::with_capacity(point_files.len());
    for (i, path) in point_files.iter().enumerate() {
        let mut frame = decode_points(path, i as u32, &read_file(path)?)?;
        if let Some(files) = &label_files {
            let labels = read_labels(&files[i])?;
            if labels.len() != frame.len() {
                return Err(Error::Structure(format!(
                    "{}: {} labels for {} points",
                    files[i].display(),
                    labels.len(),
                    frame.len()
                )));
            }
            frame.labels = Some(labels);
        }
        frame
            .validate(config.class_count)
            .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
        frames.push(frame);
    }
    FrameSequence::new(frames, poses)
}

pub fn save_sequence(root: &Path, seq: &FrameSequence) -> Result<()> {
    for (i, frame) in seq.frames.iter().enumerate() {
        write_atomic(&points_path(root, i), &encode_points(frame))?;
        if let Some(labels) = &frame.labels {
            write_labels(&labels_path(root, i), labels)?;
        }
    }
    write_atomic(&poses_path(root), encode_poses(&seq.poses).as_bytes())
}

// ---------------------------------------------------------------- probabilities

pub fn encode_prob(class_count: usize, rows: &[f32]) -> Vec<u8> {
    let n = rows.len() / class_count;
    let mut out = header(
        PROB_MAGIC,
        &[PROB_VERSION, n as u32, class_count as u32],
        rows.len() * 4,
    );
    for v in rows {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Raw contents of a `.prob` dump: `N`, `C` and the row-major values.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbDump {
    pub points: usize,
    pub classes: usize,
    pub values: Vec<f32>,
}

pub fn decode_prob(path: &Path, bytes: &[u8]) -> Result<ProbDump> {
    let mut r = Reader::new(path, bytes);
    r.magic(PROB_MAGIC)?;
    let version = r.u32()?;
    if version != PROB_VERSION {
        return Err(Error::format(path, 4, format!("unsupported version {version}")));
    }
    let points = r.u32()? as usize;
    let classes = r.u32()? as usize;
    let mut values = Vec::with_capacity(points * classes);
    for _ in 0..points * classes {
        values.push(r.f32()?);
    }
    r.finish()?;
    Ok(ProbDump {
        points,
        classes,
        values,
    })
}

pub fn write_prob(path: &Path, class_count: usize, rows: &[f32]) -> Result<()> {
    write_atomic(path, &encode_prob(class_count, rows))
}

/// Loads one to `D` per-run dumps for `frame` and averages them.
///
/// Each run row must be a distribution up to float drift: entries in
/// `[0, 1]` and a sum within `[0.9, 1.1]`. All-zero rows are read as
/// uniform. The averaged rows are renormalized to sum to one.
pub fn load_probabilities(
    run_paths: &[PathBuf],
    frame: &Frame,
    config: &EngineConfig,
) -> Result<ProbabilityField> {
    if run_paths.is_empty() || run_paths.len() > config.augmented_runs {
        return Err(Error::Structure(format!(
            "frame {}: expected 1..={} probability runs, got {}",
            frame.frame_id,
            config.augmented_runs,
            run_paths.len()
        )));
    }
    let c = config.class_count;
    let mut runs = Vec::with_capacity(run_paths.len());
    for path in run_paths {
        let dump = decode_prob(path, &read_file(path)?)?;
        if dump.points != frame.len() || dump.classes != c {
            return Err(Error::Structure(format!(
                "{}: header N={} C={} does not match frame N={} and C={c}",
                path.display(),
                dump.points,
                dump.classes,
                frame.len()
            )));
        }
        let mut run = Vec::with_capacity(dump.values.len());
        for (p, row) in dump.values.chunks_exact(c).enumerate() {
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Validation(format!(
                    "{}: probability outside [0, 1] at point {p}",
                    path.display()
                )));
            }
            let sum: f64 = row.iter().map(|&v| f64::from(v)).sum();
            if sum == 0.0 {
                run.extend(std::iter::repeat_n(1.0 / c as f64, c));
                continue;
            }
            if !(0.9..=1.1).contains(&sum) {
                return Err(Error::Validation(format!(
                    "{}: row sum {sum} at point {p} is not a softmax output",
                    path.display()
                )));
            }
            run.extend(row.iter().map(|&v| f64::from(v)));
        }
        runs.push(run);
    }
    ProbabilityField::average(frame.frame_id, c, &runs)
}

/// Run directories `probs/run_*` under `root`, sorted by run index.
pub fn probability_runs(root: &Path) -> Result<Vec<PathBuf>> {
    let dir = root.join("probs");
    let mut runs: Vec<(usize, PathBuf)> = fs::read_dir(&dir)
        .map_err(|e| Error::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter_map(|p| {
            let name = p.file_name()?.to_str()?;
            let idx = name.strip_prefix("run_")?.parse().ok()?;
            p.is_dir().then_some((idx, p))
        })
        .collect();
    runs.sort();
    Ok(runs.into_iter().map(|(_, p)| p).collect())
}

/// Loads the averaged probability field of every frame in `seq`.
pub fn load_all_probabilities(
    root: &Path,
    seq: &FrameSequence,
    config: &EngineConfig,
) -> Result<Vec<ProbabilityField>> {
    let runs = probability_runs(root)?;
    if runs.is_empty() {
        return Err(Error::Structure(format!(
            "no probability runs under {}",
            root.join("probs").display()
        )));
    }
    seq.frames
        .iter()
        .enumerate()
        .map(|(i, frame)| {
            let paths: Vec<PathBuf> = runs
                .iter()
                .map(|r| r.join(format!("{}.prob", frame_stem(i))))
                .collect();
            load_probabilities(&paths, frame, config)
        })
        .collect()
}

// ---------------------------------------------------------------- regions

pub fn encode_regions(ids: &[u32], k: usize) -> Vec<u8> {
    let mut out = header(REGION_MAGIC, &[ids.len() as u32, k as u32], ids.len() * 4);
    for id in ids {
        out.extend_from_slice(&id.to_le_bytes());
    }
    out
}

/// Returns the region count `K` and the per-point region ids.
pub fn decode_regions(path: &Path, bytes: &[u8]) -> Result<(usize, Vec<u32>)> {
    let mut r = Reader::new(path, bytes);
    r.magic(REGION_MAGIC)?;
    let n = r.u32()? as usize;
    let k = r.u32()? as usize;
    let mut ids = Vec::with_capacity(n);
    for _ in 0..n {
        let at = r.offset();
        let id = r.u32()?;
        if id as usize >= k {
            return Err(Error::format(path, at, format!("region id {id} exceeds K={k}")));
        }
        ids.push(id);
    }
    r.finish()?;
    Ok((k, ids))
}

// ---------------------------------------------------------------- scores

pub fn encode_scores(fd: &[f64], fe: &[f64]) -> Vec<u8> {
    let mut out = header(SCORE_MAGIC, &[fd.len() as u32], fd.len() * 8);
    for (d, e) in fd.iter().zip(fe) {
        out.extend_from_slice(&(*d as f32).to_le_bytes());
        out.extend_from_slice(&(*e as f32).to_le_bytes());
    }
    out
}

pub fn decode_scores(path: &Path, bytes: &[u8]) -> Result<(Vec<f32>, Vec<f32>)> {
    let mut r = Reader::new(path, bytes);
    r.magic(SCORE_MAGIC)?;
    let n = r.u32()? as usize;
    let mut fd = Vec::with_capacity(n);
    let mut fe = Vec::with_capacity(n);
    for _ in 0..n {
        fd.push(r.f32()?);
        fe.push(r.f32()?);
    }
    r.finish()?;
    Ok((fd, fe))
}

// ---------------------------------------------------------------- masks

pub fn encode_mask(mask: &[bool]) -> Vec<u8> {
    let mut out = header(MASK_MAGIC, &[mask.len() as u32], mask.len());
    out.extend(mask.iter().map(|&m| u8::from(m)));
    out
}

pub fn decode_mask(path: &Path, bytes: &[u8]) -> Result<Vec<bool>> {
    let mut r = Reader::new(path, bytes);
    r.magic(MASK_MAGIC)?;
    let n = r.u32()? as usize;
    let mut mask = Vec::with_capacity(n);
    for _ in 0..n {
        mask.push(r.u8()? != 0);
    }
    r.finish()?;
    Ok(mask)
}

// ---------------------------------------------------------------- features

/// Per-frame feature vectors for core-set selection, `F × dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeatures {
    pub dim: usize,
    pub values: Vec<f32>,
}

impl FrameFeatures {
    pub fn frames(&self) -> usize {
        self.values.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn row(&self, f: usize) -> &[f32] {
        &self.values[f * self.dim..(f + 1) * self.dim]
    }
}

pub fn encode_features(features: &FrameFeatures) -> Vec<u8> {
    let mut out = header(
        FEATURE_MAGIC,
        &[features.frames() as u32, features.dim as u32],
        features.values.len() * 4,
    );
    for v in &features.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_features(path: &Path, bytes: &[u8]) -> Result<FrameFeatures> {
    let mut r = Reader::new(path, bytes);
    r.magic(FEATURE_MAGIC)?;
    let frames = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let mut values = Vec::with_capacity(frames * dim);
    for _ in 0..frames * dim {
        values.push(r.f32()?);
    }
    r.finish()?;
    Ok(FrameFeatures { dim, values })
}
