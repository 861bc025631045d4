//! Raw planar video I/O and synthetic test-sequence generation.
//!
//! Files are raw 8-bit planar data: I420 plane order (Y, U, V with chroma at
//! half resolution) or bare luma. Geometry is never inferred from the file;
//! callers always supply width, height, and format.

use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::camera::CameraIntrinsics;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VideoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// File content does not match the declared geometry.
    #[error("format error: {0}")]
    Format(String),
    /// Caller-supplied arguments violate a precondition.
    #[error("contract error: {0}")]
    Contract(String),
}

fn io_err(path: &Path, source: std::io::Error) -> VideoError {
    VideoError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// A single 8-bit image plane, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePlane {
    width: usize,
    height: usize,
    samples: Vec<u8>,
}

impl FramePlane {
    /// All-zero plane of the given geometry.
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0)
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        FramePlane {
            width,
            height,
            samples: vec![value; width * height],
        }
    }

    /// Builds a plane by evaluating `f(row, col)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut samples = Vec::with_capacity(width * height);
        for i in 0..height {
            for j in 0..width {
                samples.push(f(i, j));
            }
        }
        FramePlane {
            width,
            height,
            samples,
        }
    }

    pub fn from_samples(width: usize, height: usize, samples: Vec<u8>) -> Result<Self, VideoError> {
        if samples.len() != width * height {
            return Err(VideoError::Contract(format!(
                "plane of {}x{} needs {} samples, got {}",
                width,
                height,
                width * height,
                samples.len()
            )));
        }
        Ok(FramePlane {
            width,
            height,
            samples,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.samples[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.samples[row * self.width + col] = value;
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.samples
    }

    pub fn row(&self, row: usize) -> &[u8] {
        &self.samples[row * self.width..(row + 1) * self.width]
    }
}

/// Pixel format of a [`VideoSequence`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceFormat {
    /// Bare luma plane per frame.
    LumaOnly,
    /// 4:2:0 planar: full-resolution Y plus half-resolution U and V.
    Yuv420,
}

impl SequenceFormat {
    /// Bytes per frame at the given luma geometry.
    pub fn frame_bytes(self, width: usize, height: usize) -> usize {
        match self {
            SequenceFormat::LumaOnly => width * height,
            SequenceFormat::Yuv420 => width * height * 3 / 2,
        }
    }
}

/// One frame: luma plus chroma when the sequence is 4:2:0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoFrame {
    pub y: FramePlane,
    pub u: Option<FramePlane>,
    pub v: Option<FramePlane>,
}

impl VideoFrame {
    pub fn luma(y: FramePlane) -> Self {
        VideoFrame {
            y,
            u: None,
            v: None,
        }
    }
}

/// An ordered list of frames sharing one geometry and format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoSequence {
    format: SequenceFormat,
    width: usize,
    height: usize,
    frames: Vec<VideoFrame>,
}

impl VideoSequence {
    pub fn new(format: SequenceFormat, width: usize, height: usize) -> Result<Self, VideoError> {
        if width == 0 || height == 0 {
            return Err(VideoError::Contract(
                "sequence geometry must be positive".into(),
            ));
        }
        if format == SequenceFormat::Yuv420 && !(width.is_multiple_of(2) && height.is_multiple_of(2)) {
            return Err(VideoError::Contract(format!(
                "4:2:0 requires even dimensions, got {width}x{height}"
            )));
        }
        Ok(VideoSequence {
            format,
            width,
            height,
            frames: Vec::new(),
        })
    }

    pub fn format(&self) -> SequenceFormat {
        self.format
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn frames(&self) -> &[VideoFrame] {
        &self.frames
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Appends a frame after checking it matches the sequence geometry.
    pub fn push_frame(&mut self, frame: VideoFrame) -> Result<(), VideoError> {
        if frame.y.width() != self.width || frame.y.height() != self.height {
            return Err(VideoError::Contract(format!(
                "frame geometry {}x{} does not match sequence {}x{}",
                frame.y.width(),
                frame.y.height(),
                self.width,
                self.height
            )));
        }
        match self.format {
            SequenceFormat::LumaOnly => {
                if frame.u.is_some() || frame.v.is_some() {
                    return Err(VideoError::Contract(
                        "luma-only sequence cannot hold chroma planes".into(),
                    ));
                }
            }
            SequenceFormat::Yuv420 => {
                let (cw, ch) = (self.width / 2, self.height / 2);
                let ok = |p: &Option<FramePlane>| {
                    p.as_ref()
                        .is_some_and(|p| p.width() == cw && p.height() == ch)
                };
                if !ok(&frame.u) || !ok(&frame.v) {
                    return Err(VideoError::Contract(format!(
                        "4:2:0 frame needs {cw}x{ch} chroma planes"
                    )));
                }
            }
        }
        self.frames.push(frame);
        Ok(())
    }

    /// Copy of this sequence with chroma planes dropped.
    pub fn to_luma_only(&self) -> VideoSequence {
        VideoSequence {
            format: SequenceFormat::LumaOnly,
            width: self.width,
            height: self.height,
            frames: self
                .frames
                .iter()
                .map(|f| VideoFrame::luma(f.y.clone()))
                .collect(),
        }
    }
}

/// Reads a raw planar file with the given out-of-band geometry.
///
/// The file size must be a whole multiple of the per-frame byte size;
/// `max_frames` truncates after that many frames.
pub fn read_yuv(
    path: &Path,
    width: usize,
    height: usize,
    format: SequenceFormat,
    max_frames: Option<usize>,
) -> Result<VideoSequence, VideoError> {
    let mut seq = VideoSequence::new(format, width, height)?;
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let frame_bytes = format.frame_bytes(width, height);
    if bytes.len() % frame_bytes != 0 {
        return Err(VideoError::Format(format!(
            "{}: file size {} does not match {}x{} frames: expected multiple of {}",
            path.display(),
            bytes.len(),
            width,
            height,
            frame_bytes
        )));
    }
    let mut n_frames = bytes.len() / frame_bytes;
    if let Some(limit) = max_frames {
        n_frames = n_frames.min(limit);
    }
    let (cw, ch) = (width / 2, height / 2);
    for k in 0..n_frames {
        let base = k * frame_bytes;
        let y =
            FramePlane::from_samples(width, height, bytes[base..base + width * height].to_vec())?;
        let frame = match format {
            SequenceFormat::LumaOnly => VideoFrame::luma(y),
            SequenceFormat::Yuv420 => {
                let ub = base + width * height;
                let vb = ub + cw * ch;
                VideoFrame {
                    y,
                    u: Some(FramePlane::from_samples(
                        cw,
                        ch,
                        bytes[ub..ub + cw * ch].to_vec(),
                    )?),
                    v: Some(FramePlane::from_samples(
                        cw,
                        ch,
                        bytes[vb..vb + cw * ch].to_vec(),
                    )?),
                }
            }
        };
        seq.push_frame(frame)?;
    }
    Ok(seq)
}

/// Writes the sequence as raw planar data, returning the byte count.
pub fn write_yuv(seq: &VideoSequence, path: &Path) -> Result<u64, VideoError> {
    let mut file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut written = 0u64;
    for frame in seq.frames() {
        file.write_all(frame.y.as_slice())
            .map_err(|e| io_err(path, e))?;
        written += frame.y.as_slice().len() as u64;
        if seq.format() == SequenceFormat::Yuv420 {
            for plane in [frame.u.as_ref(), frame.v.as_ref()].into_iter().flatten() {
                file.write_all(plane.as_slice())
                    .map_err(|e| io_err(path, e))?;
                written += plane.as_slice().len() as u64;
            }
        }
    }
    Ok(written)
}

/// Synthetic planar scene painted on the world plane z = a0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    /// Axis-aligned checkerboard, period 16 scene units, phase centered on
    /// the origin so the on-axis ray sees the middle of a bright square.
    Checker,
    /// Grid of soft-edged bright lines every 60 scene units on a dark
    /// background. Lines are straight in the scene, curved through the
    /// fisheye, straight again after rectification.
    LineField,
    /// Two-octave value noise; fully determined by the seed.
    TexturedNoise { seed: u64 },
}

const CHECKER_PERIOD: f64 = 16.0;
const LINE_SPACING: f64 = 60.0;
const LINE_THICKNESS: f64 = 1.5;

/// Scene luminance at the given scene coordinates, in [0, 255].
pub fn scene_value(kind: SceneKind, x: f64, y: f64) -> f64 {
    match kind {
        SceneKind::Checker => {
            let cx = (x / CHECKER_PERIOD + 0.5).floor() as i64;
            let cy = (y / CHECKER_PERIOD + 0.5).floor() as i64;
            if (cx + cy) % 2 == 0 {
                210.0
            } else {
                40.0
            }
        }
        SceneKind::LineField => {
            let dist = |t: f64| {
                let r = t.rem_euclid(LINE_SPACING);
                r.min(LINE_SPACING - r)
            };
            let d = dist(x).min(dist(y));
            30.0 + 200.0 * (1.0 - d / LINE_THICKNESS).max(0.0)
        }
        SceneKind::TexturedNoise { seed } => {
            let n1 = value_noise(x / 32.0, y / 32.0, seed, 1);
            let n2 = value_noise(x / 8.0, y / 8.0, seed, 2);
            255.0 * (0.65 * n1 + 0.35 * n2)
        }
    }
}

/// Bilinearly interpolated lattice noise in [0, 1].
fn value_noise(x: f64, y: f64, seed: u64, octave: u64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as i64, y0 as i64);
    let corner = |dx: i64, dy: i64| lattice_hash(x0 + dx, y0 + dy, seed, octave);
    let top = corner(0, 0) * (1.0 - fx) + corner(1, 0) * fx;
    let bot = corner(0, 1) * (1.0 - fx) + corner(1, 1) * fx;
    top * (1.0 - fy) + bot * fy
}

fn lattice_hash(ix: i64, iy: i64, seed: u64, octave: u64) -> f64 {
    // splitmix64 over the packed lattice coordinates.
    let mut z = (ix as u64)
        .wrapping_mul(0x9E3779B97F4A7C15)
        .wrapping_add((iy as u64).wrapping_mul(0xBF58476D1CE4E5B9))
        .wrapping_add(seed.wrapping_mul(0x94D049BB133111EB))
        .wrapping_add(octave);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Renders a fisheye view of a plane at depth `|a0|` translating by
/// `(dx, dy)` scene units per frame. Pixels whose rays miss the plane
/// (axial component >= 0 at the sensor edge of very wide lenses) are black.
///
/// For 4:2:0 output, chroma carries a half-resolution copy of the scene:
/// U is the 2x2 luma mean and V its inverse, giving the chroma planes real
/// structure without a color model.
pub fn synthesize_fisheye_sequence(
    k: &CameraIntrinsics,
    scene: SceneKind,
    n_frames: usize,
    motion: (f64, f64),
    format: SequenceFormat,
) -> Result<VideoSequence, VideoError> {
    if n_frames == 0 {
        return Err(VideoError::Contract("need at least one frame".into()));
    }
    let (h, w) = k.sensor_size();
    let (w, h) = (w as usize, h as usize);
    let depth = k.coeffs()[0]; // plane at z = a0 (negative side of the camera)
    let mut seq = VideoSequence::new(format, w, h)?;
    for t in 0..n_frames {
        let ox = motion.0 * t as f64;
        let oy = motion.1 * t as f64;
        let y = FramePlane::from_fn(w, h, |i, j| {
            let ray = k.cam2world((i as f64, j as f64));
            // Same sign as depth means the ray points at the plane.
            if ray.z.signum() != depth.signum() {
                return 0;
            }
            let s = depth / ray.z;
            quantize(scene_value(scene, s * ray.x + ox, s * ray.y + oy))
        });
        let frame = match format {
            SequenceFormat::LumaOnly => VideoFrame::luma(y),
            SequenceFormat::Yuv420 => {
                let (cw, ch) = (w / 2, h / 2);
                let u = FramePlane::from_fn(cw, ch, |i, j| {
                    let s = y.get(2 * i, 2 * j) as u32
                        + y.get(2 * i, 2 * j + 1) as u32
                        + y.get(2 * i + 1, 2 * j) as u32
                        + y.get(2 * i + 1, 2 * j + 1) as u32;
                    ((s + 2) / 4) as u8
                });
                let v = FramePlane::from_fn(cw, ch, |i, j| 255 - u.get(i, j));
                VideoFrame {
                    y,
                    u: Some(u),
                    v: Some(v),
                }
            }
        };
        seq.push_frame(frame)?;
    }
    Ok(seq)
}

/// Renders the scene without any lens model: pixel (i, j) of frame t samples
/// the scene at (i + t*dy, j + t*dx) ... with motion given as (d_row, d_col)
/// per frame. Integer motion therefore shifts frames sample-exactly, which
/// motion-search tests rely on.
pub fn synthesize_rectilinear_sequence(
    width: usize,
    height: usize,
    scene: SceneKind,
    n_frames: usize,
    motion: (f64, f64),
) -> Result<VideoSequence, VideoError> {
    if n_frames == 0 {
        return Err(VideoError::Contract("need at least one frame".into()));
    }
    let mut seq = VideoSequence::new(SequenceFormat::LumaOnly, width, height)?;
    for t in 0..n_frames {
        let or = motion.0 * t as f64;
        let oc = motion.1 * t as f64;
        let y = FramePlane::from_fn(width, height, |i, j| {
            quantize(scene_value(scene, i as f64 + or, j as f64 + oc))
        });
        seq.push_frame(VideoFrame::luma(y))?;
    }
    Ok(seq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use tempfile::tempdir;

    #[test]
    fn read_luma_counts_frames() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("two.y");
        fs::write(&path, [1u8, 2, 3, 4, 5, 6, 7, 8]).unwrap();
        let seq = read_yuv(&path, 2, 2, SequenceFormat::LumaOnly, None).unwrap();
        assert_eq!(seq.num_frames(), 2);
        assert_eq!(seq.frames()[1].y.get(1, 1), 8);
    }

    #[test]
    fn read_yuv420_builds_chroma() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("one.yuv");
        fs::write(&path, [10u8, 20, 30, 40, 99, 77]).unwrap();
        let seq = read_yuv(&path, 2, 2, SequenceFormat::Yuv420, None).unwrap();
        assert_eq!(seq.num_frames(), 1);
        let f = &seq.frames()[0];
        assert_eq!(f.u.as_ref().unwrap().get(0, 0), 99);
        assert_eq!(f.v.as_ref().unwrap().get(0, 0), 77);
    }

    #[test]
    fn read_rejects_partial_frame() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.y");
        fs::write(&path, [0u8; 7]).unwrap();
        let err = read_yuv(&path, 2, 2, SequenceFormat::LumaOnly, None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("expected multiple of 4"), "{msg}");
    }

    #[test]
    fn read_rejects_odd_yuv420() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("odd.yuv");
        fs::write(&path, [0u8; 9]).unwrap();
        let err = read_yuv(&path, 3, 3, SequenceFormat::Yuv420, None).unwrap_err();
        assert!(matches!(err, VideoError::Contract(_)), "{err:?}");
    }

    #[test]
    fn max_frames_truncates() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("three.y");
        fs::write(&path, [0u8; 12]).unwrap();
        let seq = read_yuv(&path, 2, 2, SequenceFormat::LumaOnly, Some(2)).unwrap();
        assert_eq!(seq.num_frames(), 2);
    }

    #[test]
    fn write_read_roundtrip_is_bit_exact() {
        let dir = tempdir().unwrap();
        for (name, format) in [
            ("a.y", SequenceFormat::LumaOnly),
            ("a.yuv", SequenceFormat::Yuv420),
        ] {
            let cam = fixtures::offcenter_affine();
            let seq = synthesize_fisheye_sequence(
                &cam,
                SceneKind::TexturedNoise { seed: 7 },
                2,
                (1.5, -0.5),
                format,
            )
            .unwrap();
            let path = dir.path().join(name);
            let n = write_yuv(&seq, &path).unwrap();
            let (w, h) = (seq.width(), seq.height());
            assert_eq!(n as usize, 2 * format.frame_bytes(w, h));
            let back = read_yuv(&path, w, h, format, None).unwrap();
            assert_eq!(back, seq);
        }
    }

    #[test]
    fn zero_motion_freezes_the_scene() {
        let cam = fixtures::wide_circular();
        let seq = synthesize_fisheye_sequence(
            &cam,
            SceneKind::Checker,
            3,
            (0.0, 0.0),
            SequenceFormat::LumaOnly,
        )
        .unwrap();
        assert_eq!(seq.frames()[0], seq.frames()[1]);
        assert_eq!(seq.frames()[1], seq.frames()[2]);
    }

    #[test]
    fn center_pixel_sees_scene_origin() {
        // The fixture's distortion center has integer coordinates, so that
        // exact pixel rides the on-axis ray to scene (0, 0).
        let cam = fixtures::wide_circular();
        let seq = synthesize_fisheye_sequence(
            &cam,
            SceneKind::Checker,
            1,
            (0.0, 0.0),
            SequenceFormat::LumaOnly,
        )
        .unwrap();
        let (r, c) = cam.center();
        let got = seq.frames()[0].y.get(r as usize, c as usize);
        assert_eq!(got as f64, scene_value(SceneKind::Checker, 0.0, 0.0));
    }

    #[test]
    fn noise_is_seed_deterministic() {
        let cam = fixtures::strong_quartic();
        let mk = |seed| {
            synthesize_fisheye_sequence(
                &cam,
                SceneKind::TexturedNoise { seed },
                1,
                (0.0, 0.0),
                SequenceFormat::LumaOnly,
            )
            .unwrap()
        };
        assert_eq!(mk(42), mk(42));
        assert_ne!(mk(42), mk(43));
    }

    #[test]
    fn rectilinear_integer_motion_shifts_exactly() {
        let seq = synthesize_rectilinear_sequence(
            64,
            48,
            SceneKind::TexturedNoise { seed: 9 },
            2,
            (3.0, 2.0),
        )
        .unwrap();
        let (f0, f1) = (&seq.frames()[0].y, &seq.frames()[1].y);
        for i in 0..45 {
            for j in 0..62 {
                assert_eq!(f1.get(i, j), f0.get(i + 3, j + 2), "at ({i}, {j})");
            }
        }
    }

    #[test]
    fn sequence_rejects_mismatched_frame() {
        let mut seq = VideoSequence::new(SequenceFormat::LumaOnly, 4, 4).unwrap();
        let err = seq
            .push_frame(VideoFrame::luma(FramePlane::new(2, 2)))
            .unwrap_err();
        assert!(matches!(err, VideoError::Contract(_)));
    }
}
