//! Perspective rectification of fisheye frames through remap lookup tables.
//!
//! A LUT stores, for every output pixel, the real-valued source coordinate
//! in the fisheye frame (or an invalid marker). Building one casts a pinhole
//! ray per output pixel and projects it through the camera model; resampling
//! then pulls samples through the table with nearest or bilinear kernels.

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::camera::{CameraIntrinsics, Ray3};
use crate::video::{FramePlane, SequenceFormat, VideoError, VideoFrame, VideoSequence};

#[derive(Debug, Error)]
pub enum RectifyError {
    /// Caller-supplied arguments violate a precondition.
    #[error("contract error: {0}")]
    Contract(String),
    /// A LUT cache file is malformed.
    #[error("lut cache format error: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Video(#[from] VideoError),
}

fn io_err(path: &Path, source: std::io::Error) -> RectifyError {
    RectifyError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Viewing-distance zoom factor. Larger values flatten the per-pixel rays,
/// widening the solid angle the rectified view covers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoomFactor(f64);

impl ZoomFactor {
    pub fn new(sf: f64) -> Result<Self, RectifyError> {
        if !(sf.is_finite() && sf > 0.0) {
            return Err(RectifyError::Contract(format!(
                "zoom factor must be a positive real, got {sf}"
            )));
        }
        Ok(ZoomFactor(sf))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Resampling kernel used by [`remap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interp {
    Nearest,
    Bilinear,
}

/// Per-output-pixel source coordinates into a fixed source geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct RemapLut {
    out_width: usize,
    out_height: usize,
    src_width: usize,
    src_height: usize,
    /// Row-major (row, col) source coordinates; `None` marks invalid.
    entries: Vec<Option<(f64, f64)>>,
    n_valid: usize,
}

impl RemapLut {
    /// Builds a LUT from explicit entries, validating geometry and ranges.
    pub fn from_entries(
        out_size: (usize, usize),
        src_size: (usize, usize),
        entries: Vec<Option<(f64, f64)>>,
    ) -> Result<Self, RectifyError> {
        let (out_h, out_w) = out_size;
        let (src_h, src_w) = src_size;
        if out_h == 0 || out_w == 0 || src_h == 0 || src_w == 0 {
            return Err(RectifyError::Contract(
                "lut geometry must be positive".into(),
            ));
        }
        if entries.len() != out_h * out_w {
            return Err(RectifyError::Contract(format!(
                "lut of {}x{} needs {} entries, got {}",
                out_h,
                out_w,
                out_h * out_w,
                entries.len()
            )));
        }
        let mut n_valid = 0;
        for entry in entries.iter().flatten() {
            let (r, c) = *entry;
            if !(r.is_finite() && c.is_finite()) {
                return Err(RectifyError::Contract(
                    "valid lut entries must be finite".into(),
                ));
            }
            if r < 0.0 || c < 0.0 || r > (src_h - 1) as f64 || c > (src_w - 1) as f64 {
                return Err(RectifyError::Contract(format!(
                    "source coordinate ({r}, {c}) outside {src_h}x{src_w} source"
                )));
            }
            n_valid += 1;
        }
        Ok(RemapLut {
            out_width: out_w,
            out_height: out_h,
            src_width: src_w,
            src_height: src_h,
            entries,
            n_valid,
        })
    }

    /// Output geometry as (height, width).
    pub fn out_size(&self) -> (usize, usize) {
        (self.out_height, self.out_width)
    }

    /// Source geometry as (height, width).
    pub fn src_size(&self) -> (usize, usize) {
        (self.src_height, self.src_width)
    }

    /// Source coordinate (row, col) feeding output pixel (row, col).
    pub fn entry(&self, row: usize, col: usize) -> Option<(f64, f64)> {
        self.entries[row * self.out_width + col]
    }

    /// Fraction of output pixels with a valid source, in [0, 1].
    pub fn coverage(&self) -> f64 {
        self.n_valid as f64 / self.entries.len() as f64
    }

    /// Writes the binary cache layout: magic "FLUT", little-endian u32
    /// height and width, then one f32 (row, col) pair per output pixel with
    /// NaN,NaN marking invalid entries. Lossy: coordinates are rounded to
    /// f32. The source geometry is not stored and must be supplied on read.
    pub fn write_cache(&self, path: &Path) -> Result<(), RectifyError> {
        let mut bytes = Vec::with_capacity(12 + self.entries.len() * 8);
        bytes.extend_from_slice(b"FLUT");
        bytes.extend_from_slice(&(self.out_height as u32).to_le_bytes());
        bytes.extend_from_slice(&(self.out_width as u32).to_le_bytes());
        for entry in &self.entries {
            let (r, c) = match entry {
                Some((r, c)) => (*r as f32, *c as f32),
                None => (f32::NAN, f32::NAN),
            };
            bytes.extend_from_slice(&r.to_le_bytes());
            bytes.extend_from_slice(&c.to_le_bytes());
        }
        fs::write(path, bytes).map_err(|e| io_err(path, e))
    }

    /// Reads a cache written by [`RemapLut::write_cache`]. `src_size` is the
    /// (height, width) of the source frames the LUT was built for.
    pub fn read_cache(path: &Path, src_size: (usize, usize)) -> Result<Self, RectifyError> {
        let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
        if bytes.len() < 12 || &bytes[0..4] != b"FLUT" {
            return Err(RectifyError::Format(format!(
                "{}: missing FLUT header",
                path.display()
            )));
        }
        let out_h = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let out_w = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let expected = 12
            + out_h
                .checked_mul(out_w)
                .and_then(|n| n.checked_mul(8))
                .ok_or_else(|| RectifyError::Format("lut geometry overflows".into()))?;
        if bytes.len() != expected {
            return Err(RectifyError::Format(format!(
                "{}: expected {} bytes for a {}x{} lut, found {}",
                path.display(),
                expected,
                out_h,
                out_w,
                bytes.len()
            )));
        }
        let mut entries = Vec::with_capacity(out_h * out_w);
        for k in 0..out_h * out_w {
            let off = 12 + k * 8;
            let r = f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
            let c = f32::from_le_bytes(bytes[off + 4..off + 8].try_into().unwrap());
            match (r.is_nan(), c.is_nan()) {
                (true, true) => entries.push(None),
                (false, false) => entries.push(Some((r as f64, c as f64))),
                _ => {
                    return Err(RectifyError::Format(format!(
                        "{}: entry {} mixes NaN and a coordinate",
                        path.display(),
                        k
                    )))
                }
            }
        }
        Self::from_entries((out_h, out_w), src_size, entries).map_err(|e| match e {
            RectifyError::Contract(msg) => {
                RectifyError::Format(format!("{}: {}", path.display(), msg))
            }
            other => other,
        })
    }
}

/// Builds the perspective rectification LUT. Output pixel (i, j) casts the
/// pinhole ray (i - h/2, j - w/2, -w/sf) in the camera frame; the entry is
/// its projection when it lands inside the source sensor, invalid otherwise.
pub fn build_perspective_lut(
    k: &CameraIntrinsics,
    out_size: (usize, usize),
    sf: ZoomFactor,
) -> Result<RemapLut, RectifyError> {
    let (out_h, out_w) = out_size;
    if out_h == 0 || out_w == 0 {
        return Err(RectifyError::Contract(
            "output geometry must be positive".into(),
        ));
    }
    let half_h = out_h as f64 / 2.0;
    let half_w = out_w as f64 / 2.0;
    let axial = -(out_w as f64) / sf.value();
    let mut entries = vec![None; out_h * out_w];
    entries
        .par_chunks_mut(out_w)
        .enumerate()
        .for_each(|(i, row)| {
            for (j, slot) in row.iter_mut().enumerate() {
                let ray = Ray3::new(i as f64 - half_h, j as f64 - half_w, axial);
                *slot = k.world2cam(&ray).filter(|&p| k.contains(p));
            }
        });
    let n_valid = entries.iter().filter(|e| e.is_some()).count();
    let (src_h, src_w) = k.sensor_size();
    Ok(RemapLut {
        out_width: out_w,
        out_height: out_h,
        src_width: src_w as usize,
        src_height: src_h as usize,
        entries,
        n_valid,
    })
}

/// Resamples a frame through the LUT. Invalid entries receive `fill`.
/// Bilinear windows are clamped at the frame edge; outputs of both kernels
/// stay within the input's value range.
pub fn remap(
    frame: &FramePlane,
    lut: &RemapLut,
    interp: Interp,
    fill: u8,
) -> Result<FramePlane, RectifyError> {
    if frame.width() != lut.src_width || frame.height() != lut.src_height {
        return Err(RectifyError::Contract(format!(
            "frame is {}x{} but lut expects {}x{} source",
            frame.height(),
            frame.width(),
            lut.src_height,
            lut.src_width
        )));
    }
    let mut out = vec![0u8; lut.out_height * lut.out_width];
    out.par_chunks_mut(lut.out_width)
        .enumerate()
        .for_each(|(i, row)| {
            for (j, px) in row.iter_mut().enumerate() {
                *px = match lut.entries[i * lut.out_width + j] {
                    None => fill,
                    Some((r, c)) => sample(frame, r, c, interp),
                };
            }
        });
    Ok(FramePlane::from_samples(
        lut.out_width,
        lut.out_height,
        out,
    )?)
}

fn sample(frame: &FramePlane, r: f64, c: f64, interp: Interp) -> u8 {
    match interp {
        Interp::Nearest => frame.get(r.round() as usize, c.round() as usize),
        Interp::Bilinear => {
            let max_r = frame.height() - 1;
            let max_c = frame.width() - 1;
            let r0 = r.floor();
            let c0 = c.floor();
            let fr = r - r0;
            let fc = c - c0;
            let r0 = (r0 as usize).min(max_r);
            let c0 = (c0 as usize).min(max_c);
            let r1 = (r0 + 1).min(max_r);
            let c1 = (c0 + 1).min(max_c);
            let v = frame.get(r0, c0) as f64 * (1.0 - fr) * (1.0 - fc)
                + frame.get(r0, c1) as f64 * (1.0 - fr) * fc
                + frame.get(r1, c0) as f64 * fr * (1.0 - fc)
                + frame.get(r1, c1) as f64 * fr * fc;
            (v + 0.5).floor().min(255.0) as u8
        }
    }
}

/// Rectifies every frame of a sequence through one shared LUT.
///
/// `out_size` is the luma output geometry (height, width) and defaults to
/// the input geometry. For 4:2:0 input the chroma planes go through their
/// own half-resolution LUT built from a halved camera model: center and
/// sensor size are divided by two and the polynomial is rescaled so the
/// half-resolution radii see the same ray directions. Fill values are 0 for
/// luma and 128 for chroma.
pub fn rectify_sequence(
    seq: &VideoSequence,
    k: &CameraIntrinsics,
    sf: ZoomFactor,
    out_size: Option<(usize, usize)>,
    interp: Interp,
) -> Result<VideoSequence, RectifyError> {
    let (src_h, src_w) = k.sensor_size();
    if seq.width() != src_w as usize || seq.height() != src_h as usize {
        return Err(RectifyError::Contract(format!(
            "sequence is {}x{} but intrinsics describe a {}x{} sensor",
            seq.height(),
            seq.width(),
            src_h,
            src_w
        )));
    }
    let (out_h, out_w) = out_size.unwrap_or((seq.height(), seq.width()));
    let mut out = VideoSequence::new(seq.format(), out_w, out_h).map_err(|_| {
        RectifyError::Contract(format!(
            "output geometry {out_h}x{out_w} invalid for the sequence format"
        ))
    })?;
    let luma_lut = build_perspective_lut(k, (out_h, out_w), sf)?;
    let chroma_lut = match seq.format() {
        SequenceFormat::LumaOnly => None,
        SequenceFormat::Yuv420 => Some(build_perspective_lut(
            &halve_camera(k),
            (out_h / 2, out_w / 2),
            sf,
        )?),
    };
    for frame in seq.frames() {
        let y = remap(&frame.y, &luma_lut, interp, 0)?;
        let (u, v) = match &chroma_lut {
            None => (None, None),
            Some(lut) => (
                Some(remap(
                    frame.u.as_ref().expect("4:2:0 frame"),
                    lut,
                    interp,
                    128,
                )?),
                Some(remap(
                    frame.v.as_ref().expect("4:2:0 frame"),
                    lut,
                    interp,
                    128,
                )?),
            ),
        };
        out.push_frame(VideoFrame { y, u, v })?;
    }
    Ok(out)
}

/// Camera model for the half-resolution chroma grid. Halving center and
/// sensor size halves every radius; scaling coefficient k by 2^(k-1) keeps
/// f(rho/2) proportional to f(rho), so rays keep their directions.
fn halve_camera(k: &CameraIntrinsics) -> CameraIntrinsics {
    let [a0, a1, a2, a3, a4] = k.coeffs();
    let (cr, cc) = k.center();
    let (h, w) = k.sensor_size();
    CameraIntrinsics::new(
        [a0 / 2.0, a1, 2.0 * a2, 4.0 * a3, 8.0 * a4],
        (cr / 2.0, cc / 2.0),
        k.affine_cde(),
        (h / 2, w / 2),
    )
    .expect("halved model stays valid")
}
