//! Rate and quality metrics: PSNR-Y, bpp, SSIM, Bjøntegaard deltas, and the
//! RD-curve containers they operate on.

mod bd;
mod ssim;

pub use bd::{bd_quality, bd_rate};
pub use ssim::{ssim, ssim_plane};

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::video::{FramePlane, VideoSequence};

/// Serialized stand-in for an infinite (lossless) PSNR, in dB.
pub const PSNR_CAP_DB: f64 = 100.0;

#[derive(Debug, Error)]
pub enum MetricError {
    /// Caller-supplied arguments violate a precondition.
    #[error("contract error: {0}")]
    Contract(String),
    /// The metric is undefined for these inputs (e.g. disjoint rate ranges).
    #[error("metric error: {0}")]
    Metric(String),
    /// Malformed CSV content.
    #[error("csv format error: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Per-frame and aggregate luma PSNR.
#[derive(Debug, Clone, PartialEq)]
pub struct PsnrResult {
    /// Raw per-frame values; lossless frames are `f64::INFINITY` here.
    pub per_frame: Vec<f64>,
    /// Mean of per-frame values with infinities capped at 100 dB.
    pub mean_db: f64,
    /// True when at least one frame hit the cap.
    pub capped: bool,
}

/// PSNR between two planes: `10*log10(255^2 / MSE)`, infinite when equal.
pub fn psnr_plane(a: &FramePlane, b: &FramePlane) -> Result<f64, MetricError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(MetricError::Contract(format!(
            "plane geometry mismatch: {}x{} vs {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    let mut sum = 0u64;
    for (&x, &y) in a.as_slice().iter().zip(b.as_slice()) {
        let d = x as i64 - y as i64;
        sum += (d * d) as u64;
    }
    if sum == 0 {
        return Ok(f64::INFINITY);
    }
    let mse = sum as f64 / a.as_slice().len() as f64;
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}

/// Luma PSNR per frame plus the capped sequence mean.
pub fn psnr_y(a: &VideoSequence, b: &VideoSequence) -> Result<PsnrResult, MetricError> {
    if a.num_frames() != b.num_frames() {
        return Err(MetricError::Contract(format!(
            "frame count mismatch: {} vs {}",
            a.num_frames(),
            b.num_frames()
        )));
    }
    if a.is_empty() {
        return Err(MetricError::Contract("empty sequences".into()));
    }
    let mut per_frame = Vec::with_capacity(a.num_frames());
    for (fa, fb) in a.frames().iter().zip(b.frames()) {
        per_frame.push(psnr_plane(&fa.y, &fb.y)?);
    }
    let capped = per_frame.iter().any(|v| !v.is_finite());
    let mean_db =
        per_frame.iter().map(|v| v.min(PSNR_CAP_DB)).sum::<f64>() / per_frame.len() as f64;
    Ok(PsnrResult {
        per_frame,
        mean_db,
        capped,
    })
}

/// Bits per pixel: `size_bits / (width * height * frames)`.
pub fn bpp(size_bits: u64, width: usize, height: usize, frames: usize) -> f64 {
    assert!(
        width > 0 && height > 0 && frames > 0,
        "bpp needs positive geometry"
    );
    size_bits as f64 / (width * height * frames) as f64
}

/// Which quality column an RD curve tracks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QualityKind {
    /// Luma PSNR in dB.
    Psnr,
    /// SSIM in (0, 1].
    Ssim,
}

/// One operating point of a rate-quality curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdPoint {
    /// Quantization parameter that produced the point (label only).
    pub qp: i32,
    pub rate_bpp: f64,
    pub quality: f64,
}

/// One measured sweep point carrying both quality metrics, as stored in CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub qp: i32,
    pub rate_bpp: f64,
    pub psnr_y_db: f64,
    pub ssim: f64,
}

/// Rate-quality curve: at least four points, sorted and strictly increasing
/// in rate, with quality non-decreasing in rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RdCurve {
    points: Vec<RdPoint>,
}

impl RdCurve {
    pub fn new(mut points: Vec<RdPoint>, kind: QualityKind) -> Result<Self, MetricError> {
        if points.len() < 4 {
            return Err(MetricError::Contract(format!(
                "rd curve needs at least 4 points for a cubic fit, got {}",
                points.len()
            )));
        }
        for p in &points {
            if !(p.rate_bpp.is_finite() && p.rate_bpp > 0.0) {
                return Err(MetricError::Contract(format!(
                    "rate must be a positive real, got {} at qp {}",
                    p.rate_bpp, p.qp
                )));
            }
            match kind {
                QualityKind::Psnr => {
                    if !p.quality.is_finite() {
                        return Err(MetricError::Contract(format!(
                            "psnr quality must be finite, got {} at qp {}",
                            p.quality, p.qp
                        )));
                    }
                }
                QualityKind::Ssim => {
                    if !(p.quality > 0.0 && p.quality <= 1.0) {
                        return Err(MetricError::Contract(format!(
                            "ssim quality must lie in (0, 1], got {} at qp {}",
                            p.quality, p.qp
                        )));
                    }
                }
            }
        }
        points.sort_by(|a, b| a.rate_bpp.total_cmp(&b.rate_bpp));
        for pair in points.windows(2) {
            if pair[1].rate_bpp <= pair[0].rate_bpp {
                return Err(MetricError::Contract(format!(
                    "rates must be strictly increasing: {} then {}",
                    pair[0].rate_bpp, pair[1].rate_bpp
                )));
            }
            if pair[1].quality < pair[0].quality {
                return Err(MetricError::Contract(format!(
                    "quality must be non-decreasing in rate: {} then {}",
                    pair[0].quality, pair[1].quality
                )));
            }
        }
        Ok(RdCurve { points })
    }

    /// Selects one quality column out of a measured sweep.
    pub fn from_sweep(points: &[SweepPoint], kind: QualityKind) -> Result<Self, MetricError> {
        let points = points
            .iter()
            .map(|p| RdPoint {
                qp: p.qp,
                rate_bpp: p.rate_bpp,
                quality: match kind {
                    QualityKind::Psnr => p.psnr_y_db,
                    QualityKind::Ssim => p.ssim,
                },
            })
            .collect();
        Self::new(points, kind)
    }

    pub fn points(&self) -> &[RdPoint] {
        &self.points
    }
}

const CSV_HEADER: &str = "qp,rate_bpp,psnr_y_db,ssim";

/// Writes sweep points as CSV with a fixed header and 6-decimal values.
pub fn write_rd_csv(path: &Path, points: &[SweepPoint]) -> Result<(), MetricError> {
    let mut text = String::from(CSV_HEADER);
    text.push('\n');
    for p in points {
        text.push_str(&format!(
            "{},{:.6},{:.6},{:.6}\n",
            p.qp, p.rate_bpp, p.psnr_y_db, p.ssim
        ));
    }
    fs::write(path, text).map_err(|e| MetricError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Reads a CSV written by [`write_rd_csv`] (or hand-authored with the same
/// header). Accepts any parseable float formatting.
pub fn read_rd_csv(path: &Path) -> Result<Vec<SweepPoint>, MetricError> {
    let text = fs::read_to_string(path).map_err(|e| MetricError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        other => {
            return Err(MetricError::Format(format!(
                "{}: expected header '{}', found {:?}",
                path.display(),
                CSV_HEADER,
                other.unwrap_or("")
            )))
        }
    }
    let mut points = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(MetricError::Format(format!(
                "{}: line {}: expected 4 fields, found {}",
                path.display(),
                idx + 2,
                fields.len()
            )));
        }
        let parse_f = |s: &str, what: &str| -> Result<f64, MetricError> {
            s.parse().map_err(|_| {
                MetricError::Format(format!(
                    "{}: line {}: malformed {what} '{s}'",
                    path.display(),
                    idx + 2
                ))
            })
        };
        points.push(SweepPoint {
            qp: fields[0].parse().map_err(|_| {
                MetricError::Format(format!(
                    "{}: line {}: malformed qp '{}'",
                    path.display(),
                    idx + 2,
                    fields[0]
                ))
            })?,
            rate_bpp: parse_f(fields[1], "rate_bpp")?,
            psnr_y_db: parse_f(fields[2], "psnr_y_db")?,
            ssim: parse_f(fields[3], "ssim")?,
        });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::video::{SequenceFormat, VideoFrame, VideoSequence};
    use tempfile::tempdir;

    fn const_seq(value: u8, frames: usize) -> VideoSequence {
        let mut seq = VideoSequence::new(SequenceFormat::LumaOnly, 16, 16).unwrap();
        for _ in 0..frames {
            seq.push_frame(VideoFrame::luma(FramePlane::filled(16, 16, value)))
                .unwrap();
        }
        seq
    }

    #[test]
    fn psnr_uniform_difference_16() {
        let r = psnr_y(&const_seq(100, 2), &const_seq(116, 2)).unwrap();
        assert!((r.mean_db - 24.0484).abs() < 1e-4, "{}", r.mean_db);
        assert!(!r.capped);
    }

    #[test]
    fn psnr_uniform_difference_1() {
        let r = psnr_y(&const_seq(100, 1), &const_seq(101, 1)).unwrap();
        assert!((r.mean_db - 48.1308).abs() < 1e-4, "{}", r.mean_db);
    }

    #[test]
    fn psnr_identical_caps_at_100() {
        let r = psnr_y(&const_seq(37, 3), &const_seq(37, 3)).unwrap();
        assert_eq!(r.mean_db, 100.0);
        assert!(r.capped);
        assert!(r.per_frame.iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn psnr_is_symmetric() {
        let a = const_seq(10, 1);
        let b = const_seq(250, 1);
        assert_eq!(
            psnr_y(&a, &b).unwrap().mean_db,
            psnr_y(&b, &a).unwrap().mean_db
        );
    }

    #[test]
    fn psnr_rejects_shape_mismatch() {
        let a = const_seq(0, 1);
        let mut b = VideoSequence::new(SequenceFormat::LumaOnly, 8, 8).unwrap();
        b.push_frame(VideoFrame::luma(FramePlane::new(8, 8)))
            .unwrap();
        assert!(matches!(psnr_y(&a, &b), Err(MetricError::Contract(_))));
    }

    #[test]
    fn bpp_reference_values() {
        assert_eq!(bpp(8 * 16 * 9 * 3, 16, 9, 3), 8.0);
        assert_eq!(bpp(16 * 9 * 3, 16, 9, 3), 1.0);
    }

    #[test]
    fn rd_curve_sorts_and_validates() {
        let mk = |rate: f64, q: f64| RdPoint {
            qp: 0,
            rate_bpp: rate,
            quality: q,
        };
        let curve = RdCurve::new(
            vec![mk(0.4, 40.0), mk(0.1, 30.0), mk(0.2, 34.0), mk(0.3, 37.0)],
            QualityKind::Psnr,
        )
        .unwrap();
        let rates: Vec<f64> = curve.points().iter().map(|p| p.rate_bpp).collect();
        assert_eq!(rates, vec![0.1, 0.2, 0.3, 0.4]);

        let dup = RdCurve::new(
            vec![mk(0.1, 30.0), mk(0.1, 31.0), mk(0.2, 34.0), mk(0.3, 37.0)],
            QualityKind::Psnr,
        );
        assert!(matches!(dup, Err(MetricError::Contract(_))));

        let falling = RdCurve::new(
            vec![mk(0.1, 30.0), mk(0.2, 29.0), mk(0.3, 34.0), mk(0.4, 37.0)],
            QualityKind::Psnr,
        );
        assert!(matches!(falling, Err(MetricError::Contract(_))));

        let short = RdCurve::new(vec![mk(0.1, 30.0)], QualityKind::Psnr);
        assert!(matches!(short, Err(MetricError::Contract(_))));

        let bad_ssim = RdCurve::new(
            vec![mk(0.1, 0.5), mk(0.2, 0.6), mk(0.3, 0.7), mk(0.4, 1.2)],
            QualityKind::Ssim,
        );
        assert!(matches!(bad_ssim, Err(MetricError::Contract(_))));
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        let points = vec![
            SweepPoint {
                qp: 24,
                rate_bpp: 0.417233,
                psnr_y_db: 41.25,
                ssim: 0.9931,
            },
            SweepPoint {
                qp: 28,
                rate_bpp: 0.301112,
                psnr_y_db: 38.5,
                ssim: 0.981,
            },
        ];
        write_rd_csv(&path, &points).unwrap();
        let back = read_rd_csv(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert!((back[0].rate_bpp - 0.417233).abs() < 1e-9);
        assert_eq!(back[1].qp, 28);
    }

    #[test]
    fn csv_rejects_wrong_header() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "rate,psnr\n1,2\n").unwrap();
        assert!(matches!(read_rd_csv(&path), Err(MetricError::Format(_))));
    }
}
