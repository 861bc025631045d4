//! Structural similarity with the reference 11x11 Gaussian window.
//!
//! Local statistics are Gaussian-weighted means over sigma = 1.5 windows;
//! only fully interior window positions contribute, and frames are averaged
//! in order so results are independent of any parallelism above this layer.

use crate::metrics::MetricError;
use crate::video::{FramePlane, VideoSequence};

const WINDOW: usize = 11;
const RADIUS: usize = WINDOW / 2;
const C1: f64 = 6.5025; // (0.01 * 255)^2
const C2: f64 = 58.5225; // (0.03 * 255)^2

/// Normalized 1-D Gaussian taps; the separable product sums to one.
fn gaussian_taps() -> [f64; WINDOW] {
    let sigma = 1.5f64;
    let mut taps = [0.0; WINDOW];
    let mut sum = 0.0;
    for (k, tap) in taps.iter_mut().enumerate() {
        let d = k as f64 - RADIUS as f64;
        *tap = (-d * d / (2.0 * sigma * sigma)).exp();
        sum += *tap;
    }
    for tap in &mut taps {
        *tap /= sum;
    }
    taps
}

/// Separable Gaussian filter evaluated at interior positions only.
/// Input is h x w row-major; output is (h - 10) x (w - 10).
fn blur_valid(src: &[f64], w: usize, h: usize, taps: &[f64; WINDOW]) -> Vec<f64> {
    let iw = w - 2 * RADIUS;
    let mut horiz = vec![0.0; h * iw];
    for i in 0..h {
        let row = &src[i * w..(i + 1) * w];
        for jc in 0..iw {
            let mut acc = 0.0;
            for (k, tap) in taps.iter().enumerate() {
                acc += tap * row[jc + k];
            }
            horiz[i * iw + jc] = acc;
        }
    }
    let ih = h - 2 * RADIUS;
    let mut out = vec![0.0; ih * iw];
    for ic in 0..ih {
        for jc in 0..iw {
            let mut acc = 0.0;
            for (k, tap) in taps.iter().enumerate() {
                acc += tap * horiz[(ic + k) * iw + jc];
            }
            out[ic * iw + jc] = acc;
        }
    }
    out
}

/// Mean SSIM between two planes over all interior window positions.
pub fn ssim_plane(a: &FramePlane, b: &FramePlane) -> Result<f64, MetricError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(MetricError::Contract(format!(
            "plane geometry mismatch: {}x{} vs {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    let (w, h) = (a.width(), a.height());
    if w < WINDOW || h < WINDOW {
        return Err(MetricError::Contract(format!(
            "plane {h}x{w} is smaller than the {WINDOW}x{WINDOW} ssim window"
        )));
    }
    let taps = gaussian_taps();
    let x: Vec<f64> = a.as_slice().iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = b.as_slice().iter().map(|&v| v as f64).collect();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(u, v)| u * v).collect();

    let mu_x = blur_valid(&x, w, h, &taps);
    let mu_y = blur_valid(&y, w, h, &taps);
    let e_xx = blur_valid(&xx, w, h, &taps);
    let e_yy = blur_valid(&yy, w, h, &taps);
    let e_xy = blur_valid(&xy, w, h, &taps);

    let mut sum = 0.0;
    for k in 0..mu_x.len() {
        let (mx, my) = (mu_x[k], mu_y[k]);
        let var_x = e_xx[k] - mx * mx;
        let var_y = e_yy[k] - my * my;
        let cov = e_xy[k] - mx * my;
        let num = (2.0 * mx * my + C1) * (2.0 * cov + C2);
        let den = (mx * mx + my * my + C1) * (var_x + var_y + C2);
        sum += num / den;
    }
    Ok(sum / mu_x.len() as f64)
}

/// Mean SSIM over the luma planes of a sequence, frames averaged in order.
pub fn ssim(a: &VideoSequence, b: &VideoSequence) -> Result<f64, MetricError> {
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
    let mut sum = 0.0;
    for (fa, fb) in a.frames().iter().zip(b.frames()) {
        sum += ssim_plane(&fa.y, &fb.y)?;
    }
    Ok(sum / a.num_frames() as f64)
}
