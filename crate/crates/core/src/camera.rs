//! Omnidirectional camera model with a polynomial imaging function.
//!
//! A point on the sensor plane at radius `rho` from the distortion center is
//! mapped to the viewing ray `(u, v, f(rho))` with
//!
//! ```text
//! f(rho) = a0 + a1*rho + a2*rho^2 + a3*rho^3 + a4*rho^4
//! ```
//!
//! [`CameraIntrinsics::cam2world`] evaluates that mapping directly;
//! [`CameraIntrinsics::world2cam`] inverts it by solving the resulting
//! quartic in `rho` and keeping the smallest admissible root, which selects
//! the innermost image circle when the polynomial admits several.
//!
//! Axis order is `(row, col)` throughout. The `x` component of a [`Ray3`]
//! pairs with the row axis and `y` with the column axis.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from intrinsics parsing and validation.
#[derive(Debug, Error)]
pub enum CameraError {
    /// The input text does not match the expected file format.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    /// The file was well formed but the values violate a model invariant.
    #[error("invalid intrinsics: {0}")]
    Validation(String),
}

/// A 3D direction in camera coordinates. Not necessarily unit length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray3 {
    /// Component along the sensor row axis.
    pub x: f64,
    /// Component along the sensor column axis.
    pub y: f64,
    /// Component along the optical axis.
    pub z: f64,
}

impl Ray3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Ray3 { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

/// Supported on-disk representations of the calibration data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntrinsicsFormat {
    /// Whitespace-separated text: polynomial length and coefficients
    /// (lowest order first), distortion center, affine triple `c d e`,
    /// sensor size as `height width`. Lines starting with `#` are comments.
    OcamcalibText,
    /// JSON object with keys `coeffs`, `center`, `sensor_size` and an
    /// optional `affine_cde` (defaults to the identity `[1, 0, 0]`).
    StructuredJson,
}

/// Calibrated camera model: polynomial coefficients, distortion center,
/// affine sensor alignment, and sensor size in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraIntrinsics {
    coeffs: [f64; 5],
    /// Distortion center as (row, col).
    center: (f64, f64),
    /// Stretch matrix [[c, d], [e, 1]] applied to ideal sensor coordinates.
    affine: [f64; 3],
    /// Sensor size as (height, width).
    sensor_size: (u32, u32),
}

impl CameraIntrinsics {
    /// Builds a model from raw parts, rejecting values that break the
    /// projection math (zero `a0`, singular affine matrix, center outside
    /// the sensor, zero-sized sensor, non-finite numbers).
    pub fn new(
        coeffs: [f64; 5],
        center: (f64, f64),
        affine_cde: [f64; 3],
        sensor_size: (u32, u32),
    ) -> Result<Self, CameraError> {
        let all_finite = coeffs.iter().all(|v| v.is_finite())
            && center.0.is_finite()
            && center.1.is_finite()
            && affine_cde.iter().all(|v| v.is_finite());
        if !all_finite {
            return Err(CameraError::Validation(
                "all calibration values must be finite".into(),
            ));
        }
        if coeffs[0] == 0.0 {
            return Err(CameraError::Validation(
                "constant coefficient a0 must be nonzero".into(),
            ));
        }
        let det = affine_cde[0] - affine_cde[1] * affine_cde[2];
        if det == 0.0 {
            return Err(CameraError::Validation(
                "affine matrix must be invertible (c - d*e != 0)".into(),
            ));
        }
        if sensor_size.0 == 0 || sensor_size.1 == 0 {
            return Err(CameraError::Validation(
                "sensor size must be positive in both dimensions".into(),
            ));
        }
        let (h, w) = (sensor_size.0 as f64, sensor_size.1 as f64);
        if !(0.0..h).contains(&center.0) || !(0.0..w).contains(&center.1) {
            return Err(CameraError::Validation(format!(
                "distortion center ({}, {}) lies outside the {}x{} sensor",
                center.0, center.1, sensor_size.0, sensor_size.1
            )));
        }
        Ok(CameraIntrinsics {
            coeffs,
            center,
            affine: affine_cde,
            sensor_size,
        })
    }

    /// Polynomial coefficients `a0..a4`, lowest order first.
    pub fn coeffs(&self) -> [f64; 5] {
        self.coeffs
    }

    /// Distortion center as (row, col).
    pub fn center(&self) -> (f64, f64) {
        self.center
    }

    /// Affine parameters `(c, d, e)` of the stretch matrix [[c, d], [e, 1]].
    pub fn affine_cde(&self) -> [f64; 3] {
        self.affine
    }

    /// Sensor size as (height, width) in pixels.
    pub fn sensor_size(&self) -> (u32, u32) {
        self.sensor_size
    }

    /// `f(rho)`.
    pub fn eval_poly(&self, rho: f64) -> f64 {
        horner(&self.coeffs, rho)
    }

    /// Largest sensor radius considered by the inverse projection:
    /// 1.5x the half-diagonal of the sensor.
    pub fn rho_max(&self) -> f64 {
        let (h, w) = (self.sensor_size.0 as f64, self.sensor_size.1 as f64);
        1.5 * 0.5 * (h * h + w * w).sqrt()
    }

    /// Largest radius up to which the model stays injective, i.e. the ray
    /// elevation `f(rho)/rho` remains strictly monotone. Found by scanning
    /// the sign of `f'(rho)*rho - f(rho)`, which near zero equals `-a0`.
    pub fn max_invertible_radius(&self) -> f64 {
        let rho_max = self.rho_max();
        let steps = 4096;
        let sign0 = -self.coeffs[0].signum();
        for k in 1..=steps {
            let rho = rho_max * k as f64 / steps as f64;
            let g = self.poly_deriv(rho) * rho - self.eval_poly(rho);
            if g.signum() != sign0 {
                return rho_max * (k - 1) as f64 / steps as f64;
            }
        }
        rho_max
    }

    fn poly_deriv(&self, rho: f64) -> f64 {
        let [_, a1, a2, a3, a4] = self.coeffs;
        a1 + rho * (2.0 * a2 + rho * (3.0 * a3 + rho * 4.0 * a4))
    }

    /// Maps a pixel position (row, col) to its viewing ray.
    ///
    /// The ray is not normalized: its `(x, y)` part equals the ideal sensor
    /// coordinates and its `z` part equals `f(rho)`.
    pub fn cam2world(&self, pixel: (f64, f64)) -> Ray3 {
        let dr = pixel.0 - self.center.0;
        let dc = pixel.1 - self.center.1;
        let [c, d, e] = self.affine;
        let det = c - d * e;
        let u = (dr - d * dc) / det;
        let v = (c * dc - e * dr) / det;
        let rho = (u * u + v * v).sqrt();
        Ray3::new(u, v, self.eval_poly(rho))
    }

    /// Maps a viewing ray to the pixel position (row, col) it images to, or
    /// `None` when no sensor radius in `[0, rho_max]` sees the ray.
    ///
    /// A ray along the optical axis maps to the distortion center exactly.
    pub fn world2cam(&self, ray: &Ray3) -> Option<(f64, f64)> {
        let m = (ray.x * ray.x + ray.y * ray.y).sqrt();
        if m == 0.0 {
            if ray.z == 0.0 {
                return None;
            }
            return Some(self.center);
        }
        // The radius solves f(rho) * m = rho * z, i.e.
        // a0*m + (a1*m - z)*rho + a2*m*rho^2 + a3*m*rho^3 + a4*m*rho^4 = 0.
        let [a0, a1, a2, a3, a4] = self.coeffs;
        let poly = [a0 * m, a1 * m - ray.z, a2 * m, a3 * m, a4 * m];
        let rho = smallest_root_in(&poly, self.rho_max())?;
        let u = rho * ray.x / m;
        let v = rho * ray.y / m;
        let [c, d, e] = self.affine;
        Some((c * u + d * v + self.center.0, e * u + v + self.center.1))
    }

    /// True when (row, col) lies inside the sensor rectangle, with sampling
    /// treated as valid up to the last pixel coordinate.
    pub fn contains(&self, pixel: (f64, f64)) -> bool {
        let (h, w) = (self.sensor_size.0 as f64, self.sensor_size.1 as f64);
        pixel.0 >= 0.0 && pixel.0 <= h - 1.0 && pixel.1 >= 0.0 && pixel.1 <= w - 1.0
    }
}

fn horner(coeffs: &[f64; 5], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn horner_deriv(coeffs: &[f64; 5], x: f64) -> f64 {
    let mut acc = 0.0;
    for k in (1..5).rev() {
        acc = acc * x + coeffs[k] * k as f64;
    }
    acc
}

/// Smallest real root of the degree-4 polynomial (coefficients lowest order
/// first) inside `[0, limit]`, or `None` when there is none.
fn smallest_root_in(coeffs: &[f64; 5], limit: f64) -> Option<f64> {
    let max_abs = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if max_abs == 0.0 {
        return None;
    }
    // Trim numerically zero leading coefficients so the companion matrix is
    // well conditioned when the high-order terms vanish.
    let mut degree = 4;
    while degree > 0 && coeffs[degree].abs() <= 1e-14 * max_abs {
        degree -= 1;
    }

    let mut roots: Vec<f64> = Vec::with_capacity(4);
    match degree {
        0 => return None,
        1 => roots.push(-coeffs[0] / coeffs[1]),
        2 => {
            let (a, b, c) = (coeffs[2], coeffs[1], coeffs[0]);
            let disc = b * b - 4.0 * a * c;
            if disc < 0.0 {
                return None;
            }
            // Citardauq form for the root that would cancel catastrophically.
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            roots.push(q / a);
            if q != 0.0 {
                roots.push(c / q);
            } else {
                roots.push(0.0);
            }
        }
        _ => {
            let lead = coeffs[degree];
            let mut companion = nalgebra::DMatrix::<f64>::zeros(degree, degree);
            for i in 1..degree {
                companion[(i, i - 1)] = 1.0;
            }
            for (i, item) in companion.column_mut(degree - 1).iter_mut().enumerate() {
                *item = -coeffs[i] / lead;
            }
            for ev in companion.complex_eigenvalues().iter() {
                if ev.im.abs() <= 1e-6 * (1.0 + ev.re.abs()) {
                    roots.push(ev.re);
                }
            }
        }
    }

    let mut best: Option<f64> = None;
    for root in roots {
        let polished = newton_polish(coeffs, root);
        // Tolerate tiny negative values from rounding; they mean rho = 0.
        if polished >= -1e-9 && polished <= limit + 1e-9 {
            let clamped = polished.max(0.0).min(limit);
            best = Some(match best {
                Some(b) => b.min(clamped),
                None => clamped,
            });
        }
    }
    best
}

fn newton_polish(coeffs: &[f64; 5], mut x: f64) -> f64 {
    for _ in 0..3 {
        let p = horner(coeffs, x);
        let dp = horner_deriv(coeffs, x);
        if dp.abs() < 1e-300 {
            break;
        }
        let step = p / dp;
        if !step.is_finite() {
            break;
        }
        x -= step;
    }
    x
}

/// Parses calibration text in the given format and validates the result.
pub fn parse_intrinsics(
    text: &str,
    format: IntrinsicsFormat,
) -> Result<CameraIntrinsics, CameraError> {
    match format {
        IntrinsicsFormat::OcamcalibText => parse_ocamcalib(text),
        IntrinsicsFormat::StructuredJson => parse_structured(text),
    }
}

#[derive(Deserialize)]
struct StructuredIntrinsics {
    coeffs: Vec<f64>,
    center: (f64, f64),
    #[serde(default)]
    affine_cde: Option<[f64; 3]>,
    sensor_size: (u32, u32),
}

fn parse_structured(text: &str) -> Result<CameraIntrinsics, CameraError> {
    let raw: StructuredIntrinsics = serde_json::from_str(text).map_err(|e| CameraError::Parse {
        line: e.line(),
        msg: e.to_string(),
    })?;
    if raw.coeffs.len() != 5 {
        return Err(CameraError::Validation(format!(
            "coeffs must have exactly 5 entries, found {}",
            raw.coeffs.len()
        )));
    }
    let mut coeffs = [0.0; 5];
    coeffs.copy_from_slice(&raw.coeffs);
    CameraIntrinsics::new(
        coeffs,
        raw.center,
        raw.affine_cde.unwrap_or([1.0, 0.0, 0.0]),
        raw.sensor_size,
    )
}

/// Token stream over non-comment lines, remembering 1-based line numbers.
struct Tokens<'a> {
    items: std::vec::IntoIter<(usize, &'a str)>,
    last_line: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let mut items = Vec::new();
        let mut last_line = 1;
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            last_line = idx + 1;
            for tok in line.split_whitespace() {
                items.push((idx + 1, tok));
            }
        }
        Tokens {
            items: items.into_iter(),
            last_line,
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str), CameraError> {
        self.items.next().ok_or_else(|| CameraError::Parse {
            line: self.last_line,
            msg: format!("unexpected end of file: expected {what}"),
        })
    }

    fn next_f64(&mut self, what: &str) -> Result<f64, CameraError> {
        let (line, tok) = self.next(what)?;
        tok.parse().map_err(|_| CameraError::Parse {
            line,
            msg: format!("malformed numeric token '{tok}' (expected {what})"),
        })
    }

    fn next_u32(&mut self, what: &str) -> Result<u32, CameraError> {
        let (line, tok) = self.next(what)?;
        tok.parse().map_err(|_| CameraError::Parse {
            line,
            msg: format!("malformed integer token '{tok}' (expected {what})"),
        })
    }
}

fn parse_ocamcalib(text: &str) -> Result<CameraIntrinsics, CameraError> {
    let mut toks = Tokens::new(text);

    let (count_line, count_tok) = toks.next("polynomial coefficient count")?;
    let count: usize = count_tok.parse().map_err(|_| CameraError::Parse {
        line: count_line,
        msg: format!(
            "malformed integer token '{count_tok}' (expected polynomial coefficient count)"
        ),
    })?;
    if count != 5 {
        return Err(CameraError::Parse {
            line: count_line,
            msg: format!("expected 5 coefficients, found {count}"),
        });
    }
    let mut coeffs = [0.0; 5];
    for (k, slot) in coeffs.iter_mut().enumerate() {
        *slot = toks.next_f64(&format!("polynomial coefficient a{k}"))?;
    }
    let center = (
        toks.next_f64("distortion center row")?,
        toks.next_f64("distortion center col")?,
    );
    let affine = [
        toks.next_f64("affine parameter c")?,
        toks.next_f64("affine parameter d")?,
        toks.next_f64("affine parameter e")?,
    ];
    let sensor_size = (
        toks.next_u32("sensor height")?,
        toks.next_u32("sensor width")?,
    );
    if let Some((line, tok)) = toks.items.next() {
        return Err(CameraError::Parse {
            line,
            msg: format!("unexpected trailing token '{tok}'"),
        });
    }
    CameraIntrinsics::new(coeffs, center, affine, sensor_size)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use proptest::prelude::*;

    #[test]
    fn axis_ray_hits_center_exactly() {
        for cam in fixtures::all() {
            let p = cam.world2cam(&Ray3::new(0.0, 0.0, -1.0)).unwrap();
            assert_eq!(p, cam.center());
        }
    }

    #[test]
    fn zero_ray_has_no_projection() {
        let cam = fixtures::wide_circular();
        assert_eq!(cam.world2cam(&Ray3::new(0.0, 0.0, 0.0)), None);
    }

    #[test]
    fn cam2world_z_is_polynomial_of_radius() {
        let cam = fixtures::offcenter_affine();
        let ray = cam.cam2world((40.0, 200.0));
        let rho = (ray.x * ray.x + ray.y * ray.y).sqrt();
        assert!((ray.z - cam.eval_poly(rho)).abs() < 1e-12);
    }

    #[test]
    fn roundtrip_grid_under_1e6_px() {
        for cam in fixtures::all() {
            let (h, w) = cam.sensor_size();
            let mut worst = 0.0f64;
            for i in (0..h).step_by(7) {
                for j in (0..w).step_by(7) {
                    let p = (i as f64, j as f64);
                    let ray = cam.cam2world(p);
                    let q = cam
                        .world2cam(&ray)
                        .unwrap_or_else(|| panic!("ray from {p:?} did not project back"));
                    let err = ((q.0 - p.0).powi(2) + (q.1 - p.1).powi(2)).sqrt();
                    worst = worst.max(err);
                }
            }
            assert!(worst < 1e-6, "worst roundtrip error {worst}");
        }
    }

    #[test]
    fn inverse_picks_innermost_radius() {
        // Coefficients chosen so the elevation f(rho)/rho rises, dips past
        // rho ~ 58, and rises again: outer radii repeat inner elevations.
        let cam = CameraIntrinsics::new(
            [-60.0, 0.0, -0.02, 0.0, 2.0e-7],
            (64.0, 64.0),
            [1.0, 0.0, 0.0],
            (128, 128),
        )
        .unwrap();
        let inner = cam.max_invertible_radius();
        // Sample a radius past the monotone range along +col; its elevation
        // must also be reachable at some radius below `inner`, and the
        // inverse must return that inner radius.
        let rho_outer = inner * 1.2;
        assert!(rho_outer < cam.rho_max());
        let ray = Ray3::new(0.0, rho_outer, cam.eval_poly(rho_outer));
        let p = cam.world2cam(&ray).unwrap();
        let rho_back = p.1 - cam.center().1;
        assert!(
            rho_back < inner,
            "picked rho {rho_back}, monotone limit {inner}"
        );
        assert!((cam.eval_poly(rho_back) / rho_back - ray.z / rho_outer).abs() < 1e-9);
    }

    #[test]
    fn out_of_range_ray_projects_to_none() {
        let cam = fixtures::wide_circular();
        // Steeply backward ray: f(rho) stays negative on the whole sensor,
        // so no radius can reach a large positive elevation.
        assert_eq!(cam.world2cam(&Ray3::new(1.0, 0.0, 500.0)), None);
    }

    #[test]
    fn max_invertible_radius_covers_sensor_fixtures() {
        for cam in fixtures::all() {
            let (h, w) = cam.sensor_size();
            let half_diag = 0.5 * ((h * h + w * w) as f64).sqrt();
            assert!(cam.max_invertible_radius() >= half_diag);
        }
    }

    #[test]
    fn parse_ocamcalib_roundtrip() {
        let text = "\
# calibration dump
5
-127.5 0.0 8.2e-4 -1.1e-7 4.9e-11

130.25 126.5
0.9987 1.2e-4 -3.4e-5
260 254
";
        let cam = parse_intrinsics(text, IntrinsicsFormat::OcamcalibText).unwrap();
        assert_eq!(cam.coeffs()[0], -127.5);
        assert_eq!(cam.center(), (130.25, 126.5));
        assert_eq!(cam.affine_cde(), [0.9987, 1.2e-4, -3.4e-5]);
        assert_eq!(cam.sensor_size(), (260, 254));
    }

    #[test]
    fn parse_ocamcalib_multiline_polynomial() {
        let text = "5\n-127.5\n0.0 8.2e-4\n-1.1e-7 4.9e-11\n130.25 126.5\n1 0 0\n260 254\n";
        let cam = parse_intrinsics(text, IntrinsicsFormat::OcamcalibText).unwrap();
        assert_eq!(cam.coeffs()[2], 8.2e-4);
    }

    #[test]
    fn parse_ocamcalib_wrong_coeff_count_is_parse_error() {
        let text = "6\n-127.5 0.0 8.2e-4 -1.1e-7 4.9e-11 1.0\n130 126\n1 0 0\n260 254\n";
        let err = parse_intrinsics(text, IntrinsicsFormat::OcamcalibText).unwrap_err();
        match err {
            CameraError::Parse { line, msg } => {
                assert_eq!(line, 1);
                assert!(msg.contains("expected 5 coefficients"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_ocamcalib_bad_number_names_line() {
        let text = "5\n-127.5 0.0 oops -1.1e-7 4.9e-11\n130 126\n1 0 0\n260 254\n";
        let err = parse_intrinsics(text, IntrinsicsFormat::OcamcalibText).unwrap_err();
        match err {
            CameraError::Parse { line, msg } => {
                assert_eq!(line, 2);
                assert!(msg.contains("oops"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_ocamcalib_truncated_file() {
        let text = "5\n-127.5 0.0 8.2e-4 -1.1e-7 4.9e-11\n130 126\n";
        let err = parse_intrinsics(text, IntrinsicsFormat::OcamcalibText).unwrap_err();
        assert!(matches!(err, CameraError::Parse { .. }), "{err:?}");
    }

    #[test]
    fn parse_structured_defaults_affine_to_identity() {
        let text = r#"{
            "coeffs": [-127.5, 0.0, 8.2e-4, -1.1e-7, 4.9e-11],
            "center": [130.25, 126.5],
            "sensor_size": [260, 254]
        }"#;
        let cam = parse_intrinsics(text, IntrinsicsFormat::StructuredJson).unwrap();
        assert_eq!(cam.affine_cde(), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn parse_structured_wrong_coeff_count_is_validation_error() {
        let text = r#"{
            "coeffs": [-127.5, 0.0, 8.2e-4, -1.1e-7],
            "center": [130.25, 126.5],
            "sensor_size": [260, 254]
        }"#;
        let err = parse_intrinsics(text, IntrinsicsFormat::StructuredJson).unwrap_err();
        assert!(matches!(err, CameraError::Validation(_)), "{err:?}");
    }

    #[test]
    fn parse_structured_bad_json_reports_line() {
        let err = parse_intrinsics("{\n  \"coeffs\": [1,\n", IntrinsicsFormat::StructuredJson)
            .unwrap_err();
        assert!(
            matches!(err, CameraError::Parse { line, .. } if line > 0),
            "{err:?}"
        );
    }

    #[test]
    fn rejects_zero_a0() {
        let err = CameraIntrinsics::new(
            [0.0, 0.0, 1e-3, 0.0, 0.0],
            (64.0, 64.0),
            [1.0, 0.0, 0.0],
            (128, 128),
        )
        .unwrap_err();
        assert!(matches!(err, CameraError::Validation(_)));
    }

    #[test]
    fn rejects_singular_affine() {
        let err = CameraIntrinsics::new(
            [-100.0, 0.0, 1e-3, 0.0, 0.0],
            (64.0, 64.0),
            [0.5, 1.0, 0.5],
            (128, 128),
        )
        .unwrap_err();
        assert!(matches!(err, CameraError::Validation(_)));
    }

    #[test]
    fn rejects_center_outside_sensor() {
        let err = CameraIntrinsics::new(
            [-100.0, 0.0, 1e-3, 0.0, 0.0],
            (130.0, 64.0),
            [1.0, 0.0, 0.0],
            (128, 128),
        )
        .unwrap_err();
        assert!(matches!(err, CameraError::Validation(_)));
    }

    proptest! {
        #[test]
        fn roundtrip_random_pixels(
            cam_idx in 0usize..3,
            fi in 0.02f64..0.98,
            fj in 0.02f64..0.98,
        ) {
            let cam = &fixtures::all()[cam_idx];
            let (h, w) = cam.sensor_size();
            let p = (fi * (h - 1) as f64, fj * (w - 1) as f64);
            let ray = cam.cam2world(p);
            let q = cam.world2cam(&ray).expect("in-sensor ray projects back");
            let err = ((q.0 - p.0).powi(2) + (q.1 - p.1).powi(2)).sqrt();
            prop_assert!(err < 1e-6, "roundtrip error {} at {:?}", err, p);
        }

        #[test]
        fn scaling_a_ray_does_not_move_its_pixel(
            scale in 0.1f64..10.0,
            x in -0.8f64..0.8,
            y in -0.8f64..0.8,
        ) {
            let cam = fixtures::offcenter_affine();
            let ray = Ray3::new(x, y, -1.0);
            let scaled = Ray3::new(x * scale, y * scale, -scale);
            let p = cam.world2cam(&ray).unwrap();
            let q = cam.world2cam(&scaled).unwrap();
            prop_assert!((p.0 - q.0).abs() < 1e-9 && (p.1 - q.1).abs() < 1e-9);
        }
    }
}
