//! Synthetic camera models used by tests, benchmarks, and example runs.
//!
//! All three keep the ray elevation `f(rho)/rho` strictly monotone out to
//! `rho_max`, so the inverse projection is unique over the whole sensor.
//! They are also wide enough that perspective views at zoom factors 5
//! through 9 sample entirely inside the sensor: rectified coverage is 1.0.

use crate::camera::CameraIntrinsics;

/// 320x240 circular fisheye, centered, no affine skew.
pub fn wide_circular() -> CameraIntrinsics {
    CameraIntrinsics::new(
        [-70.0, 0.0, 3.0e-3, 0.0, 0.0],
        (120.0, 160.0),
        [1.0, 0.0, 0.0],
        (240, 320),
    )
    .expect("fixture intrinsics are valid")
}

/// 256x256 sensor with an off-center distortion center and a mild affine
/// misalignment, exercising the non-identity stretch matrix paths.
pub fn offcenter_affine() -> CameraIntrinsics {
    CameraIntrinsics::new(
        [-60.0, -0.05, 4.8e-3, 1.0e-6, 0.0],
        (130.0, 126.5),
        [0.998, 0.002, -0.001],
        (256, 256),
    )
    .expect("fixture intrinsics are valid")
}

/// 280x200 sensor with all five polynomial orders active, so the inverse
/// projection solves a full quartic.
pub fn strong_quartic() -> CameraIntrinsics {
    CameraIntrinsics::new(
        [-55.0, -0.02, 5.0e-3, -2.0e-6, 1.2e-8],
        (99.0, 141.0),
        [1.0, 0.0, 0.0],
        (200, 280),
    )
    .expect("fixture intrinsics are valid")
}

/// All fixture cameras, in a stable order.
pub fn all() -> [CameraIntrinsics; 3] {
    [wide_circular(), offcenter_affine(), strong_quartic()]
}

/// Looks a fixture up by its function name.
pub fn by_name(name: &str) -> Option<CameraIntrinsics> {
    match name {
        "wide_circular" => Some(wide_circular()),
        "offcenter_affine" => Some(offcenter_affine()),
        "strong_quartic" => Some(strong_quartic()),
        _ => None,
    }
}
