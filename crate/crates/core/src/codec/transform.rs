//! Orthonormal 8x8 DCT-II pair and the zigzag scan order.

use std::sync::OnceLock;

pub const BLOCK: usize = 8;
const N: usize = BLOCK * BLOCK;

/// Scan position -> raster index within an 8x8 block.
pub const ZIGZAG: [usize; N] = [
    0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5, 12, 19, 26, 33, 40, 48, 41, 34, 27, 20,
    13, 6, 7, 14, 21, 28, 35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51, 58, 59,
    52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63,
];

/// basis[u][i] = s(u) * cos((2i+1) u pi / 16) with s(0) = sqrt(1/8),
/// s(u>0) = 1/2, making the transform orthonormal.
fn basis() -> &'static [[f64; BLOCK]; BLOCK] {
    static TABLE: OnceLock<[[f64; BLOCK]; BLOCK]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [[0.0; BLOCK]; BLOCK];
        for (u, row) in t.iter_mut().enumerate() {
            let scale = if u == 0 { (1.0f64 / 8.0).sqrt() } else { 0.5 };
            for (i, v) in row.iter_mut().enumerate() {
                *v = scale * ((2 * i + 1) as f64 * u as f64 * std::f64::consts::PI / 16.0).cos();
            }
        }
        t
    })
}

/// Forward 2-D DCT-II of a row-major 8x8 block.
pub fn dct8x8(block: &[f64; N]) -> [f64; N] {
    let c = basis();
    let mut rows = [0.0; N];
    for i in 0..BLOCK {
        for u in 0..BLOCK {
            let mut acc = 0.0;
            for j in 0..BLOCK {
                acc += c[u][j] * block[i * BLOCK + j];
            }
            rows[i * BLOCK + u] = acc;
        }
    }
    let mut out = [0.0; N];
    for v in 0..BLOCK {
        for u in 0..BLOCK {
            let mut acc = 0.0;
            for i in 0..BLOCK {
                acc += c[v][i] * rows[i * BLOCK + u];
            }
            out[v * BLOCK + u] = acc;
        }
    }
    out
}

/// Inverse of [`dct8x8`].
pub fn idct8x8(freq: &[f64; N]) -> [f64; N] {
    let c = basis();
    let mut rows = [0.0; N];
    for v in 0..BLOCK {
        for j in 0..BLOCK {
            let mut acc = 0.0;
            for u in 0..BLOCK {
                acc += c[u][j] * freq[v * BLOCK + u];
            }
            rows[v * BLOCK + j] = acc;
        }
    }
    let mut out = [0.0; N];
    for j in 0..BLOCK {
        for i in 0..BLOCK {
            let mut acc = 0.0;
            for v in 0..BLOCK {
                acc += c[v][i] * rows[v * BLOCK + j];
            }
            out[i * BLOCK + j] = acc;
        }
    }
    out
}
