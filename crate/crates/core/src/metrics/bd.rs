//! Bjøntegaard deltas between two rate-quality curves.
//!
//! Both metrics fit cubic least squares in the log-rate domain and average
//! the gap between the fits over the curves' overlapping range. With the
//! minimum four points the fit interpolates, which is what the classic
//! formulation does.

use nalgebra::{DMatrix, DVector};

use crate::metrics::{MetricError, RdCurve};

/// Cubic polynomial in `x - center`, lowest order first.
struct CubicFit {
    center: f64,
    coeffs: [f64; 4],
}

fn fit_cubic(xs: &[f64], ys: &[f64]) -> Result<CubicFit, MetricError> {
    // Centering keeps the Vandermonde columns comparable in magnitude.
    let center = xs.iter().sum::<f64>() / xs.len() as f64;
    let design = DMatrix::from_fn(xs.len(), 4, |i, j| (xs[i] - center).powi(j as i32));
    let rhs = DVector::from_column_slice(ys);
    let coeffs = design
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| MetricError::Metric(format!("cubic fit failed: {e}")))?;
    Ok(CubicFit {
        center,
        coeffs: [coeffs[0], coeffs[1], coeffs[2], coeffs[3]],
    })
}

/// Exact integral of the fitted cubic over [lo, hi].
fn integrate(fit: &CubicFit, lo: f64, hi: f64) -> f64 {
    let primitive = |x: f64| {
        let t = x - fit.center;
        t * (fit.coeffs[0]
            + t * (fit.coeffs[1] / 2.0 + t * (fit.coeffs[2] / 3.0 + t * fit.coeffs[3] / 4.0)))
    };
    primitive(hi) - primitive(lo)
}

/// True when the curves hold identical (rate, quality) samples; qp labels
/// are ignored. Identical curves short-circuit to a delta of exactly zero,
/// which also covers degenerate fits (e.g. constant quality).
fn same_points(a: &RdCurve, b: &RdCurve) -> bool {
    a.points().len() == b.points().len()
        && a.points()
            .iter()
            .zip(b.points())
            .all(|(p, q)| p.rate_bpp == q.rate_bpp && p.quality == q.quality)
}

fn overlap(
    a_lo: f64,
    a_hi: f64,
    b_lo: f64,
    b_hi: f64,
    axis: &str,
) -> Result<(f64, f64), MetricError> {
    let lo = a_lo.max(b_lo);
    let hi = a_hi.min(b_hi);
    // Negated form also rejects NaN endpoints.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(hi > lo) {
        return Err(MetricError::Metric(format!(
            "curves do not overlap in {axis}: [{a_lo}, {a_hi}] vs [{b_lo}, {b_hi}]"
        )));
    }
    Ok((lo, hi))
}

/// Average vertical gap `test - reference` in quality units, integrated over
/// the overlapping log10(rate) range. Positive means `test` sits above.
pub fn bd_quality(reference: &RdCurve, test: &RdCurve) -> Result<f64, MetricError> {
    if same_points(reference, test) {
        return Ok(0.0);
    }
    let xs = |c: &RdCurve| -> Vec<f64> { c.points().iter().map(|p| p.rate_bpp.log10()).collect() };
    let ys = |c: &RdCurve| -> Vec<f64> { c.points().iter().map(|p| p.quality).collect() };
    let (xr, yr) = (xs(reference), ys(reference));
    let (xt, yt) = (xs(test), ys(test));
    let (lo, hi) = overlap(xr[0], xr[xr.len() - 1], xt[0], xt[xt.len() - 1], "log-rate")?;
    let fit_ref = fit_cubic(&xr, &yr)?;
    let fit_test = fit_cubic(&xt, &yt)?;
    Ok((integrate(&fit_test, lo, hi) - integrate(&fit_ref, lo, hi)) / (hi - lo))
}

/// Average horizontal gap as a rate percentage: fits log10(rate) as a cubic
/// in quality, averages the log-rate difference over the overlapping quality
/// range, and maps it back with `(10^avg - 1) * 100`. Negative means `test`
/// spends fewer bits at equal quality.
pub fn bd_rate(reference: &RdCurve, test: &RdCurve) -> Result<f64, MetricError> {
    if same_points(reference, test) {
        return Ok(0.0);
    }
    let xs = |c: &RdCurve| -> Vec<f64> { c.points().iter().map(|p| p.quality).collect() };
    let ys = |c: &RdCurve| -> Vec<f64> { c.points().iter().map(|p| p.rate_bpp.log10()).collect() };
    let (xr, yr) = (xs(reference), ys(reference));
    let (xt, yt) = (xs(test), ys(test));
    let (lo, hi) = overlap(xr[0], xr[xr.len() - 1], xt[0], xt[xt.len() - 1], "quality")?;
    let fit_ref = fit_cubic(&xr, &yr)?;
    let fit_test = fit_cubic(&xt, &yt)?;
    let avg_log = (integrate(&fit_test, lo, hi) - integrate(&fit_ref, lo, hi)) / (hi - lo);
    Ok((10f64.powf(avg_log) - 1.0) * 100.0)
}
