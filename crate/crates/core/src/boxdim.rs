//! Box-counting dimension regression.
//!
//! Covering by level-k cylinders is enough to compute box dimension in this
//! space, so the estimator is the least-squares slope of `log |U_k|` against
//! `-k log r` over a window of levels.

use serde::{Deserialize, Serialize};

use crate::error::{CantorError, Result};
use crate::space::SpaceParams;

/// Output of a box-dimension regression.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimensionEstimate {
    /// Least-squares slope in dimension units.
    pub slope: f64,
    /// Standard error of the slope (0 when the window has two points).
    pub stderr: f64,
    /// Inclusive level window the regression ran over.
    pub k_range: (usize, usize),
    /// The cover counts that entered the fit, `counts[i]` at level
    /// `k_range.0 + i`.
    pub counts: Vec<u64>,
}

/// Distinguishes a genuine estimate from the empty-set case, where no level
/// in the window has a surviving cylinder and the dimension is undefined.
pub type BoxDimFit = Option<DimensionEstimate>;

/// Default regression window: the top half of the available levels.
pub fn default_k_range(depth: usize) -> (usize, usize) {
    (depth.div_ceil(2), depth)
}

/// Least-squares fit of `log count` vs `-k log r` over `k_range` (inclusive).
///
/// `counts[k]` must hold `|U_k|` for every level in the window. Returns
/// `Ok(None)` when a count in the window is zero (empty set: dimension
/// undefined, reported as a distinguished result rather than 0).
pub fn box_dim_estimate(
    counts: &[u64],
    p: &SpaceParams,
    k_range: (usize, usize),
) -> Result<BoxDimFit> {
    let (k_lo, k_hi) = k_range;
    if k_lo > k_hi || k_hi >= counts.len() {
        return Err(CantorError::LevelOutOfRange { k: k_hi, depth: counts.len().saturating_sub(1) });
    }
    if k_hi - k_lo < 1 {
        return Err(CantorError::InvalidParams(format!(
            "regression window must span at least two levels, got {k_lo}..{k_hi}"
        )));
    }
    let window = &counts[k_lo..=k_hi];
    if window.iter().any(|&c| c == 0) {
        return Ok(None);
    }

    let n = window.len() as f64;
    let xs: Vec<f64> = (k_lo..=k_hi).map(|k| -(k as f64) * p.r().ln()).collect();
    let ys: Vec<f64> = window.iter().map(|&c| (c as f64).ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean) * (x - x_mean)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
    let slope = sxy / sxx;

    let stderr = if window.len() > 2 {
        let intercept = y_mean - slope * x_mean;
        let rss: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| {
                let e = y - (intercept + slope * x);
                e * e
            })
            .sum();
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };

    Ok(Some(DimensionEstimate { slope, stderr, k_range, counts: window.to_vec() }))
}
