//! Log-log growth-exponent fits with a seeded bootstrap half-width.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const BOOTSTRAP_RESAMPLES: usize = 200;
pub const MIN_POINTS: usize = 10;

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct ExponentFit {
    pub exponent: f64,
    pub half_width: f64,
    pub points: usize,
}

/// Least-squares slope of `log value` against `log t` over the window, with a
/// bootstrap half-width from 200 seeded resamples.
pub fn fit_exponent(series: &[(f64, f64)], window: (f64, f64), seed: u64) -> Result<ExponentFit> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
        .cloned()
        .collect();
    if pts.len() < MIN_POINTS {
        return Err(Error::FitTooFewPoints { need: MIN_POINTS, got: pts.len() });
    }
    if pts.iter().any(|(t, v)| *v <= 0.0 || *t <= 0.0) {
        return Err(Error::FitNonPositive);
    }
    let logs: Vec<(f64, f64)> = pts.iter().map(|(t, v)| (t.ln(), v.ln())).collect();
    let slope = ls_slope(&logs);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut resampled = Vec::with_capacity(logs.len());
    let mut acc = 0.0;
    let mut acc2 = 0.0;
    for _ in 0..BOOTSTRAP_RESAMPLES {
        resampled.clear();
        for _ in 0..logs.len() {
            resampled.push(logs[rng.gen_range(0..logs.len())]);
        }
        let s = ls_slope(&resampled);
        acc += s;
        acc2 += s * s;
    }
    let nb = BOOTSTRAP_RESAMPLES as f64;
    let var = (acc2 / nb - (acc / nb).powi(2)).max(0.0);
    Ok(ExponentFit {
        exponent: slope,
        half_width: 1.96 * var.sqrt(),
        points: pts.len(),
    })
}

fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        0.0
    } else {
        (n * sxy - sx * sy) / denom
    }
}
