//! Latin hypercube sampling.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Draws `n` points in the box `bounds`, one per equal-width stratum in every
/// dimension. Strata are assigned by an independent permutation per dimension
/// and placed uniformly within the stratum.
pub fn lhs_sample(n: usize, bounds: &[(f64, f64)], seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::Config("latin hypercube needs n >= 1".into()));
    }
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config(format!(
                "invalid sampling bounds in dimension {j}: [{lo}, {hi}]"
            )));
        }
    }
    let mut rng = crate::seed::rng(seed);
    let mut points = vec![vec![0.0; bounds.len()]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        strata.shuffle(&mut rng);
        let width = (hi - lo) / n as f64;
        for (point, &k) in points.iter_mut().zip(&strata) {
            // keep clear of stratum edges so rounding never crosses into a neighbour
            let u: f64 = rng.random_range(1e-9..1.0 - 1e-9);
            point[j] = lo + (k as f64 + u) * width;
        }
    }
    Ok(points)
}

/// Stratum index of `x` in `[lo, hi)` split into `n` bins.
pub fn stratum(x: f64, lo: f64, hi: f64, n: usize) -> usize {
    (((x - lo) / (hi - lo)) * n as f64).floor() as usize
}
