//! Chain-mixing and accuracy metrics.
//!
//! The autocorrelation estimator uses lag-truncated sums in both numerator
//! and denominator, over the last half of the chain:
//!
//! ```text
//! rho_k = sum_{m=1}^{M-k} (x_m - mean)(x_{m+k} - mean) / sum_{m=1}^{M-k} (x_m - mean)^2
//! ```
//!
//! where `mean` is taken over the whole retained chain. Unlike the
//! full-denominator estimator, values can exceed one in magnitude on short
//! or non-stationary chains.

use crate::error::{Error, Result};

/// Recorded MCMC chain of one `(node, particle)` pair at one PBP iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    pub node: usize,
    pub particle: usize,
    pub iteration: usize,
    pub dims: usize,
    /// `len() * dims` values, one label per MCMC step.
    pub samples: Vec<f64>,
}

impl ChainTrace {
    pub fn len(&self) -> usize {
        self.samples.len().checked_div(self.dims).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Values of one coordinate along the chain.
    pub fn coordinate(&self, k: usize) -> Vec<f64> {
        self.samples.iter().skip(k).step_by(self.dims).copied().collect()
    }
}

/// The retained second half of a chain (first `len / 2` samples dropped).
pub fn burn_in(chain: &[f64]) -> &[f64] {
    &chain[chain.len() / 2..]
}

/// `rho_0 ..= rho_{k_max}` of the chain after discarding its first half.
///
/// A constant chain yields `rho_0 = 1` and zeros elsewhere. Lags at or
/// beyond the retained length are reported as zero.
pub fn autocorrelation(chain: &[f64], k_max: usize) -> Result<Vec<f64>> {
    let kept = burn_in(chain);
    if kept.len() < 4 {
        return Err(Error::ChainTooShort { len: kept.len() });
    }
    Ok(autocorrelation_raw(kept, k_max))
}

/// The same estimator applied to the whole slice, without burn-in.
pub fn autocorrelation_raw(x: &[f64], k_max: usize) -> Vec<f64> {
    let m = x.len();
    let mean = x.iter().sum::<f64>() / m as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let mut rho = vec![0.0; k_max + 1];
    rho[0] = 1.0;
    if x.iter().all(|v| *v == x[0]) {
        return rho;
    }
    for (k, r) in rho.iter_mut().enumerate().skip(1) {
        if k >= m {
            break;
        }
        let head = &centered[..m - k];
        let den: f64 = head.iter().map(|v| v * v).sum();
        if den == 0.0 {
            continue;
        }
        let num: f64 = head.iter().zip(&centered[k..]).map(|(a, b)| a * b).sum();
        *r = num / den;
    }
    rho
}

/// Mean of `rho_k` over chains, element-wise. All inputs must share a length.
pub fn mean_autocorrelation(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = rows.first().ok_or(Error::Empty("autocorrelation rows"))?;
    if rows.iter().any(|r| r.len() != first.len()) {
        return Err(Error::Shape("autocorrelation rows differ in length".into()));
    }
    let mut mean = vec![0.0; first.len()];
    for row in rows {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    let n = rows.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(mean)
}

/// Squared Euclidean distance `|x - y|^2`.
pub fn squared_loss(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::Shape(format!(
            "estimate has {} values, truth has {}",
            estimate.len(),
            truth.len()
        )));
    }
    Ok(estimate.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// Mean squared loss over matched instances.
pub fn empirical_risk(estimates: &[Vec<f64>], truths: &[Vec<f64>]) -> Result<f64> {
    if estimates.len() != truths.len() {
        return Err(Error::Shape(format!(
            "{} estimates for {} ground truths",
            estimates.len(),
            truths.len()
        )));
    }
    if estimates.is_empty() {
        return Err(Error::Empty("instances"));
    }
    let total = estimates
        .iter()
        .zip(truths)
        .map(|(e, t)| squared_loss(e, t))
        .sum::<Result<f64>>()?;
    Ok(total / estimates.len() as f64)
}

/// Root of the mean of squared errors.
pub fn rmsd(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::Empty("errors"));
    }
    let ms = errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64;
    Ok(ms.sqrt())
}

/// The 10/25/50/75/90 % quantiles reported for error distributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantiles {
    pub q10: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q90: f64,
}

/// Linear interpolation between order statistics at `h = (n - 1) q`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantiles(errors: &[f64]) -> Result<Quantiles> {
    if errors.is_empty() {
        return Err(Error::Empty("errors"));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p| quantile_sorted(&sorted, p);
    Ok(Quantiles { q10: q(0.10), q25: q(0.25), q50: q(0.50), q75: q(0.75), q90: q(0.90) })
}
