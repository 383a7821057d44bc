//! Stable log-space primitives and seeded Gaussian / categorical draws.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::SeedSpec;

/// `ln(2π)`.
pub const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// `log Σ exp(v)` with max-shift.
pub fn logsumexp(values: &[f64]) -> Result<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() {
        return Err(Error::DegenerateWeights("empty weight sequence"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::DegenerateWeights("NaN log-weight"));
    }
    if max == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights("all log-weights are -inf"));
    }
    if max == f64::INFINITY || values.len() == 1 {
        return Ok(max);
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    Ok(max + sum.ln())
}

/// `log(exp(a) + exp(b))`.
pub fn logaddexp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// A categorical distribution prepared for repeated inverse-CDF draws.
#[derive(Clone, Debug)]
pub struct Categorical {
    cumulative: Vec<f64>,
    last_positive: usize,
}

impl Categorical {
    pub fn from_log_weights(log_weights: &[f64]) -> Result<Self> {
        let mut cat = Self {
            cumulative: Vec::with_capacity(log_weights.len()),
            last_positive: 0,
        };
        cat.reset(log_weights)?;
        Ok(cat)
    }

    /// Re-targets the distribution, reusing the allocation.
    pub fn reset(&mut self, log_weights: &[f64]) -> Result<()> {
        if log_weights.is_empty() {
            return Err(Error::DegenerateWeights("empty weight sequence"));
        }
        let mut max = f64::NEG_INFINITY;
        for &lw in log_weights {
            if lw.is_nan() {
                return Err(Error::DegenerateWeights("NaN log-weight"));
            }
            max = max.max(lw);
        }
        if !max.is_finite() {
            return Err(Error::DegenerateWeights("log-weights cannot be normalized"));
        }
        // Unnormalized max-shifted weights; `sample` scales by the total.
        self.cumulative.clear();
        let mut acc = 0.0;
        for (j, lw) in log_weights.iter().enumerate() {
            let w = (lw - max).exp();
            if w > 0.0 {
                self.last_positive = j;
            }
            acc += w;
            self.cumulative.push(acc);
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = self.cumulative[self.cumulative.len() - 1];
        let u = rng.random::<f64>() * total;
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.last_positive)
    }
}

/// Draws `count` indices with probabilities `softmax(log_weights)`.
pub fn categorical_sample(
    log_weights: &[f64],
    count: usize,
    stream: &SeedSpec,
) -> Result<Vec<usize>> {
    let cat = Categorical::from_log_weights(log_weights)?;
    let mut rng = stream.rng();
    Ok((0..count).map(|_| cat.sample(&mut rng)).collect())
}

/// `mean + std·ξ`, `ξ ~ N(0, I)` from `stream`.
pub fn gaussian_draw(mean: &[f64], std: f64, stream: &SeedSpec) -> Result<Vec<f64>> {
    if !(std >= 0.0) || !std.is_finite() {
        return Err(Error::invalid(format!(
            "standard deviation must be finite and >= 0, got {std}"
        )));
    }
    if mean.iter().any(|m| !m.is_finite()) {
        return Err(Error::invalid("gaussian mean must be finite"));
    }
    let mut out = mean.to_vec();
    add_gaussian(&mut stream.rng(), &mut out, std);
    Ok(out)
}

/// Adds `std·ξ` to every coordinate of `x` in place.
#[inline]
pub fn add_gaussian<R: Rng + ?Sized>(rng: &mut R, x: &mut [f64], std: f64) {
    for v in x {
        let xi: f64 = rng.sample(StandardNormal);
        *v += std * xi;
    }
}

/// `log N(x; mean, var·I)`.
pub fn gaussian_log_density(x: &[f64], mean: &[f64], var: f64) -> f64 {
    let sq: f64 = x.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum();
    -0.5 * sq / var - 0.5 * x.len() as f64 * (LN_2PI + var.ln())
}
