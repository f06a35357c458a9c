//! Distance-based link weights.
//!
//! A fixed RSS error `δ` distorts the range-like quantity
//! `y = d·10^{αd/(10β)} / 10^{P_t/(10β)}` by an amount that grows with `d`
//! ([`deviation_diagnostic`]), so short links deserve more trust. The weights
//! use the observable proxy `x_i = 10^{(-P_i + α·d0)/(10β)}` (large for far
//! anchors) and give each link a share proportional to `S - x_i`, normalised
//! so that the weights sum to one.

use thiserror::Error;

use crate::channel::{Environment, MeasurementSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeightError {
    #[error("link weighting needs at least two anchors, got {0}")]
    TooFewLinks(usize),
    #[error("link proxy for anchor {0} is not finite")]
    NonFinite(usize),
}

/// Normalised per-link weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub weights: Vec<f64>,
}

impl WeightVector {
    /// All links weighted `1/N`.
    pub fn uniform(n: usize) -> Self {
        Self {
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            weights: self.weights.iter().map(|w| w * factor).collect(),
        }
    }
}

/// Distortion `|y(d, P_t, δ) - y(d, P_t, 0)|` caused by an RSS error of `δ` dB.
pub fn deviation_diagnostic(d: f64, p_t: f64, delta: f64, env: &Environment) -> f64 {
    let ten_beta = 10.0 * env.ple;
    let alpha = env.absorption_db_per_m;
    let base = d * 10f64.powf((alpha * d - p_t) / ten_beta);
    base * (10f64.powf(-delta / ten_beta) - 1.0).abs()
}

/// Weights for a measurement set.
///
/// `x_i` is evaluated relative to the smallest exponent, so the common
/// factor (including `10^{α·d0/(10β)}`) cancels and nothing overflows.
pub fn link_weights(measurements: &MeasurementSet, env: &Environment) -> Result<WeightVector, WeightError> {
    let n = measurements.len();
    if n < 2 {
        return Err(WeightError::TooFewLinks(n));
    }
    let ten_beta = 10.0 * env.ple;
    let exponents: Vec<f64> = measurements.rss_dbm.iter().map(|p| -p / ten_beta).collect();
    if let Some(i) = exponents.iter().position(|e| !e.is_finite()) {
        return Err(WeightError::NonFinite(i));
    }
    let max_exp = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let x: Vec<f64> = exponents.iter().map(|e| 10f64.powf(e - max_exp)).collect();
    let sum: f64 = x.iter().sum();
    let denom = (n as f64 - 1.0) * sum;
    Ok(WeightVector {
        weights: x.iter().map(|xi| (sum - xi) / denom).collect(),
    })
}
