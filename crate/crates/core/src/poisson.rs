//! Poisson probability tables and truncation of infinite sums.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

/// Where infinite sums over Poisson outcomes are cut.
///
/// The cutoff for mean `μ` is `ceil(μ + 12·sqrt(μ+1) + 40)`, widened if
/// needed until the Chernoff bound on the upper tail falls below
/// `tail_mass`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationPolicy {
    pub tail_mass: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy { tail_mass: 1e-12 }
    }
}

impl TruncationPolicy {
    /// Largest outcome kept for a Poisson law with mean `mu`.
    pub fn cutoff(&self, mu: f64) -> u64 {
        let mut k = (mu + 12.0 * (mu + 1.0).sqrt() + 40.0).ceil();
        let log_bound = self.tail_mass.ln();
        while chernoff_log_tail(mu, k + 1.0) > log_bound {
            k = (k * 1.1).ceil();
        }
        k as u64
    }

    /// Smallest outcome worth keeping; everything below carries less than
    /// `tail_mass` (Chernoff bound on the lower tail).
    pub fn lower(&self, mu: f64) -> u64 {
        let mut k = (mu - 12.0 * (mu + 1.0).sqrt() - 40.0).floor();
        if k <= 0.0 {
            return 0;
        }
        let log_bound = self.tail_mass.ln();
        while k > 0.0 && chernoff_log_lower(mu, k - 1.0) > log_bound {
            k = (k * 0.9).floor();
        }
        k.max(0.0) as u64
    }
}

/// `log P(X ≥ k)` upper bound for `X ~ Po(μ)`, `k > μ`.
fn chernoff_log_tail(mu: f64, k: f64) -> f64 {
    if mu <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if k <= mu {
        return 0.0;
    }
    -mu + k - k * (k / mu).ln()
}

/// `log P(X ≤ k)` upper bound for `X ~ Po(μ)`, `k < μ`.
fn chernoff_log_lower(mu: f64, k: f64) -> f64 {
    if k >= mu {
        return 0.0;
    }
    if k <= 0.0 {
        return -mu;
    }
    -mu + k - k * (k / mu).ln()
}

/// `log Po(k; μ)`, with `log Po(0; 0) = 0`.
pub fn ln_pmf(k: u64, mu: f64) -> f64 {
    if mu == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * mu.ln() - mu - ln_factorial(k)
}

pub fn pmf(k: u64, mu: f64) -> f64 {
    ln_pmf(k, mu).exp()
}

/// Probabilities `Po(k; μ)` for `k = lo..=hi`.
pub fn pmf_range(mu: f64, lo: u64, hi: u64) -> Vec<f64> {
    (lo..=hi).map(|k| pmf(k, mu)).collect()
}
