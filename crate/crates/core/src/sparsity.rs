//! Plug-in estimators of the number of non-zero means.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, domain, Result};
use crate::model::CountVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SparsityMethod {
    /// `max(1, #{i: x_i ≥ 1})`.
    CountNonzero,
    /// Size of the upper cluster of an exact 1-D two-means split.
    TwoCluster,
    /// Mean over periods of `#{i: x_i > 1}`.
    PerPeriodMean,
    /// Supplied by the caller.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparsityEstimate {
    pub s_hat: u64,
    pub eta_hat: f64,
    pub method: SparsityMethod,
}

impl SparsityEstimate {
    fn new(s_hat: u64, n: usize, method: SparsityMethod) -> Self {
        let s_hat = s_hat.max(1);
        SparsityEstimate {
            s_hat,
            eta_hat: s_hat as f64 / n as f64,
            method,
        }
    }

    /// A caller-supplied sparsity level `1 ≤ s ≤ n`.
    pub fn fixed(s: u64, n: usize) -> Result<Self> {
        if s == 0 || s as usize > n {
            return domain(format!("fixed sparsity must lie in [1, {n}], got {s}"));
        }
        Ok(Self::new(s, n, SparsityMethod::Fixed))
    }
}

/// `ŝ = max(1, #{i: x_i ≥ 1})`, `η̂ = ŝ/n`.
pub fn estimate_sparsity(x: &CountVector) -> SparsityEstimate {
    let nonzero = x.values().iter().filter(|&&v| v >= 1).count() as u64;
    SparsityEstimate::new(nonzero, x.len(), SparsityMethod::CountNonzero)
}

/// Two-means clustering of the counts, solved exactly by scanning every
/// split point of the sorted values; `ŝ` is the size of the upper cluster.
///
/// A constant vector has no split and falls back to [`estimate_sparsity`].
pub fn estimate_sparsity_two_cluster(x: &CountVector) -> Result<SparsityEstimate> {
    let n = x.len();
    if n < 2 {
        return domain("two-cluster estimate needs at least two counts");
    }
    let mut sorted: Vec<f64> = x.values().iter().map(|&v| v as f64).collect();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[n - 1] {
        return Ok(estimate_sparsity(x));
    }
    let mut prefix = vec![0.0; n + 1];
    let mut prefix_sq = vec![0.0; n + 1];
    for (i, &v) in sorted.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
        prefix_sq[i + 1] = prefix_sq[i] + v * v;
    }
    let sse = |lo: usize, hi: usize| {
        let m = (hi - lo) as f64;
        let s = prefix[hi] - prefix[lo];
        (prefix_sq[hi] - prefix_sq[lo]) - s * s / m
    };
    let mut best: Option<(f64, usize)> = None;
    for k in 1..n {
        if sorted[k - 1] == sorted[k] {
            continue;
        }
        let cost = sse(0, k) + sse(k, n);
        if best.is_none_or(|(c, _)| cost < c) {
            best = Some((cost, k));
        }
    }
    let (_, k) = best.expect("non-constant vector has a split");
    Ok(SparsityEstimate::new((n - k) as u64, n, SparsityMethod::TwoCluster))
}

/// `ŝ = max(1, round(mean over periods of #{i: x_i > 1}))`, rounding half up.
pub fn estimate_sparsity_per_period(periods: &[CountVector]) -> Result<SparsityEstimate> {
    let Some(first) = periods.first() else {
        return domain("at least one period is required");
    };
    let n = first.len();
    let mut total = 0u64;
    for p in periods {
        check_len(n, p.len())?;
        total += p.values().iter().filter(|&&v| v > 1).count() as u64;
    }
    let mean = total as f64 / periods.len() as f64;
    let rounded = (mean + 0.5).floor() as u64;
    Ok(SparsityEstimate::new(rounded, n, SparsityMethod::PerPeriodMean))
}
