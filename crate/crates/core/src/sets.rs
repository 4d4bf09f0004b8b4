//! Joint prediction sets built as products of per-coordinate equal-tail
//! intervals at a shared coordinate level `β`.
//!
//! Coordinates of the predictive density are independent, so the joint
//! predictive coverage of a product set is the product of the coordinate
//! interval masses. [`calibrate`] uses that exact product; [`calibrate_mc`]
//! estimates it from predictive draws instead.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, domain, Result};
use crate::model::CountVector;
use crate::predictive::{quantile_from_cdf, CountPredictive};

/// Default tolerance for `achieved ≥ α - slack`.
pub const CALIBRATION_SLACK: f64 = 0.002;

/// Largest coordinate level tried; `β = 1` would need the full support.
const BETA_MAX: f64 = 1.0 - 1e-12;

const BISECTION_STEPS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPredictionSet {
    pub lo: Vec<u64>,
    pub hi: Vec<u64>,
    pub alpha: f64,
    pub beta: f64,
    /// Predictive probability of the set (exact or estimated, depending on
    /// how it was calibrated).
    pub achieved: f64,
}

impl JointPredictionSet {
    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }

    /// `lo_i ≤ y_i ≤ hi_i` for every `i`.
    pub fn contains(&self, y: &CountVector) -> Result<bool> {
        check_len(self.len(), y.len())?;
        Ok(self.contains_values(y.values()))
    }

    fn contains_values(&self, y: &[u64]) -> bool {
        y.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&v, (&l, &h))| l <= v && v <= h)
    }
}

/// Coordinate CDFs tabulated far enough to place any interval with
/// `β ≤ BETA_MAX`.
struct CdfTables(Vec<Vec<f64>>);

impl CdfTables {
    fn new<P: CountPredictive + ?Sized>(pd: &P) -> Self {
        let target = 1.0 - (1.0 - BETA_MAX) / 4.0;
        CdfTables((0..pd.len()).map(|i| pd.coord_cdf_until(i, target)).collect())
    }

    fn interval(&self, i: usize, beta: f64) -> (u64, u64) {
        let tail = (1.0 - beta) / 2.0;
        let cdf = &self.0[i];
        (quantile_from_cdf(cdf, tail), quantile_from_cdf(cdf, 1.0 - tail))
    }

    fn mass(&self, i: usize, lo: u64, hi: u64) -> f64 {
        let cdf = &self.0[i];
        let upper = cdf[hi as usize];
        let lower = if lo == 0 { 0.0 } else { cdf[lo as usize - 1] };
        (upper - lower).clamp(0.0, 1.0)
    }

    fn intervals(&self, beta: f64) -> (Vec<u64>, Vec<u64>) {
        (0..self.0.len()).map(|i| self.interval(i, beta)).unzip()
    }

    fn coverage(&self, beta: f64) -> f64 {
        (0..self.0.len())
            .map(|i| {
                let (lo, hi) = self.interval(i, beta);
                self.mass(i, lo, hi)
            })
            .product()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("alpha must lie in (0, 1), got {alpha}"));
    }
    Ok(())
}

/// Smallest `β ∈ [α, BETA_MAX]` (to bisection resolution) whose coverage
/// reaches `α`. Coverage is non-decreasing in `β`, and a single coordinate
/// interval at level `β` has mass at least `β`, so `β = α` is returned
/// whenever it already suffices.
fn bisect_beta<F: Fn(f64) -> f64>(alpha: f64, coverage: F) -> f64 {
    if coverage(alpha) >= alpha {
        return alpha;
    }
    let (mut lo, mut hi) = (alpha, BETA_MAX);
    if coverage(hi) < alpha {
        return hi;
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if coverage(mid) >= alpha {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Calibrates the product set so that its exact predictive probability is at
/// least `α`, with the smallest shared coordinate level that achieves it.
pub fn calibrate<P: CountPredictive + ?Sized>(pd: &P, alpha: f64) -> Result<JointPredictionSet> {
    check_alpha(alpha)?;
    let tables = CdfTables::new(pd);
    let beta = bisect_beta(alpha, |b| tables.coverage(b));
    let (lo, hi) = tables.intervals(beta);
    Ok(JointPredictionSet {
        lo,
        hi,
        alpha,
        beta,
        achieved: tables.coverage(beta),
    })
}

/// Calibrates against the fraction of `m ≥ 10⁴` predictive draws (seeded)
/// falling inside the product set.
pub fn calibrate_mc<P: CountPredictive + ?Sized>(pd: &P, alpha: f64, m: usize, seed: u64) -> Result<JointPredictionSet> {
    check_alpha(alpha)?;
    if m < 10_000 {
        return domain(format!("calibration sample must have at least 10000 draws, got {m}"));
    }
    let tables = CdfTables::new(pd);
    let draws = pd.sample(m, seed);
    let coverage = |b: f64| {
        let (lo, hi) = tables.intervals(b);
        let set = JointPredictionSet {
            lo,
            hi,
            alpha,
            beta: b,
            achieved: f64::NAN,
        };
        draws.iter().filter(|y| set.contains_values(y.values())).count() as f64 / m as f64
    };
    let beta = bisect_beta(alpha, coverage);
    let (lo, hi) = tables.intervals(beta);
    Ok(JointPredictionSet {
        lo,
        hi,
        alpha,
        beta,
        achieved: coverage(beta),
    })
}

/// Fraction of `m` fresh predictive draws (seeded) inside `set`.
pub fn mc_coverage<P: CountPredictive + ?Sized>(set: &JointPredictionSet, pd: &P, m: usize, seed: u64) -> Result<f64> {
    check_len(set.len(), pd.len())?;
    if m == 0 {
        return domain("need at least one draw");
    }
    let inside = pd
        .sample(m, seed)
        .iter()
        .filter(|y| set.contains_values(y.values()))
        .count();
    Ok(inside as f64 / m as f64)
}
