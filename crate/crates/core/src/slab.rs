//! General slab densities: slab integrals `I_γ(s;t)`, the posterior mean
//! they induce, and the tail-robustness diagnostic.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_positive, domain, Error, Result};
use crate::model::{CountVector, SamplingRatios};
use crate::quadrature::{integrate_half_line, integrate_half_line_around, QuadratureOptions};

type Density = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Number of points in the log grid used to spot-check the drift bound.
pub const DRIFT_GRID_POINTS: usize = 200;

/// A slab density `γ` on `(0, ∞)` mixed with weight `η` against the spike.
#[derive(Clone)]
pub struct GeneralSlab {
    name: String,
    density: Density,
    drift_bound: Option<f64>,
    mixing_weight: f64,
}

impl fmt::Debug for GeneralSlab {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralSlab")
            .field("name", &self.name)
            .field("drift_bound", &self.drift_bound)
            .field("mixing_weight", &self.mixing_weight)
            .finish()
    }
}

impl GeneralSlab {
    /// Builds a slab and checks `∫ e^{-λ} γ(λ) dλ < ∞` by quadrature.
    ///
    /// `drift_bound` is the claimed `sup |λ d/dλ log γ(λ)|`, or `None` when
    /// no finite bound exists (e.g. exponential tails).
    pub fn new<F>(name: impl Into<String>, density: F, drift_bound: Option<f64>, mixing_weight: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(mixing_weight > 0.0 && mixing_weight < 1.0) {
            return domain(format!("mixing weight must lie in (0, 1), got {mixing_weight}"));
        }
        if let Some(b) = drift_bound {
            if !(b.is_finite() && b >= 0.0) {
                return domain(format!("drift bound must be finite and non-negative, got {b}"));
            }
        }
        let slab = GeneralSlab {
            name: name.into(),
            density: Arc::new(density),
            drift_bound,
            mixing_weight,
        };
        // far tails may underflow to zero; positivity is required only where
        // the value is representable
        for lambda in log_grid(1e-6, 1e6, DRIFT_GRID_POINTS) {
            let g = slab.density(lambda);
            let ok = g.is_finite() && (g > 0.0 || (g == 0.0 && lambda > 1.0));
            if !ok {
                return domain(format!("slab density must be positive, got {g} at {lambda}"));
            }
        }
        integrate_half_line(|l| (-l).exp() * slab.density(l), QuadratureOptions::default())
            .map_err(|e| Error::Integrability(format!("∫ e^-λ γ(λ) dλ: {e}")))?;
        Ok(slab)
    }

    /// `γ(λ) = λ^{κ-1}`, drift bound `|κ-1|`.
    pub fn power(kappa: f64, mixing_weight: f64) -> Result<Self> {
        check_positive("slab exponent kappa", kappa)?;
        Self::new(
            format!("power({kappa})"),
            move |l: f64| l.powf(kappa - 1.0),
            Some((kappa - 1.0).abs()),
            mixing_weight,
        )
    }

    /// Half-Cauchy `2/(π(1+λ²))`, drift bound 2.
    pub fn half_cauchy(mixing_weight: f64) -> Result<Self> {
        Self::new(
            "half-cauchy",
            |l: f64| 2.0 / (std::f64::consts::PI * (1.0 + l * l)),
            Some(2.0),
            mixing_weight,
        )
    }

    /// Exponential (Laplace-type) slab `e^{-λ}`; it has no finite drift bound.
    pub fn laplace(mixing_weight: f64) -> Result<Self> {
        Self::new("laplace", |l: f64| (-l).exp(), None, mixing_weight)
    }

    /// Pareto-type slab `α/(1+λ)^{α+1}`, drift bound `α+1`.
    pub fn pareto(alpha: f64, mixing_weight: f64) -> Result<Self> {
        check_positive("pareto index", alpha)?;
        Self::new(
            format!("pareto({alpha})"),
            move |l: f64| alpha * (1.0 + l).powf(-alpha - 1.0),
            Some(alpha + 1.0),
            mixing_weight,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn density(&self, lambda: f64) -> f64 {
        (self.density)(lambda)
    }

    pub fn drift_bound(&self) -> Option<f64> {
        self.drift_bound
    }

    pub fn mixing_weight(&self) -> f64 {
        self.mixing_weight
    }

    /// Spot-checks `|λ d/dλ log γ(λ)| ≤ Λ` on a log grid over `[1e-6, 1e6]`
    /// with central differences in `log λ`.
    pub fn check_drift_bound(&self) -> Result<()> {
        let Some(bound) = self.drift_bound else {
            return domain(format!("slab {} has no finite drift bound", self.name));
        };
        let step: f64 = 1e-4;
        for lambda in log_grid(1e-6, 1e6, DRIFT_GRID_POINTS) {
            let up = self.density(lambda * step.exp()).ln();
            let down = self.density(lambda * (-step).exp()).ln();
            if !(up.is_finite() && down.is_finite()) {
                continue;
            }
            let drift = (up - down) / (2.0 * step);
            if drift.abs() > bound * (1.0 + 1e-6) + 1e-6 {
                return domain(format!(
                    "slab {}: |λ d/dλ log γ| = {drift} exceeds bound {bound} at λ = {lambda}",
                    self.name
                ));
            }
        }
        Ok(())
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(move |k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
}

/// `I_γ(s;t) = ∫₀^∞ λ^{s-1} e^{-tλ} γ(λ) dλ` for `s ≥ 1`, `t > 0`, to
/// relative tolerance `tol`.
pub fn slab_integral(slab: &GeneralSlab, s: f64, t: f64, tol: f64) -> Result<f64> {
    Ok(ln_slab_integral(slab, s, t, tol)?.exp())
}

/// `log I_γ(s;t)`. The integrand is rescaled by its maximum, so large `s`
/// does not overflow.
pub fn ln_slab_integral(slab: &GeneralSlab, s: f64, t: f64, tol: f64) -> Result<f64> {
    if !(s.is_finite() && s >= 1.0) {
        return domain(format!("slab integral needs s ≥ 1, got {s}"));
    }
    check_positive("t", t)?;
    check_positive("tolerance", tol)?;
    let phi = |l: f64| (s - 1.0) * l.ln() - t * l + slab.density(l).ln();
    let upper = 1e6f64.max(10.0 * s / t);
    let (center, peak) = log_grid(1e-6, upper, 600)
        .map(|l| (l, phi(l)))
        .filter(|(_, v)| v.is_finite())
        .fold((1.0, f64::NEG_INFINITY), |best, (l, v)| if v > best.1 { (l, v) } else { best });
    if !peak.is_finite() {
        return Err(Error::Integrability(format!("I(s={s}; t={t}): integrand vanishes")));
    }
    let integrand = |l: f64| {
        let v = phi(l);
        if v == f64::NEG_INFINITY {
            0.0
        } else {
            (v - peak).exp()
        }
    };
    let opts = QuadratureOptions {
        rel_tol: tol,
        ..QuadratureOptions::default()
    };
    let est = if center <= 1.0 {
        integrate_half_line(integrand, opts)?
    } else {
        let h = 1e-3 * center;
        let d2 = (phi(center + h) - 2.0 * phi(center) + phi(center - h)) / (h * h);
        let width = if d2 < 0.0 { (1.0 / (-d2).sqrt()).min(center) } else { center };
        integrate_half_line_around(integrand, center, width.max(1e-3 * center), opts)?
    };
    if !(est.value > 0.0 && est.value.is_finite()) {
        return Err(Error::Integrability(format!(
            "I(s={s}; t={t}) evaluated to {}",
            est.value
        )));
    }
    Ok(est.value.ln() + peak)
}

/// Memoized slab integrals for one slab at a fixed tolerance.
#[derive(Debug)]
pub struct SlabIntegralTable {
    slab: GeneralSlab,
    tol: f64,
    cache: HashMap<(u64, u64), f64>,
}

impl SlabIntegralTable {
    pub fn new(slab: GeneralSlab, tol: f64) -> Self {
        SlabIntegralTable {
            slab,
            tol,
            cache: HashMap::new(),
        }
    }

    pub fn slab(&self) -> &GeneralSlab {
        &self.slab
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    /// `log I_γ(s;t)`, memoized.
    pub fn ln_get(&mut self, s: f64, t: f64) -> Result<f64> {
        let key = (s.to_bits(), t.to_bits());
        if let Some(&v) = self.cache.get(&key) {
            return Ok(v);
        }
        let v = ln_slab_integral(&self.slab, s, t, self.tol)?;
        self.cache.insert(key, v);
        Ok(v)
    }

    pub fn get(&mut self, s: f64, t: f64) -> Result<f64> {
        Ok(self.ln_get(s, t)?.exp())
    }

    /// Posterior mean `η I(x+2;t) / ((1-η) 0^x + η I(x+1;t))`.
    pub fn posterior_mean(&mut self, x: u64, t: f64) -> Result<f64> {
        let eta = self.slab.mixing_weight;
        let xf = x as f64;
        let ln_num = self.ln_get(xf + 2.0, t)?;
        let ln_den = self.ln_get(xf + 1.0, t)?;
        if x > 0 {
            return Ok((ln_num - ln_den).exp());
        }
        Ok((eta.ln() + ln_num).exp() / (1.0 - eta + (eta.ln() + ln_den).exp()))
    }
}

/// Default relative tolerance for slab quadrature.
pub const DEFAULT_SLAB_TOL: f64 = 1e-10;

/// Posterior means under a general slab, with `t = r_i` per coordinate.
pub fn posterior_mean_general(x: &CountVector, slab: &GeneralSlab, ratios: &SamplingRatios) -> Result<Vec<f64>> {
    ratios.check_len(x.len())?;
    let mut table = SlabIntegralTable::new(slab.clone(), DEFAULT_SLAB_TOL);
    x.values()
        .iter()
        .enumerate()
        .map(|(i, &xi)| table.posterior_mean(xi, ratios.get(i)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Robustness {
    Robust,
    NonRobust,
}

/// Relative deviations `|θ̂(x) - x/r| / (x/r)` over a grid of counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRobustnessReport {
    pub grid: Vec<u64>,
    pub ratios: Vec<f64>,
    pub verdict: Robustness,
}

/// Threshold on the relative deviation at the largest count.
pub const ROBUST_THRESHOLD: f64 = 0.01;

/// Evaluates the posterior mean against the unbiased estimate `x/r` on a
/// log-spaced grid of counts up to `x_max ≥ 100`.
///
/// The verdict is robust iff the deviation at `x_max` is below 0.01 and the
/// deviations do not increase over the top decade `[x_max/10, x_max]`.
pub fn tail_robustness_diagnostic<F>(mean_fn: F, r: f64, x_max: u64) -> Result<TailRobustnessReport>
where
    F: Fn(u64) -> Result<f64>,
{
    check_positive("sampling ratio r", r)?;
    if x_max < 100 {
        return domain(format!("x_max must be at least 100, got {x_max}"));
    }
    let mut grid: Vec<u64> = log_grid(1.0, x_max as f64, 40)
        .map(|v| v.round() as u64)
        .collect();
    grid.push(x_max);
    grid.dedup();
    let ratios = grid
        .iter()
        .map(|&x| {
            let unbiased = x as f64 / r;
            Ok((mean_fn(x)? - unbiased).abs() / unbiased)
        })
        .collect::<Result<Vec<f64>>>()?;
    let top_decade_start = x_max / 10;
    let top: Vec<f64> = grid
        .iter()
        .zip(&ratios)
        .filter(|(&x, _)| x >= top_decade_start)
        .map(|(_, &q)| q)
        .collect();
    let decreasing = top.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-15);
    let last = *ratios.last().expect("grid is non-empty");
    let verdict = if last < ROBUST_THRESHOLD && decreasing {
        Robustness::Robust
    } else {
        Robustness::NonRobust
    };
    Ok(TailRobustnessReport { grid, ratios, verdict })
}
