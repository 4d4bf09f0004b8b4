//! Closed-form Bayes predictive density under the power-slab prior, and the
//! degenerate Poisson plug-in density it is compared against.
//!
//! Under `Π[h, κ]` each coordinate of the predictive density is a
//! zero-inflated negative binomial: with probability `ω_i` the future count
//! is zero, otherwise it follows `NB(x_i + κ, r_i/(r_i+1))`. The spike weight
//! is `ω_i = 1/(1 + h·Γ(κ)/r_i^κ)` when `x_i = 0` and zero otherwise.

use rand::RngCore;
use rand_distr::{Distribution, Gamma, Poisson};

use crate::error::{check_len, domain, Result};
use crate::model::{lgamma, CountVector, SamplingRatios, SpikeSlabPrior};
use crate::poisson;
use crate::rng::stream_rng;

/// Coordinate-wise count distribution used for prediction.
pub trait CountPredictive: Sync {
    /// Number of coordinates.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `log q_i(y)`; `-∞` where the coordinate has no mass.
    fn coord_ln_pmf(&self, i: usize, y: u64) -> f64;

    fn coord_mean(&self, i: usize) -> f64;

    /// An outcome beyond which the coordinate carries negligible mass.
    fn coord_support_cap(&self, i: usize) -> u64;

    fn sample_coord(&self, i: usize, rng: &mut dyn RngCore) -> u64;

    fn coord_pmf(&self, i: usize, y: u64) -> f64 {
        self.coord_ln_pmf(i, y).exp()
    }

    fn means(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.coord_mean(i)).collect()
    }

    /// `Σ_i log q_i(y_i)`; `-∞` (never NaN) if any coordinate has no mass.
    fn joint_log_pmf(&self, y: &CountVector) -> Result<f64> {
        check_len(self.len(), y.len())?;
        let mut total = 0.0;
        for (i, &yi) in y.values().iter().enumerate() {
            let lp = self.coord_ln_pmf(i, yi);
            if lp == f64::NEG_INFINITY {
                return Ok(f64::NEG_INFINITY);
            }
            total += lp;
        }
        Ok(total)
    }

    /// Cumulative probabilities `P(Y_i ≤ y)` for `y = 0, 1, …` until the
    /// cumulative mass reaches `target` or the support cap is passed.
    fn coord_cdf_until(&self, i: usize, target: f64) -> Vec<f64> {
        let cap = self.coord_support_cap(i);
        let mut cdf = Vec::new();
        let mut acc = 0.0;
        for y in 0..=cap {
            acc += self.coord_pmf(i, y);
            cdf.push(acc);
            if acc >= target {
                break;
            }
        }
        cdf
    }

    /// Smallest `y` with `P(Y_i ≤ y) ≥ p`, for `p ∈ [0, 1)`.
    fn coord_quantile(&self, i: usize, p: f64) -> Result<u64> {
        if !(0.0..1.0).contains(&p) {
            return domain(format!("quantile level must lie in [0, 1), got {p}"));
        }
        let cdf = self.coord_cdf_until(i, p);
        Ok(quantile_from_cdf(&cdf, p))
    }

    /// `m` joint draws; draw `j` uses stream `j` of `seed`.
    fn sample(&self, m: usize, seed: u64) -> Vec<CountVector> {
        (0..m)
            .map(|j| {
                let mut rng = stream_rng(seed, j as u64);
                let ys = (0..self.len())
                    .map(|i| self.sample_coord(i, &mut rng))
                    .collect();
                CountVector::new(ys).expect("non-empty density")
            })
            .collect()
    }
}

/// Index of the first entry of `cdf` reaching `p`; the last index if none
/// does (the remaining mass is below rounding).
pub(crate) fn quantile_from_cdf(cdf: &[f64], p: f64) -> u64 {
    cdf.iter()
        .position(|&c| c >= p)
        .unwrap_or(cdf.len().saturating_sub(1)) as u64
}

#[derive(Debug, Clone, Copy)]
struct ZinbCoord {
    omega: f64,
    ln_omega: f64,
    ln_slab: f64,
    size: f64,
    ratio: f64,
    ln_p: f64,
    ln_q: f64,
    lgamma_size: f64,
}

impl ZinbCoord {
    fn new(x: u64, ratio: f64, kappa: f64, ln_scale: Option<f64>) -> Self {
        let (omega, ln_omega, ln_slab) = match (x, ln_scale) {
            (0, Some(ln_h)) => {
                // a = h·Γ(κ)/r^κ, ω = 1/(1+a)
                let ln_a = ln_h + lgamma(kappa) - kappa * ratio.ln();
                let ln_one_plus_a = ln_1p_exp(ln_a);
                ((-ln_one_plus_a).exp(), -ln_one_plus_a, ln_a - ln_one_plus_a)
            }
            _ => (0.0, f64::NEG_INFINITY, 0.0),
        };
        let size = x as f64 + kappa;
        ZinbCoord {
            omega,
            ln_omega,
            ln_slab,
            size,
            ratio,
            ln_p: -(1.0 / ratio).ln_1p(),
            ln_q: -ratio.ln_1p(),
            lgamma_size: lgamma(size),
        }
    }

    fn ln_nb(&self, y: u64) -> f64 {
        let yf = y as f64;
        lgamma(self.size + yf) - lgamma(yf + 1.0) - self.lgamma_size
            + self.size * self.ln_p
            + yf * self.ln_q
    }

    fn ln_pmf(&self, y: u64) -> f64 {
        let slab = self.ln_slab + self.ln_nb(y);
        if y == 0 {
            log_add_exp(self.ln_omega, slab)
        } else {
            slab
        }
    }

    fn mean(&self) -> f64 {
        (1.0 - self.omega) * self.size / self.ratio
    }
}

/// `log(1 + e^a)` without overflow.
pub(crate) fn ln_1p_exp(a: f64) -> f64 {
    if a > 35.0 {
        a + (-a).exp()
    } else {
        a.exp().ln_1p()
    }
}

pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Fitted zero-inflated negative-binomial predictive density.
#[derive(Debug, Clone)]
pub struct PredictiveDensity {
    x: CountVector,
    ratios: Vec<f64>,
    kappa: f64,
    scale: Option<f64>,
    coords: Vec<ZinbCoord>,
}

impl PredictiveDensity {
    /// Fits `q_{Π[h,κ]}(·|x)`. Requires a power-slab prior.
    pub fn fit(x: &CountVector, prior: &SpikeSlabPrior, ratios: &SamplingRatios) -> Result<Self> {
        let kappa = prior.power_kappa()?;
        Self::build(x, kappa, Some(prior.scale()), ratios)
    }

    /// The negative-binomial predictive density with no spike: `ω_i = 0`
    /// everywhere. This is the Bayes predictive density of the i.i.d.
    /// `λ^{κ-1}` prior without sparsity.
    pub fn without_spike(x: &CountVector, kappa: f64, ratios: &SamplingRatios) -> Result<Self> {
        crate::error::check_positive("slab exponent kappa", kappa)?;
        Self::build(x, kappa, None, ratios)
    }

    fn build(x: &CountVector, kappa: f64, scale: Option<f64>, ratios: &SamplingRatios) -> Result<Self> {
        ratios.check_len(x.len())?;
        let rs = ratios.to_vec(x.len());
        let ln_scale = scale.map(f64::ln);
        let coords = x
            .values()
            .iter()
            .zip(&rs)
            .map(|(&xi, &r)| ZinbCoord::new(xi, r, kappa, ln_scale))
            .collect();
        Ok(PredictiveDensity {
            x: x.clone(),
            ratios: rs,
            kappa,
            scale,
            coords,
        })
    }

    pub fn x(&self) -> &CountVector {
        &self.x
    }

    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Prior scale `h`; `None` for the spike-free density.
    pub fn scale(&self) -> Option<f64> {
        self.scale
    }

    /// Spike weight `ω_i`.
    pub fn omega(&self, i: usize) -> f64 {
        self.coords[i].omega
    }

    /// Negative-binomial size `x_i + κ`.
    pub fn nb_size(&self, i: usize) -> f64 {
        self.coords[i].size
    }

    /// Negative-binomial success probability `r_i/(r_i+1)`.
    pub fn nb_success(&self, i: usize) -> f64 {
        self.coords[i].ln_p.exp()
    }

    /// `q_i(0)`, the total predictive mass at zero.
    pub fn p_zero(&self, i: usize) -> f64 {
        self.coord_pmf(i, 0)
    }
}

impl CountPredictive for PredictiveDensity {
    fn len(&self) -> usize {
        self.coords.len()
    }

    fn coord_ln_pmf(&self, i: usize, y: u64) -> f64 {
        self.coords[i].ln_pmf(y)
    }

    fn coord_mean(&self, i: usize) -> f64 {
        self.coords[i].mean()
    }

    fn coord_support_cap(&self, i: usize) -> u64 {
        let c = &self.coords[i];
        let nb_mean = c.size / c.ratio;
        let nb_sd = (c.size * (c.ratio + 1.0)).sqrt() / c.ratio;
        (nb_mean + 40.0 * nb_sd + 100.0).ceil() as u64
    }

    fn sample_coord(&self, i: usize, rng: &mut dyn RngCore) -> u64 {
        let c = &self.coords[i];
        if c.omega > 0.0 {
            let u: f64 = rand::Rng::random(rng);
            if u < c.omega {
                return 0;
            }
        }
        // NB(size, r/(r+1)) as a Gamma(size, rate r) mixture of Poissons.
        let g: f64 = Gamma::new(c.size, 1.0 / c.ratio)
            .expect("positive shape and scale")
            .sample(rng);
        sample_poisson(g, rng)
    }
}

pub(crate) fn sample_poisson(mu: f64, rng: &mut dyn RngCore) -> u64 {
    if mu <= 0.0 || !mu.is_finite() {
        return 0;
    }
    let y: f64 = Poisson::new(mu).expect("positive mean").sample(rng);
    y as u64
}

/// Plug-in density `Po(θ̂_i)` per coordinate; a point mass at 0 where
/// `θ̂_i = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonPlugin {
    theta_hat: Vec<f64>,
}

impl PoissonPlugin {
    pub fn new(theta_hat: Vec<f64>) -> Result<Self> {
        if theta_hat.is_empty() {
            return domain("plug-in density needs at least one coordinate");
        }
        if let Some(t) = theta_hat.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return domain(format!("plug-in means must be finite and non-negative, got {t}"));
        }
        Ok(PoissonPlugin { theta_hat })
    }

    pub fn theta_hat(&self) -> &[f64] {
        &self.theta_hat
    }
}

impl CountPredictive for PoissonPlugin {
    fn len(&self) -> usize {
        self.theta_hat.len()
    }

    fn coord_ln_pmf(&self, i: usize, y: u64) -> f64 {
        poisson::ln_pmf(y, self.theta_hat[i])
    }

    fn coord_mean(&self, i: usize) -> f64 {
        self.theta_hat[i]
    }

    fn coord_support_cap(&self, i: usize) -> u64 {
        poisson::TruncationPolicy { tail_mass: 1e-15 }.cutoff(self.theta_hat[i])
    }

    fn sample_coord(&self, i: usize, rng: &mut dyn RngCore) -> u64 {
        sample_poisson(self.theta_hat[i], rng)
    }
}

/// Posterior mean of `θ_i` under `Π[h, κ]` when `X_i ~ Po(t θ_i)`.
///
/// `(x+κ)/t` for `x ≥ 1`; for `x = 0` it is
/// `(h Γ(κ+1)/t^{κ+1}) / (1 + h Γ(κ)/t^κ)`.
pub fn power_posterior_mean(x: u64, scale: f64, kappa: f64, t: f64) -> f64 {
    if x >= 1 {
        return (x as f64 + kappa) / t;
    }
    let ln_a = scale.ln() + lgamma(kappa) - kappa * t.ln();
    // a/(1+a) · κ/t
    (ln_a - ln_1p_exp(ln_a)).exp() * kappa / t
}

/// Closed-form posterior means for every coordinate.
///
/// `t_override` replaces every `r_i` by a common `t`; the risk identity over
/// `t ∈ (r, r+1)` uses it.
pub fn posterior_mean(
    x: &CountVector,
    prior: &SpikeSlabPrior,
    ratios: &SamplingRatios,
    t_override: Option<f64>,
) -> Result<Vec<f64>> {
    let kappa = prior.power_kappa()?;
    ratios.check_len(x.len())?;
    if let Some(t) = t_override {
        crate::error::check_positive("t", t)?;
    }
    Ok(x.values()
        .iter()
        .enumerate()
        .map(|(i, &xi)| {
            let t = t_override.unwrap_or_else(|| ratios.get(i));
            power_posterior_mean(xi, prior.scale(), kappa, t)
        })
        .collect())
}
