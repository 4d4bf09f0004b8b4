//! Model configuration: observed counts, sampling ratios, priors, sparsity
//! classes and the closed-form constants that drive the prior scaling.

use rand_distr::{Binomial, Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{check_len, check_positive, domain, Result};
use crate::rng::stream_rng;
use crate::slab::GeneralSlab;

/// A vector of non-negative counts, `x ∈ ℕⁿ` with `n ≥ 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountVector(Vec<u64>);

impl CountVector {
    pub fn new(values: Vec<u64>) -> Result<Self> {
        if values.is_empty() {
            return domain("count vector must have at least one entry");
        }
        Ok(CountVector(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[u64] {
        &self.0
    }

    pub fn get(&self, i: usize) -> u64 {
        self.0[i]
    }
}

impl std::ops::Index<usize> for CountVector {
    type Output = u64;

    fn index(&self, i: usize) -> &u64 {
        &self.0[i]
    }
}

/// Ratio of current to future sampling intensity.
///
/// A scalar ratio applies to every coordinate; a per-coordinate vector models
/// observations missing completely at random.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SamplingRatios {
    Scalar(f64),
    PerCoordinate(Vec<f64>),
}

impl SamplingRatios {
    pub fn scalar(r: f64) -> Result<Self> {
        check_positive("sampling ratio", r)?;
        Ok(SamplingRatios::Scalar(r))
    }

    pub fn per_coordinate(rs: Vec<f64>) -> Result<Self> {
        if rs.is_empty() {
            return domain("per-coordinate ratios must be non-empty");
        }
        for &r in &rs {
            check_positive("sampling ratio", r)?;
        }
        Ok(SamplingRatios::PerCoordinate(rs))
    }

    /// Ratio applying to coordinate `i`.
    pub fn get(&self, i: usize) -> f64 {
        match self {
            SamplingRatios::Scalar(r) => *r,
            SamplingRatios::PerCoordinate(rs) => rs[i],
        }
    }

    /// Checks that the ratios can be paired with `n` coordinates.
    pub fn check_len(&self, n: usize) -> Result<()> {
        match self {
            SamplingRatios::Scalar(_) => Ok(()),
            SamplingRatios::PerCoordinate(rs) => check_len(n, rs.len()),
        }
    }

    /// Materializes the ratios as a vector of length `n`.
    pub fn to_vec(&self, n: usize) -> Vec<f64> {
        (0..n).map(|i| self.get(i)).collect()
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, SamplingRatios::Scalar(_))
    }
}

/// Slab part of a spike-and-slab prior.
#[derive(Debug, Clone)]
pub enum Slab {
    /// Improper slab `λ^{κ-1}` on `(0, ∞)`.
    Power { kappa: f64 },
    General(GeneralSlab),
}

/// Spike at zero plus a slab, `δ₀(dθ) + h·γ(θ)dθ` per coordinate.
///
/// For a general slab the scale is the prior odds `η/(1-η)` of its mixing
/// weight, which puts both parameterizations on the same footing.
#[derive(Debug, Clone)]
pub struct SpikeSlabPrior {
    scale: f64,
    slab: Slab,
}

impl SpikeSlabPrior {
    /// The improper power-slab prior `Π[h, κ]`.
    pub fn power(scale: f64, kappa: f64) -> Result<Self> {
        check_positive("prior scale h", scale)?;
        check_positive("slab exponent kappa", kappa)?;
        Ok(SpikeSlabPrior {
            scale,
            slab: Slab::Power { kappa },
        })
    }

    /// A prior with a general slab. The slab's drift bound is spot-checked.
    pub fn general(slab: GeneralSlab) -> Result<Self> {
        slab.check_drift_bound()?;
        let eta = slab.mixing_weight();
        Ok(SpikeSlabPrior {
            scale: eta / (1.0 - eta),
            slab: Slab::General(slab),
        })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn slab(&self) -> &Slab {
        &self.slab
    }

    /// `κ` of the power slab, or `None` for a general slab.
    pub fn kappa(&self) -> Option<f64> {
        match self.slab {
            Slab::Power { kappa } => Some(kappa),
            Slab::General(_) => None,
        }
    }

    pub(crate) fn power_kappa(&self) -> Result<f64> {
        self.kappa()
            .map_or_else(|| domain("operation requires a power slab"), Ok)
    }
}

/// Exact (`‖θ‖₀ ≤ s`) or quasi (`#{θ_i > ε} ≤ s`) sparsity class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SparsitySpace {
    Exact { s: f64 },
    Quasi { s: f64, eps: f64 },
}

impl SparsitySpace {
    pub fn exact(s: f64, n: usize) -> Result<Self> {
        check_sparsity(s, n)?;
        Ok(SparsitySpace::Exact { s })
    }

    pub fn quasi(s: f64, eps: f64, n: usize) -> Result<Self> {
        check_sparsity(s, n)?;
        check_positive("quasi-sparsity threshold", eps)?;
        Ok(SparsitySpace::Quasi { s, eps })
    }

    pub fn s(&self) -> f64 {
        match *self {
            SparsitySpace::Exact { s } | SparsitySpace::Quasi { s, .. } => s,
        }
    }

    /// Whether `theta` lies in the class.
    pub fn contains(&self, theta: &[f64]) -> bool {
        let threshold = match *self {
            SparsitySpace::Exact { .. } => 0.0,
            SparsitySpace::Quasi { eps, .. } => eps,
        };
        let active = theta.iter().filter(|&&t| t > threshold).count();
        theta.iter().all(|&t| t >= 0.0) && (active as f64) <= self.s()
    }
}

fn check_sparsity(s: f64, n: usize) -> Result<()> {
    if s.is_finite() && s > 0.0 && s < n as f64 {
        Ok(())
    } else {
        domain(format!("sparsity s must lie in (0, {n}), got {s}"))
    }
}

/// Closed-form constants for a sampling configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub c: f64,
    pub k: f64,
    pub l_star: f64,
}

/// Minimax constant `(r/(r+1))^r / (r+1)`.
pub fn constant_c(r: f64) -> Result<f64> {
    check_positive("sampling ratio r", r)?;
    // r·log(r/(r+1)) = -r·log1p(1/r); stays finite for huge r.
    Ok((-r * (1.0 / r).ln_1p() - r.ln_1p()).exp())
}

/// `Γ(κ+1)·(r^{-κ} - (r+1)^{-κ}) / κ`.
pub fn constant_k(r: f64, kappa: f64) -> Result<f64> {
    check_positive("sampling ratio r", r)?;
    check_positive("slab exponent kappa", kappa)?;
    Ok(gamma(kappa + 1.0) * power_gap_over_kappa(r, kappa))
}

/// `(r^{-κ} - (r+1)^{-κ}) / κ` without cancellation; tends to
/// `log((r+1)/r)` as `κ → 0`.
fn power_gap_over_kappa(r: f64, kappa: f64) -> f64 {
    let log_ratio = (1.0 / r).ln_1p();
    let head = (-kappa * r.ln()).exp();
    if kappa * log_ratio < 1e-300 {
        return head * log_ratio;
    }
    head * -(-kappa * log_ratio).exp_m1() / kappa
}

/// Optimal slab scale `L* = C / K`.
pub fn optimal_scale(r: f64, kappa: f64) -> Result<f64> {
    Ok(constant_c(r)? / constant_k(r, kappa)?)
}

/// Averaged constants for per-coordinate ratios: `C̄`, `K̄` and `L̄ = C̄/K̄`.
pub fn mcar_constants(ratios: &[f64], kappa: f64) -> Result<ConstantsReport> {
    if ratios.is_empty() {
        return domain("ratio vector must be non-empty");
    }
    check_positive("slab exponent kappa", kappa)?;
    let n = ratios.len() as f64;
    let mut c_sum = 0.0;
    let mut gap_sum = 0.0;
    for &r in ratios {
        c_sum += constant_c(r)?;
        gap_sum += power_gap_over_kappa(r, kappa);
    }
    let c = c_sum / n;
    let k = gamma(kappa + 1.0) * gap_sum / n;
    Ok(ConstantsReport { c, k, l_star: c / k })
}

/// Constants for `ratios`, using the scalar formulas when possible.
pub fn constants_for(ratios: &SamplingRatios, n: usize, kappa: f64) -> Result<ConstantsReport> {
    match ratios {
        SamplingRatios::Scalar(r) => {
            let c = constant_c(*r)?;
            let k = constant_k(*r, kappa)?;
            Ok(ConstantsReport { c, k, l_star: c / k })
        }
        SamplingRatios::PerCoordinate(rs) => {
            check_len(n, rs.len())?;
            mcar_constants(rs, kappa)
        }
    }
}

/// Sampling distribution of a single ratio `r_1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioDistribution {
    /// Gamma with the given shape and scale.
    Gamma { shape: f64, scale: f64 },
    /// `1 + Binomial(trials, p)`.
    ShiftedBinomial { trials: u64, p: f64 },
}

impl RatioDistribution {
    /// Gamma with mean `r` and variance `r·l`, i.e. shape `r/l`, scale `l`.
    pub fn gamma_mean_var(r: f64, l: f64) -> Result<Self> {
        check_positive("mean r", r)?;
        check_positive("spread l", l)?;
        Ok(RatioDistribution::Gamma {
            shape: r / l,
            scale: l,
        })
    }

    fn validate(&self) -> Result<()> {
        match *self {
            RatioDistribution::Gamma { shape, scale } => {
                check_positive("gamma shape", shape)?;
                check_positive("gamma scale", scale)
            }
            RatioDistribution::ShiftedBinomial { p, .. } => {
                if (0.0..=1.0).contains(&p) {
                    Ok(())
                } else {
                    domain(format!("binomial p must be in [0, 1], got {p}"))
                }
            }
        }
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
}

const MC_CHUNK: u64 = 1 << 16;

/// Monte Carlo estimate of `E_G[C(r_1)]`.
///
/// Draws are split into fixed-size chunks, each with its own RNG stream, so
/// the estimate depends only on `seed` and `n_mc`.
pub fn expected_constant_under_g(g: RatioDistribution, n_mc: u64, seed: u64) -> Result<McEstimate> {
    g.validate()?;
    if n_mc == 0 {
        return domain("n_mc must be at least 1");
    }
    let chunks = n_mc.div_ceil(MC_CHUNK);
    let partials: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = stream_rng(seed, chunk);
            let count = MC_CHUNK.min(n_mc - chunk * MC_CHUNK);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> f64 {
                match g {
                    RatioDistribution::Gamma { shape, scale } => {
                        Gamma::new(shape, scale).expect("validated").sample(rng)
                    }
                    RatioDistribution::ShiftedBinomial { trials, p } => {
                        1.0 + Binomial::new(trials, p).expect("validated").sample(rng) as f64
                    }
                }
            };
            for _ in 0..count {
                let mut r = draw(&mut rng);
                while r <= 0.0 {
                    // Gamma draws can underflow to zero for tiny shapes.
                    r = draw(&mut rng);
                }
                let c = constant_c(r).expect("positive ratio");
                sum += c;
                sum_sq += c * c;
            }
            (sum, sum_sq)
        })
        .collect();
    let (sum, sum_sq) = partials
        .iter()
        .fold((0.0, 0.0), |(a, b), (s, q)| (a + s, b + q));
    let n = n_mc as f64;
    let mean = sum / n;
    let var = if n_mc > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        mean,
        std_error: (var / n).sqrt(),
        samples: n_mc,
    })
}

/// `ln Γ(x)` for `x > 0`.
pub(crate) fn lgamma(x: f64) -> f64 {
    ln_gamma(x)
}
