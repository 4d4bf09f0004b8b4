//! Kullback–Leibler losses and risks computed by truncated exact sums.
//!
//! The coordinate risk of the power-slab predictive density is
//! `ρ(λ) = Σ_x Po(x; rλ) · KL(Po(λ) ‖ q(·|x))`. Each inner KL splits into the
//! negative entropy of `Po(λ)`, computed once, minus a cross-entropy whose
//! negative-binomial log-coefficients are built by running sums, so no
//! log-gamma evaluations are needed inside the double loop.

use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, check_positive, domain, Result};
use crate::model::{constant_c, lgamma, SamplingRatios, SpikeSlabPrior};
use crate::poisson::{self, TruncationPolicy};
use crate::predictive::{ln_1p_exp, log_add_exp, power_posterior_mean, CountPredictive};
use crate::quadrature::gauss_legendre;
use crate::rng::stream_rng;
use crate::sparsity::estimate_sparsity;
use crate::CountVector;

fn check_theta(theta: &[f64]) -> Result<()> {
    if theta.is_empty() {
        return domain("parameter vector must be non-empty");
    }
    for (i, &t) in theta.iter().enumerate() {
        if !(t.is_finite() && t >= 0.0) {
            return domain(format!("theta[{i}] must be finite and non-negative, got {t}"));
        }
    }
    Ok(())
}

/// Truncated `Po(μ)` probabilities with their negative entropy.
#[derive(Debug, Clone)]
struct PoissonTable {
    lo: u64,
    probs: Vec<f64>,
    neg_entropy: f64,
}

impl PoissonTable {
    fn new(mu: f64, policy: &TruncationPolicy) -> Self {
        if mu == 0.0 {
            return PoissonTable {
                lo: 0,
                probs: vec![1.0],
                neg_entropy: 0.0,
            };
        }
        let lo = policy.lower(mu);
        let hi = policy.cutoff(mu);
        let mut probs = Vec::with_capacity((hi - lo + 1) as usize);
        let mut neg_entropy = 0.0;
        for y in lo..=hi {
            let lp = poisson::ln_pmf(y, mu);
            let p = lp.exp();
            if p > 0.0 {
                neg_entropy += p * lp;
            }
            probs.push(p);
        }
        PoissonTable { lo, probs, neg_entropy }
    }

    fn hi(&self) -> u64 {
        self.lo + self.probs.len() as u64 - 1
    }
}

/// Parameters of one zero-inflated negative-binomial coordinate that do not
/// depend on the observed count.
#[derive(Debug, Clone, Copy)]
struct ZinbShape {
    kappa: f64,
    ln_p: f64,
    ln_q: f64,
    /// `log ω` and `log(1-ω)` at `x = 0`; `(-∞, 0)` without a spike.
    ln_omega0: f64,
    ln_slab0: f64,
}

impl ZinbShape {
    fn new(r: f64, kappa: f64, scale: f64) -> Self {
        let (ln_omega0, ln_slab0) = if scale > 0.0 {
            let ln_a = scale.ln() + lgamma(kappa) - kappa * r.ln();
            let l = ln_1p_exp(ln_a);
            (-l, ln_a - l)
        } else {
            (f64::NEG_INFINITY, 0.0)
        };
        ZinbShape {
            kappa,
            ln_p: -(1.0 / r).ln_1p(),
            ln_q: -r.ln_1p(),
            ln_omega0,
            ln_slab0,
        }
    }

    /// `Σ_y Po(y; θ) log q(y | x)` over the table's support.
    fn cross_entropy(&self, table: &PoissonTable, x: u64) -> f64 {
        let size = x as f64 + self.kappa;
        let (ln_omega, ln_slab) = if x == 0 {
            (self.ln_omega0, self.ln_slab0)
        } else {
            (f64::NEG_INFINITY, 0.0)
        };
        let base = ln_slab + size * self.ln_p;
        // log[Γ(size+y) / (Γ(size) y!)] accumulated as Σ_{j<y} log((size+j)/(j+1))
        let mut coef = 0.0;
        let mut acc = 0.0;
        for y in 0..=table.hi() {
            if y > 0 {
                let j = (y - 1) as f64;
                coef += ((size + j) / (j + 1.0)).ln();
            }
            if y < table.lo {
                continue;
            }
            let py = table.probs[(y - table.lo) as usize];
            if py == 0.0 {
                continue;
            }
            let ln_slab_pmf = base + coef + y as f64 * self.ln_q;
            let lq = if y == 0 {
                log_add_exp(ln_omega, ln_slab_pmf)
            } else {
                ln_slab_pmf
            };
            acc += py * lq;
        }
        acc
    }

    /// `KL(Po(θ) ‖ q(·|x))` for the table of `Po(θ)`.
    fn kl(&self, table: &PoissonTable, x: u64) -> f64 {
        table.neg_entropy - self.cross_entropy(table, x)
    }
}

/// `Σ_x Po(x; rθ) KL(Po(θ) ‖ q(·|x))` for one coordinate.
fn coordinate_risk(theta: f64, r: f64, scale: f64, kappa: f64, policy: &TruncationPolicy) -> f64 {
    let shape = ZinbShape::new(r, kappa, scale);
    let ytab = PoissonTable::new(theta, policy);
    let xtab = PoissonTable::new(r * theta, policy);
    let mut risk = 0.0;
    for (k, &px) in xtab.probs.iter().enumerate() {
        if px == 0.0 {
            continue;
        }
        risk += px * shape.kl(&ytab, xtab.lo + k as u64);
    }
    risk
}

/// Kullback–Leibler loss `Σ_i KL(Po(θ_i) ‖ q_i)` of a fitted predictive
/// density. Returns `+∞` when `q_i` misses mass that `Po(θ_i)` carries.
pub fn kl_loss<P: CountPredictive + ?Sized>(theta: &[f64], pd: &P, policy: &TruncationPolicy) -> Result<f64> {
    check_theta(theta)?;
    check_len(pd.len(), theta.len())?;
    let mut total = 0.0;
    for (i, &t) in theta.iter().enumerate() {
        let table = PoissonTable::new(t, policy);
        let mut cross = 0.0;
        for (k, &py) in table.probs.iter().enumerate() {
            if py == 0.0 {
                continue;
            }
            let lq = pd.coord_ln_pmf(i, table.lo + k as u64);
            if lq == f64::NEG_INFINITY {
                return Ok(f64::INFINITY);
            }
            cross += py * lq;
        }
        total += table.neg_entropy - cross;
    }
    Ok(total)
}

/// Coordinate risk `ρ(λ)` of the predictive density under `Π[h, κ]` with
/// sampling ratio `r`. At `λ = 0` this is `-log q(0|0)`.
pub fn coord_risk_rho(lambda: f64, prior: &SpikeSlabPrior, r: f64, policy: &TruncationPolicy) -> Result<f64> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return domain(format!("lambda must be finite and non-negative, got {lambda}"));
    }
    check_positive("sampling ratio r", r)?;
    let kappa = prior.power_kappa()?;
    Ok(coordinate_risk(lambda, r, prior.scale(), kappa, policy))
}

/// `ρ` on a grid of `λ` values, in grid order.
pub fn risk_curve(prior: &SpikeSlabPrior, r: f64, grid: &[f64], policy: &TruncationPolicy) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return domain("lambda grid must be non-empty");
    }
    grid.par_iter()
        .map(|&l| coord_risk_rho(l, prior, r, policy))
        .collect()
}

/// Search interval for suprema over `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaRange {
    pub lo: f64,
    pub hi: f64,
    /// Points in the coarse log-spaced scan.
    pub grid_points: usize,
}

impl Default for LambdaRange {
    fn default() -> Self {
        LambdaRange {
            lo: 1e-4,
            hi: 50.0,
            grid_points: 80,
        }
    }
}

impl LambdaRange {
    fn check(&self) -> Result<()> {
        if !(self.lo > 0.0 && self.hi > self.lo && self.hi.is_finite()) {
            return domain(format!("invalid lambda range [{}, {}]", self.lo, self.hi));
        }
        if self.grid_points < 3 {
            return domain("lambda range needs at least 3 grid points");
        }
        Ok(())
    }

    pub fn log_grid(&self) -> Vec<f64> {
        log_grid(self.lo, self.hi, self.grid_points)
    }
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupRisk {
    pub sup: f64,
    pub argmax: f64,
}

/// Coarse log-grid scan followed by golden-section refinement in `log λ`
/// around the best grid point.
fn maximize<F>(f: F, range: &LambdaRange) -> Result<SupRisk>
where
    F: Fn(f64) -> f64 + Sync,
{
    range.check()?;
    let grid = range.log_grid();
    let values: Vec<f64> = grid.par_iter().map(|&l| f(l)).collect();
    let (k, _) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
    let mut best = SupRisk {
        sup: values[k],
        argmax: grid[k],
    };
    let mut a = grid[k.saturating_sub(1)].ln();
    let mut b = grid[(k + 1).min(grid.len() - 1)].ln();
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c.exp());
    let mut fd = f(d.exp());
    for _ in 0..60 {
        if b - a < 1e-9 {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c.exp());
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d.exp());
        }
    }
    for (v, l) in [(fc, c), (fd, d)] {
        if v > best.sup {
            best = SupRisk { sup: v, argmax: l.exp() };
        }
    }
    Ok(best)
}

/// `sup_λ ρ(λ)` over `range`.
pub fn sup_risk(prior: &SpikeSlabPrior, r: f64, policy: &TruncationPolicy, range: &LambdaRange) -> Result<SupRisk> {
    check_positive("sampling ratio r", r)?;
    let kappa = prior.power_kappa()?;
    let h = prior.scale();
    maximize(|l| coordinate_risk(l, r, h, kappa, policy), range)
}

/// Estimation risk of one coordinate: `E[θ log(θ/θ̂) - θ + θ̂]` with
/// `X ~ Po(rθ)`.
fn coordinate_estimation_risk<F>(theta: f64, r: f64, estimator: F, policy: &TruncationPolicy) -> f64
where
    F: Fn(u64) -> f64,
{
    if theta == 0.0 {
        return estimator(0);
    }
    let xtab = PoissonTable::new(r * theta, policy);
    let mut risk = 0.0;
    for (k, &px) in xtab.probs.iter().enumerate() {
        if px == 0.0 {
            continue;
        }
        let est = estimator(xtab.lo + k as u64);
        if est <= 0.0 {
            return f64::INFINITY;
        }
        risk += px * (theta * (theta / est).ln() - theta + est);
    }
    risk
}

/// Estimation risk `Σ_i E[θ_i log(θ_i/θ̂_i) - θ_i + θ̂_i]`, `X_i ~ Po(r_i θ_i)`.
///
/// `estimator(i, x)` is the estimate of `θ_i` from count `x`. A zero estimate
/// where `θ_i > 0` gives `+∞`.
pub fn estimation_risk<F>(theta: &[f64], estimator: F, ratios: &SamplingRatios, policy: &TruncationPolicy) -> Result<f64>
where
    F: Fn(usize, u64) -> f64,
{
    check_theta(theta)?;
    ratios.check_len(theta.len())?;
    Ok(theta
        .iter()
        .enumerate()
        .map(|(i, &t)| coordinate_estimation_risk(t, ratios.get(i), |x| estimator(i, x), policy))
        .sum())
}

/// Supremum over `λ` of the coordinate estimation risk of the Bayes
/// estimator `θ̂(x; r)` under `Π[h, κ]`.
pub fn sup_estimation_risk(
    prior: &SpikeSlabPrior,
    r: f64,
    policy: &TruncationPolicy,
    range: &LambdaRange,
) -> Result<SupRisk> {
    check_positive("sampling ratio r", r)?;
    let kappa = prior.power_kappa()?;
    let h = prior.scale();
    maximize(
        |l| coordinate_estimation_risk(l, r, |x| power_posterior_mean(x, h, kappa, r), policy),
        range,
    )
}

/// Exact Kullback–Leibler risk `E_X KL(p(·|θ) ‖ q(·|X))` of the predictive
/// density under a power-slab prior.
pub fn risk_exact(theta: &[f64], prior: &SpikeSlabPrior, ratios: &SamplingRatios, policy: &TruncationPolicy) -> Result<f64> {
    check_theta(theta)?;
    ratios.check_len(theta.len())?;
    let kappa = prior.power_kappa()?;
    let h = prior.scale();
    let parts: Vec<f64> = theta
        .par_iter()
        .enumerate()
        .map(|(i, &t)| coordinate_risk(t, ratios.get(i), h, kappa, policy))
        .collect();
    Ok(parts.iter().sum())
}

/// The same risk as [`risk_exact`], computed instead as
/// `∫_r^{r+1} R_e(tθ, t θ̂(·;t)) / t dt` with Gauss–Legendre quadrature,
/// where `R_e` is the estimation risk with `X ~ Po(tθ)`.
pub fn risk_via_lemma1(
    theta: &[f64],
    prior: &SpikeSlabPrior,
    r: f64,
    quad_nodes: usize,
    policy: &TruncationPolicy,
) -> Result<f64> {
    check_theta(theta)?;
    check_positive("sampling ratio r", r)?;
    let kappa = prior.power_kappa()?;
    let h = prior.scale();
    if !(h > 0.0) {
        return domain("the risk identity needs strictly positive posterior means (h > 0)");
    }
    if quad_nodes == 0 {
        return domain("need at least one quadrature node");
    }
    let unit = SamplingRatios::Scalar(1.0);
    let (nodes, weights) = gauss_legendre(quad_nodes);
    let mut total = 0.0;
    for (z, w) in nodes.iter().zip(&weights) {
        let t = r + 0.5 * (z + 1.0);
        let scaled: Vec<f64> = theta.iter().map(|&v| t * v).collect();
        let re = estimation_risk(&scaled, |_, x| t * power_posterior_mean(x, h, kappa, t), &unit, policy)?;
        total += 0.5 * w * re / t;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockLowerBound {
    pub m: u64,
    pub nu_star: f64,
    pub coefficient: f64,
    pub bound: f64,
}

/// Minimax lower bound from the block prior: `C(r) · s · log⌊n/s⌋`, attained
/// at the spike height `ν* = log((r+1)/r)`.
pub fn lower_bound_block_prior(n: usize, s: f64, r: f64) -> Result<BlockLowerBound> {
    check_positive("sampling ratio r", r)?;
    if !(s > 0.0 && s < n as f64) {
        return domain(format!("sparsity s must lie in (0, {n}), got {s}"));
    }
    let m = (n as f64 / s).floor() as u64;
    let nu_star = (1.0 / r).ln_1p();
    let coefficient = constant_c(r)?;
    Ok(BlockLowerBound {
        m,
        nu_star,
        coefficient,
        bound: coefficient * s * (m as f64).ln(),
    })
}

/// Worst-case upper bound `s · sup ρ + (n-s) · ρ(0)` over `Θ[s]`.
pub fn worst_case_upper_bound(
    n: usize,
    s: f64,
    prior: &SpikeSlabPrior,
    r: f64,
    policy: &TruncationPolicy,
    range: &LambdaRange,
) -> Result<f64> {
    if !(s > 0.0 && s < n as f64) {
        return domain(format!("sparsity s must lie in (0, {n}), got {s}"));
    }
    let sup = sup_risk(prior, r, policy, range)?;
    let rho0 = coord_risk_rho(0.0, prior, r, policy)?;
    Ok(s * sup.sup + (n as f64 - s) * rho0)
}

/// Risk curve summary at one prior, with the block lower bound for `(n, s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub lambda_grid: Vec<f64>,
    pub rho_values: Vec<f64>,
    pub rho_at_zero: f64,
    pub sup_rho: f64,
    pub argmax_lambda: f64,
    pub lower_bound: f64,
    /// `sup_rho / (C · log(1/η))` with `η = s/n`.
    pub constant_ratio: f64,
}

impl RiskReport {
    pub fn compute(
        prior: &SpikeSlabPrior,
        r: f64,
        n: usize,
        s: f64,
        range: &LambdaRange,
        policy: &TruncationPolicy,
    ) -> Result<Self> {
        let lower = lower_bound_block_prior(n, s, r)?;
        let lambda_grid = range.log_grid();
        let rho_values = risk_curve(prior, r, &lambda_grid, policy)?;
        let rho_at_zero = coord_risk_rho(0.0, prior, r, policy)?;
        let sup = sup_risk(prior, r, policy, range)?;
        let eta = s / n as f64;
        Ok(RiskReport {
            lambda_grid,
            rho_values,
            rho_at_zero,
            sup_rho: sup.sup,
            argmax_lambda: sup.argmax,
            lower_bound: lower.bound,
            constant_ratio: sup.sup / (lower.coefficient * (1.0 / eta).ln()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveGap {
    pub risk_adaptive_mc: f64,
    pub std_error: f64,
    pub risk_oracle_exact: f64,
    pub gap_ratio: f64,
}

/// Compares the Monte Carlo risk of the adaptive density
/// `q_{Π[L·ŝ(X)/n, κ]}` with the exact risk at the oracle scale `L·s/n`,
/// where `s = ‖θ‖₀`. The gap is scaled by `C(r) · s · log(n/s)`.
pub fn adaptive_risk_gap(
    theta: &[f64],
    kappa: f64,
    scale_multiplier: f64,
    r: f64,
    n_mc: usize,
    seed: u64,
    policy: &TruncationPolicy,
) -> Result<AdaptiveGap> {
    check_theta(theta)?;
    check_positive("slab exponent kappa", kappa)?;
    check_positive("scale multiplier", scale_multiplier)?;
    check_positive("sampling ratio r", r)?;
    if n_mc < 1000 {
        return domain(format!("need at least 1000 Monte Carlo draws, got {n_mc}"));
    }
    let n = theta.len();
    let s = theta.iter().filter(|&&t| t > 0.0).count();
    if s == 0 || s >= n {
        return domain(format!("support size must lie in [1, {n}), got {s}"));
    }
    let oracle_prior = SpikeSlabPrior::power(scale_multiplier * s as f64 / n as f64, kappa)?;
    let risk_oracle_exact = risk_exact(theta, &oracle_prior, &SamplingRatios::Scalar(r), policy)?;

    let active: Vec<(usize, f64)> = theta.iter().copied().enumerate().filter(|&(_, t)| t > 0.0).collect();
    let tables: Vec<PoissonTable> = active.iter().map(|&(_, t)| PoissonTable::new(t, policy)).collect();
    let samplers: Vec<Poisson<f64>> = active
        .iter()
        .map(|&(_, t)| Poisson::new(r * t).expect("positive mean"))
        .collect();
    let zero_coords = (n - active.len()) as f64;

    let losses: Vec<f64> = (0..n_mc)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream_rng(seed, j as u64);
            let mut x = vec![0u64; n];
            for (&(i, _), sampler) in active.iter().zip(&samplers) {
                x[i] = sampler.sample(&mut rng) as u64;
            }
            let counts = CountVector::new(x).expect("non-empty");
            let est = estimate_sparsity(&counts);
            let h = scale_multiplier * est.eta_hat;
            let shape = ZinbShape::new(r, kappa, h);
            let zero_table = PoissonTable::new(0.0, policy);
            let mut loss = zero_coords * shape.kl(&zero_table, 0);
            for (&(i, _), table) in active.iter().zip(&tables) {
                loss += shape.kl(table, counts[i]);
            }
            loss
        })
        .collect();
    let m = n_mc as f64;
    let mean = losses.iter().sum::<f64>() / m;
    let var = losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let scale = constant_c(r)? * s as f64 * (n as f64 / s as f64).ln();
    Ok(AdaptiveGap {
        risk_adaptive_mc: mean,
        std_error: (var / m).sqrt(),
        risk_oracle_exact,
        gap_ratio: (mean - risk_oracle_exact).abs() / scale,
    })
}

/// Finite-`η` check of the minimax constants at one `η`, with `h = η`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationEntry {
    pub eta: f64,
    pub sup_rho: f64,
    pub argmax: f64,
    /// `sup_rho / (C · log(1/η))`.
    pub ratio: f64,
    pub rho0: f64,
    pub estimation_sup: f64,
    pub estimation_argmax: f64,
    /// `estimation_sup / (e⁻¹ r⁻¹ · log(1/η))`.
    pub estimation_ratio: f64,
    /// Block lower bound per unit sparsity, `C · log⌊1/η⌋`.
    pub lower_bound: f64,
    /// `sup_rho + (1/η - 1) · rho0`, the worst-case bound per unit sparsity.
    pub upper_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub r: f64,
    pub kappa: f64,
    pub constant_c: f64,
    pub estimation_constant: f64,
    pub lambda_star: f64,
    pub entries: Vec<VerificationEntry>,
    /// Ratios decrease as `η` decreases.
    pub ratio_decreasing: bool,
    pub estimation_ratio_decreasing: bool,
    pub sandwich_holds: bool,
    /// `|argmax - λ*| ≤ 0.1` at the smallest `η`.
    pub argmax_near_lambda_star: bool,
}

pub fn verify_constants(r: f64, kappa: f64, etas: &[f64], policy: &TruncationPolicy) -> Result<VerificationReport> {
    check_positive("sampling ratio r", r)?;
    check_positive("slab exponent kappa", kappa)?;
    if etas.is_empty() {
        return domain("need at least one eta");
    }
    if let Some(bad) = etas.iter().find(|&&e| !(e > 0.0 && e < 1.0)) {
        return domain(format!("eta must lie in (0, 1), got {bad}"));
    }
    let mut sorted = etas.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    let c = constant_c(r)?;
    let est_const = (-1f64).exp() / r;
    let range = LambdaRange::default();
    let mut entries = Vec::with_capacity(sorted.len());
    for &eta in &sorted {
        let prior = SpikeSlabPrior::power(eta, kappa)?;
        let sup = sup_risk(&prior, r, policy, &range)?;
        let est = sup_estimation_risk(&prior, r, policy, &range)?;
        let rho0 = coord_risk_rho(0.0, &prior, r, policy)?;
        let log_inv = (1.0 / eta).ln();
        entries.push(VerificationEntry {
            eta,
            sup_rho: sup.sup,
            argmax: sup.argmax,
            ratio: sup.sup / (c * log_inv),
            rho0,
            estimation_sup: est.sup,
            estimation_argmax: est.argmax,
            estimation_ratio: est.sup / (est_const * log_inv),
            lower_bound: c * (1.0 / eta).floor().ln(),
            upper_bound: sup.sup + (1.0 / eta - 1.0) * rho0,
        });
    }
    let lambda_star = (1.0 / r).ln_1p();
    let last = entries.last().expect("non-empty");
    Ok(VerificationReport {
        r,
        kappa,
        constant_c: c,
        estimation_constant: est_const,
        lambda_star,
        ratio_decreasing: entries.windows(2).all(|w| w[1].ratio < w[0].ratio),
        estimation_ratio_decreasing: entries.windows(2).all(|w| w[1].estimation_ratio < w[0].estimation_ratio),
        sandwich_holds: entries.iter().all(|e| e.lower_bound <= e.upper_bound),
        argmax_near_lambda_star: (last.argmax - lambda_star).abs() <= 0.1,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictive::PredictiveDensity;

    fn policy() -> TruncationPolicy {
        TruncationPolicy::default()
    }

    /// Double sum through the fitted density's own pmf.
    fn rho_direct(lambda: f64, h: f64, kappa: f64, r: f64) -> f64 {
        let prior = SpikeSlabPrior::power(h, kappa).unwrap();
        let rs = SamplingRatios::scalar(r).unwrap();
        let mut risk = 0.0;
        for x in 0..=policy().cutoff(r * lambda) {
            let px = poisson::pmf(x, r * lambda);
            let pd = PredictiveDensity::fit(&CountVector::new(vec![x]).unwrap(), &prior, &rs).unwrap();
            risk += px * kl_loss(&[lambda], &pd, &policy()).unwrap();
        }
        risk
    }

    #[test]
    fn rho_at_zero_reference() {
        let prior = SpikeSlabPrior::power(0.025, 1.0).unwrap();
        let v = coord_risk_rho(0.0, &prior, 1.0, &policy()).unwrap();
        // log(1.025 / 1.0125)
        assert!((v - 0.012_270_092_591_814_4).abs() < 1e-12, "{v}");
    }

    #[test]
    fn fast_rho_matches_direct_sum() {
        for &(l, h, k, r) in &[(0.3, 0.025, 1.0, 1.0), (2.0, 0.01, 0.1, 1.0), (5.0, 0.1, 1.0, 20.0), (0.05, 1e-4, 0.5, 3.0)] {
            let fast = coord_risk_rho(l, &SpikeSlabPrior::power(h, k).unwrap(), r, &policy()).unwrap();
            let slow = rho_direct(l, h, k, r);
            assert!(((fast - slow) / slow).abs() < 1e-10, "{fast} vs {slow}");
        }
    }

    #[test]
    fn kl_of_true_density_is_zero() {
        let pd = crate::PoissonPlugin::new(vec![0.0, 1.5, 30.0]).unwrap();
        let v = kl_loss(&[0.0, 1.5, 30.0], &pd, &policy()).unwrap();
        assert!(v.abs() < 1e-10);
        assert_eq!(kl_loss(&[0.5, 1.5, 30.0], &pd, &policy()).unwrap(), f64::INFINITY);
    }

    #[test]
    fn zero_vector_risks() {
        let prior = SpikeSlabPrior::power(0.025, 1.0).unwrap();
        let rs = SamplingRatios::scalar(1.0).unwrap();
        let rho0 = coord_risk_rho(0.0, &prior, 1.0, &policy()).unwrap();
        let r = risk_exact(&[0.0; 7], &prior, &rs, &policy()).unwrap();
        assert!((r - 7.0 * rho0).abs() < 1e-14);
        let l1 = risk_via_lemma1(&[0.0; 7], &prior, 1.0, 32, &policy()).unwrap();
        assert!((l1 - 7.0 * rho0).abs() < 1e-6);
        let e = estimation_risk(&[0.0; 3], |_, x| power_posterior_mean(x, 0.025, 1.0, 1.0), &rs, &policy()).unwrap();
        assert!((e - 3.0 * 0.025 / 1.025).abs() < 1e-15);
    }

    #[test]
    fn estimation_risk_sentinels() {
        let rs = SamplingRatios::scalar(1.0).unwrap();
        let exact = estimation_risk(&[2.0], |_, _| 2.0, &rs, &policy()).unwrap();
        assert!(exact.abs() < 1e-15);
        let bad = estimation_risk(&[2.0], |_, x| x as f64, &rs, &policy()).unwrap();
        assert_eq!(bad, f64::INFINITY);
    }

    #[test]
    fn integral_identity_agrees_on_a_mixed_vector() {
        let prior = SpikeSlabPrior::power(0.025, 1.0).unwrap();
        let theta = [0.0, 0.7, 3.0, 4.9];
        let exact = risk_exact(&theta, &prior, &SamplingRatios::scalar(1.0).unwrap(), &policy()).unwrap();
        let via = risk_via_lemma1(&theta, &prior, 1.0, 32, &policy()).unwrap();
        assert!(((via - exact) / exact).abs() < 1e-8, "{via} vs {exact}");
    }

    #[test]
    fn block_bound_arithmetic() {
        let b = lower_bound_block_prior(200, 5.0, 1.0).unwrap();
        assert_eq!(b.m, 40);
        assert!((b.nu_star - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((b.coefficient - 0.25).abs() < 1e-15);
        assert!((b.bound - 0.25 * 5.0 * 40f64.ln()).abs() < 1e-12);
        assert!(lower_bound_block_prior(10, 10.0, 1.0).is_err());
    }

    #[test]
    fn maximize_finds_smooth_peak() {
        let range = LambdaRange::default();
        let res = maximize(|l| -(l.ln() - 0.3f64.ln()).powi(2), &range).unwrap();
        assert!((res.argmax - 0.3).abs() < 1e-6);
    }
}
