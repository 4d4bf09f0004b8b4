//! Seeded simulation scenarios: sparse Gamma spikes, Poisson current and
//! future counts, the competing predictive methods and their metrics.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, check_positive, domain, Error, Result};
use crate::model::{constants_for, optimal_scale, CountVector, SamplingRatios, SpikeSlabPrior};
use crate::predictive::{CountPredictive, PoissonPlugin, PredictiveDensity};
use crate::rng::stream_rng;
use crate::sets::calibrate;
use crate::sparsity::{
    estimate_sparsity, estimate_sparsity_per_period, estimate_sparsity_two_cluster, SparsityEstimate,
};

/// How the slab scale `h = L·η̂` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ScaleRule {
    /// `L*` for a scalar ratio.
    AutoLstar,
    /// `L̄` from the per-coordinate ratios (equals `L*` for a scalar ratio).
    AutoLbar,
    /// A fixed `h`, bypassing the sparsity estimate.
    Fixed(f64),
}

impl FromStr for ScaleRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto-lstar" => Ok(ScaleRule::AutoLstar),
            "auto-lbar" => Ok(ScaleRule::AutoLbar),
            _ => match s.strip_prefix("fixed:") {
                Some(v) => {
                    let h: f64 = v
                        .parse()
                        .map_err(|_| Error::Domain(format!("invalid fixed scale {v:?}")))?;
                    check_positive("fixed scale h", h)?;
                    Ok(ScaleRule::Fixed(h))
                }
                None => domain(format!(
                    "unknown scale rule {s:?} (expected auto-lstar, auto-lbar or fixed:<h>)"
                )),
            },
        }
    }
}

impl fmt::Display for ScaleRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScaleRule::AutoLstar => write!(f, "auto-lstar"),
            ScaleRule::AutoLbar => write!(f, "auto-lbar"),
            ScaleRule::Fixed(h) => write!(f, "fixed:{h}"),
        }
    }
}

impl TryFrom<String> for ScaleRule {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ScaleRule> for String {
    fn from(r: ScaleRule) -> String {
        r.to_string()
    }
}

/// Which sparsity estimate feeds `η̂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SparsityRule {
    /// `#{x_i ≥ 1}`.
    Count,
    /// `#{x_i > 1}` (per period, averaged when several periods are given).
    CountGt1,
    /// Upper cluster of a two-means split.
    Kmeans2,
    Fixed(u64),
}

impl FromStr for SparsityRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "count" => Ok(SparsityRule::Count),
            "count-gt1" => Ok(SparsityRule::CountGt1),
            "kmeans2" => Ok(SparsityRule::Kmeans2),
            _ => match s.strip_prefix("fixed:") {
                Some(v) => v
                    .parse()
                    .map(SparsityRule::Fixed)
                    .map_err(|_| Error::Domain(format!("invalid fixed sparsity {v:?}"))),
                None => domain(format!(
                    "unknown sparsity rule {s:?} (expected count, count-gt1, kmeans2 or fixed:<s>)"
                )),
            },
        }
    }
}

impl fmt::Display for SparsityRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SparsityRule::Count => write!(f, "count"),
            SparsityRule::CountGt1 => write!(f, "count-gt1"),
            SparsityRule::Kmeans2 => write!(f, "kmeans2"),
            SparsityRule::Fixed(s) => write!(f, "fixed:{s}"),
        }
    }
}

impl TryFrom<String> for SparsityRule {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SparsityRule> for String {
    fn from(r: SparsityRule) -> String {
        r.to_string()
    }
}

impl SparsityRule {
    /// Applies the rule to one or more periods of counts on the same
    /// coordinates. Only `count-gt1` uses more than the first period.
    pub fn estimate(&self, periods: &[CountVector]) -> Result<SparsityEstimate> {
        let Some(first) = periods.first() else {
            return domain("need at least one period of counts");
        };
        match self {
            SparsityRule::Count => Ok(estimate_sparsity(first)),
            SparsityRule::CountGt1 => estimate_sparsity_per_period(periods),
            SparsityRule::Kmeans2 => estimate_sparsity_two_cluster(first),
            SparsityRule::Fixed(s) => SparsityEstimate::fixed(*s, first.len()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SparsityKind {
    Exact,
    /// Off-support means drawn from `Uniform[0, xi_max]`.
    Quasi { xi_max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RatioSpec {
    Scalar { r: f64 },
    /// `r_i = 1 + Binomial(m, p)`.
    Mcar { m: u64, p: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MethodSpec {
    Proposed {
        kappa: f64,
        scale: ScaleRule,
        sparsity: SparsityRule,
    },
    L1Plugin {
        lambda_reg: f64,
    },
    GammaBaseline {
        kappa: f64,
    },
}

impl MethodSpec {
    pub fn label(&self) -> String {
        match self {
            MethodSpec::Proposed { kappa, .. } => format!("proposed(kappa={kappa})"),
            MethodSpec::L1Plugin { lambda_reg } => format!("l1-plugin(lambda={lambda_reg})"),
            MethodSpec::GammaBaseline { kappa } => format!("gamma-baseline(kappa={kappa})"),
        }
    }
}

fn default_spike_shape() -> f64 {
    10.0
}

fn default_spike_scale() -> f64 {
    1.0
}

fn default_alpha() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub n: usize,
    pub s: usize,
    pub sparsity: SparsityKind,
    #[serde(default = "default_spike_shape")]
    pub spike_shape: f64,
    #[serde(default = "default_spike_scale")]
    pub spike_scale: f64,
    pub ratios: RatioSpec,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub methods: Vec<MethodSpec>,
}

impl ScenarioSpec {
    /// The standard table setup: exact sparsity, scalar `r`, the proposed
    /// method with `L*` and the count estimate, and the `ℓ1` plug-in.
    pub fn standard(n: usize, s: usize, r: f64, kappa: f64, trials: usize, seed: u64) -> Self {
        ScenarioSpec {
            n,
            s,
            sparsity: SparsityKind::Exact,
            spike_shape: default_spike_shape(),
            spike_scale: default_spike_scale(),
            ratios: RatioSpec::Scalar { r },
            trials,
            seed,
            alpha: default_alpha(),
            methods: vec![
                MethodSpec::Proposed {
                    kappa,
                    scale: ScaleRule::AutoLstar,
                    sparsity: SparsityRule::Count,
                },
                MethodSpec::L1Plugin { lambda_reg: 0.1 },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s >= 1 && self.s < self.n) {
            return domain(format!("need 1 ≤ s < n, got s={} n={}", self.s, self.n));
        }
        if self.trials == 0 {
            return domain("trials must be at least 1");
        }
        check_positive("spike shape", self.spike_shape)?;
        check_positive("spike scale", self.spike_scale)?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return domain(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if let SparsityKind::Quasi { xi_max } = self.sparsity {
            check_positive("xi_max", xi_max)?;
        }
        match self.ratios {
            RatioSpec::Scalar { r } => check_positive("sampling ratio r", r)?,
            RatioSpec::Mcar { p, .. } => {
                if !(0.0..=1.0).contains(&p) {
                    return domain(format!("binomial p must lie in [0, 1], got {p}"));
                }
            }
        }
        if self.methods.is_empty() {
            return domain("at least one method is required");
        }
        for m in &self.methods {
            match *m {
                MethodSpec::Proposed { kappa, scale, .. } => {
                    check_positive("kappa", kappa)?;
                    if scale == ScaleRule::AutoLstar && matches!(self.ratios, RatioSpec::Mcar { .. }) {
                        return domain("auto-lstar needs a scalar ratio; use auto-lbar");
                    }
                }
                MethodSpec::L1Plugin { lambda_reg } => check_positive("lambda_reg", lambda_reg)?,
                MethodSpec::GammaBaseline { kappa } => check_positive("kappa", kappa)?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub theta: Vec<f64>,
    pub x: CountVector,
    pub y: CountVector,
    pub ratios: SamplingRatios,
}

fn poisson_draw<R: Rng + ?Sized>(mu: f64, rng: &mut R) -> u64 {
    if mu <= 0.0 {
        return 0;
    }
    let v: f64 = Poisson::new(mu).expect("positive mean").sample(rng);
    v as u64
}

/// One trial of the scenario, drawn from stream `(seed, trial_index)`.
pub fn generate_trial(spec: &ScenarioSpec, trial_index: u64) -> Result<Trial> {
    spec.validate()?;
    let mut rng = stream_rng(spec.seed, trial_index);
    let n = spec.n;
    let ratios = match spec.ratios {
        RatioSpec::Scalar { r } => SamplingRatios::scalar(r)?,
        RatioSpec::Mcar { m, p } => {
            let b = Binomial::new(m, p).map_err(|e| Error::Domain(e.to_string()))?;
            SamplingRatios::per_coordinate((0..n).map(|_| 1.0 + b.sample(&mut rng) as f64).collect())?
        }
    };
    // partial Fisher–Yates: the first s entries form a uniform s-subset
    let mut idx: Vec<usize> = (0..n).collect();
    for k in 0..spec.s {
        let j = rng.random_range(k..n);
        idx.swap(k, j);
    }
    let spike = Gamma::new(spec.spike_shape, spec.spike_scale).map_err(|e| Error::Domain(e.to_string()))?;
    let mut theta = vec![0.0; n];
    if let SparsityKind::Quasi { xi_max } = spec.sparsity {
        for t in theta.iter_mut() {
            *t = rng.random_range(0.0..xi_max);
        }
    }
    for &i in &idx[..spec.s] {
        theta[i] = spike.sample(&mut rng);
    }
    let x: Vec<u64> = (0..n).map(|i| poisson_draw(ratios.get(i) * theta[i], &mut rng)).collect();
    let y: Vec<u64> = (0..n).map(|i| poisson_draw(theta[i], &mut rng)).collect();
    Ok(Trial {
        theta,
        x: CountVector::new(x)?,
        y: CountVector::new(y)?,
        ratios,
    })
}

/// Slab scale multiplier `L` for a rule (`None` for a fixed `h`).
pub fn scale_multiplier(rule: ScaleRule, ratios: &SamplingRatios, n: usize, kappa: f64) -> Result<Option<f64>> {
    match rule {
        ScaleRule::AutoLstar => match ratios {
            SamplingRatios::Scalar(r) => Ok(Some(optimal_scale(*r, kappa)?)),
            SamplingRatios::PerCoordinate(_) => domain("auto-lstar needs a scalar ratio; use auto-lbar"),
        },
        ScaleRule::AutoLbar => Ok(Some(constants_for(ratios, n, kappa)?.l_star)),
        ScaleRule::Fixed(_) => Ok(None),
    }
}

/// Fitted proposed density together with the scale it used.
#[derive(Debug, Clone)]
pub struct ProposedFit {
    pub density: PredictiveDensity,
    pub scale: f64,
    pub multiplier: Option<f64>,
    pub sparsity: Option<SparsityEstimate>,
}

/// The predictive density under `Π[L·η̂, κ]`, or `Π[h, κ]` for a fixed `h`.
pub fn method_proposed(
    periods: &[CountVector],
    ratios: &SamplingRatios,
    kappa: f64,
    scale_rule: ScaleRule,
    sparsity: SparsityRule,
) -> Result<ProposedFit> {
    let Some(x) = periods.first() else {
        return domain("need at least one period of counts");
    };
    ratios.check_len(x.len())?;
    let multiplier = scale_multiplier(scale_rule, ratios, x.len(), kappa)?;
    let (scale, est) = match (scale_rule, multiplier) {
        (ScaleRule::Fixed(h), _) => (h, None),
        (_, Some(l)) => {
            let est = sparsity.estimate(periods)?;
            (l * est.eta_hat, Some(est))
        }
        (_, None) => unreachable!("automatic rules always produce a multiplier"),
    };
    let prior = SpikeSlabPrior::power(scale, kappa)?;
    Ok(ProposedFit {
        density: PredictiveDensity::fit(x, &prior, ratios)?,
        scale,
        multiplier,
        sparsity: est,
    })
}

/// Plug-in `Po(θ̂_i)` with the penalized maximum-likelihood estimate
/// `θ̂_i = x_i / (r_i (1 + λ))`.
pub fn method_l1_plugin(x: &CountVector, ratios: &SamplingRatios, lambda_reg: f64) -> Result<PoissonPlugin> {
    check_positive("lambda_reg", lambda_reg)?;
    ratios.check_len(x.len())?;
    PoissonPlugin::new(
        x.values()
            .iter()
            .enumerate()
            .map(|(i, &xi)| xi as f64 / (ratios.get(i) * (1.0 + lambda_reg)))
            .collect(),
    )
}

/// Negative-binomial predictive without the spike (`ω_i = 0`).
pub fn method_gamma_baseline(x: &CountVector, ratios: &SamplingRatios, kappa: f64) -> Result<PredictiveDensity> {
    PredictiveDensity::without_spike(x, kappa, ratios)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub l1_distance: f64,
    pub weighted_l1: f64,
    /// Log predictive likelihood of `y`; `-∞` when `y` has no mass.
    pub pll: f64,
    pub covered: bool,
}

/// `ℓ1` distances between predictive means and `y`, the log predictive
/// likelihood, and membership of `y` in the calibrated level-`α` set.
pub fn compute_metrics<P: CountPredictive + ?Sized>(
    pd: &P,
    y: &CountVector,
    ratios: &SamplingRatios,
    alpha: f64,
) -> Result<TrialMetrics> {
    check_len(pd.len(), y.len())?;
    ratios.check_len(y.len())?;
    let n = y.len();
    let mut l1 = 0.0;
    let mut weighted = 0.0;
    let mut r_sum = 0.0;
    for i in 0..n {
        let d = (pd.coord_mean(i) - y[i] as f64).abs();
        let r = ratios.get(i);
        l1 += d;
        weighted += r * d;
        r_sum += r;
    }
    let set = calibrate(pd, alpha)?;
    Ok(TrialMetrics {
        l1_distance: l1,
        weighted_l1: weighted / (r_sum / n as f64),
        pll: pd.joint_log_pmf(y)?,
        covered: set.contains(y)?,
    })
}

fn run_method(method: &MethodSpec, trial: &Trial, alpha: f64) -> Result<TrialMetrics> {
    match *method {
        MethodSpec::Proposed { kappa, scale, sparsity } => {
            let fit = method_proposed(std::slice::from_ref(&trial.x), &trial.ratios, kappa, scale, sparsity)?;
            compute_metrics(&fit.density, &trial.y, &trial.ratios, alpha)
        }
        MethodSpec::L1Plugin { lambda_reg } => {
            let pd = method_l1_plugin(&trial.x, &trial.ratios, lambda_reg)?;
            compute_metrics(&pd, &trial.y, &trial.ratios, alpha)
        }
        MethodSpec::GammaBaseline { kappa } => {
            let pd = method_gamma_baseline(&trial.x, &trial.ratios, kappa)?;
            compute_metrics(&pd, &trial.y, &trial.ratios, alpha)
        }
    }
}

/// Metrics for every trial (outer) and method (inner, in spec order).
pub fn run_trials(spec: &ScenarioSpec) -> Result<Vec<Vec<TrialMetrics>>> {
    spec.validate()?;
    (0..spec.trials as u64)
        .into_par_iter()
        .map(|t| {
            let trial = generate_trial(spec, t)?;
            spec.methods
                .iter()
                .map(|m| run_method(m, &trial, spec.alpha))
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// Mean and sample standard deviation; `sd` is `None` for fewer than two
/// values or an infinite mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: Option<f64>,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Self {
        let m = values.len() as f64;
        if values.iter().any(|v| *v == f64::NEG_INFINITY) {
            return MeanSd {
                mean: f64::NEG_INFINITY,
                sd: None,
            };
        }
        let mean = values.iter().sum::<f64>() / m;
        let sd = (values.len() >= 2)
            .then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt());
        MeanSd { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub l1: MeanSd,
    pub weighted_l1: MeanSd,
    pub pll: MeanSd,
    /// Trials whose log predictive likelihood is `-∞`.
    pub pll_neg_inf_trials: usize,
    /// Percentage of trials whose `y` lies in the joint set.
    pub coverage_pct: f64,
    pub trials: usize,
}

/// One `(method, metric, mean, sd)` row of the long-format table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub metric: String,
    pub mean: f64,
    pub sd: Option<f64>,
}

impl MethodSummary {
    pub fn rows(&self) -> Vec<SummaryRow> {
        let row = |metric: &str, v: MeanSd| SummaryRow {
            method: self.method.clone(),
            metric: metric.to_string(),
            mean: v.mean,
            sd: v.sd,
        };
        vec![
            row("l1", self.l1),
            row("weighted_l1", self.weighted_l1),
            row("pll", self.pll),
            SummaryRow {
                method: self.method.clone(),
                metric: "coverage_pct".to_string(),
                mean: self.coverage_pct,
                sd: None,
            },
        ]
    }
}

pub fn summarize(spec: &ScenarioSpec, metrics: &[Vec<TrialMetrics>]) -> Vec<MethodSummary> {
    spec.methods
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let col: Vec<TrialMetrics> = metrics.iter().map(|row| row[k]).collect();
            let pick = |f: fn(&TrialMetrics) -> f64| col.iter().map(f).collect::<Vec<f64>>();
            let covered = col.iter().filter(|t| t.covered).count();
            MethodSummary {
                method: m.label(),
                l1: MeanSd::of(&pick(|t| t.l1_distance)),
                weighted_l1: MeanSd::of(&pick(|t| t.weighted_l1)),
                pll: MeanSd::of(&pick(|t| t.pll)),
                pll_neg_inf_trials: col.iter().filter(|t| t.pll == f64::NEG_INFINITY).count(),
                coverage_pct: 100.0 * covered as f64 / col.len() as f64,
                trials: col.len(),
            }
        })
        .collect()
}

/// Runs every trial and aggregates per method.
pub fn run_table(spec: &ScenarioSpec) -> Result<Vec<MethodSummary>> {
    let metrics = run_trials(spec)?;
    Ok(summarize(spec, &metrics))
}
