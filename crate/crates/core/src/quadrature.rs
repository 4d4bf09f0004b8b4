//! Numerical integration: adaptive Gauss–Kronrod on finite intervals, the
//! half-line via variable maps, and fixed Gauss–Legendre rules.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances and effort limit for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            rel_tol: 1e-10,
            abs_tol: 1e-300,
            max_panels: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Panel> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    if !value.is_finite() || !error.is_finite() {
        return Err(Error::Integrability(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    Ok(Panel { a, b, value, error })
}

/// Adaptive 15-point Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// The panel with the largest error estimate is bisected until the summed
/// error meets `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadratureOptions) -> Result<Estimate> {
    let mut heap = BinaryHeap::new();
    let first = gk15(&f, a, b)?;
    let mut value = first.value;
    let mut error = first.error;
    heap.push(first);
    while error > opts.abs_tol.max(opts.rel_tol * value.abs()) {
        if heap.len() >= opts.max_panels {
            return Err(Error::Integrability(format!(
                "no convergence after {} panels (estimate {value:e}, error {error:e})",
                opts.max_panels
            )));
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::Integrability(format!(
                "panel [{}, {}] cannot be refined further",
                worst.a, worst.b
            )));
        }
        let left = gk15(&f, worst.a, mid)?;
        let right = gk15(&f, mid, worst.b)?;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        if heap.len() % 64 == 0 {
            // resum to keep rounding drift out of the running totals
            value = heap.iter().map(|p| p.value).sum();
            error = heap.iter().map(|p| p.error).sum();
        }
    }
    value = heap.iter().map(|p| p.value).sum();
    error = heap.iter().map(|p| p.error).sum();
    Ok(Estimate { value, error })
}

/// Integral of `f` over `(0, ∞)`.
///
/// The domain is split at 1. On `(0, 1]` the substitution `λ = e^{-v}`,
/// `v = u/(1-u)` flattens algebraic singularities at the origin; on
/// `(1, ∞)` the map `λ = 1 + u/(1-u)` compresses the tail.
pub fn integrate_half_line<F: Fn(f64) -> f64>(f: F, opts: QuadratureOptions) -> Result<Estimate> {
    let head = |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let one_minus = 1.0 - u;
        let v = u / one_minus;
        let lambda = (-v).exp();
        if lambda == 0.0 {
            return 0.0;
        }
        // a non-finite value here is a genuine singularity; let gk15 report it
        f(lambda) * lambda / (one_minus * one_minus)
    };
    let tail = |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let one_minus = 1.0 - u;
        let lambda = 1.0 + u / one_minus;
        if !lambda.is_finite() {
            return 0.0;
        }
        f(lambda) / (one_minus * one_minus)
    };
    // Each half gets the full relative tolerance; the sum inherits it.
    let a = integrate(head, 0.0, 1.0, opts)?;
    let b = integrate(tail, 0.0, 1.0, opts)?;
    Ok(Estimate {
        value: a.value + b.value,
        error: a.error + b.error,
    })
}

/// Integral of `f` over `(0, ∞)` when its mass concentrates around
/// `center > 0` with spread `width > 0`.
///
/// The bulk `[a, b] = [center ∓ 30·width]` (with `a ≥ center/2`) is
/// integrated directly; `(0, a)` uses `λ = a·e^{-v}` and `(b, ∞)` uses
/// `λ = b + width·u/(1-u)`.
pub fn integrate_half_line_around<F: Fn(f64) -> f64>(
    f: F,
    center: f64,
    width: f64,
    opts: QuadratureOptions,
) -> Result<Estimate> {
    if !(center > 0.0 && width > 0.0 && center.is_finite() && width.is_finite()) {
        return Err(Error::Domain(format!(
            "peak location {center} and width {width} must be positive"
        )));
    }
    let a = (center - 30.0 * width).max(0.5 * center);
    let b = center + 30.0 * width;
    let head = |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let one_minus = 1.0 - u;
        let lambda = a * (-u / one_minus).exp();
        if lambda == 0.0 {
            return 0.0;
        }
        f(lambda) * lambda / (one_minus * one_minus)
    };
    let tail = |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let one_minus = 1.0 - u;
        let lambda = b + width * u / one_minus;
        if !lambda.is_finite() {
            return 0.0;
        }
        f(lambda) * width / (one_minus * one_minus)
    };
    let pieces = [
        integrate(head, 0.0, 1.0, opts)?,
        integrate(&f, a, b, opts)?,
        integrate(tail, 0.0, 1.0, opts)?,
    ];
    Ok(Estimate {
        value: pieces.iter().map(|p| p.value).sum(),
        error: pieces.iter().map(|p| p.error).sum(),
    })
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `P_n(x)` and its derivative by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Fixed Gauss–Legendre quadrature of `f` over `[a, b]`.
pub fn gauss_legendre_integral<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    nodes
        .iter()
        .zip(&weights)
        .map(|(&x, &w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}
