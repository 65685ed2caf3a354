//! Closed-form width, error and constant formulas.

use std::f64::consts::{E, PI};
use std::sync::OnceLock;

use crate::assembler::taylor_constant;
use crate::combinatorics::{binomial, cardinality};
use crate::error::{ensure, Error, Result};

/// Hidden widths of the two-hidden-layer theorem network, with the
/// simplified one-dimensional widths for d = 1.
pub fn theorem_widths(d: usize, s: u32, n: usize) -> Result<(u128, u128)> {
    ensure!(d >= 1 && s >= 1 && n >= 1, "d, s and N must be positive");
    let half = s.div_ceil(2) as u128;
    if d == 1 {
        return Ok((3 * half + n as u128 - 1, 6 * n as u128));
    }
    general_widths(d, s, n)
}

/// The general-d width formulas, also evaluated at d = 1.
pub fn general_widths(d: usize, s: u32, n: usize) -> Result<(u128, u128)> {
    ensure!(d >= 1 && s >= 1 && n >= 1, "d, s and N must be positive");
    let half = s.div_ceil(2) as u128;
    let bank = 3 * half * cardinality(s - 1, d + 1)?;
    let w1 = bank + (d * (n - 1)) as u128;
    let cells = (n as u128)
        .checked_pow(d as u32)
        .ok_or_else(|| Error::Capacity("N^d overflows".into()))?;
    let w2 = 3 * (d as u128 + 2).div_ceil(2) * cardinality(d as u32 + 1, d + 1)? * cells;
    Ok((w1, w2))
}

/// Which polynomial approximation result the constant comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstantPath {
    /// Taylor polynomials of a C^s function; N_0 = 3d/2.
    Cs,
    /// Averaged Taylor polynomials of a W^{s,inf} function; N_0 = 5d^2.
    Wsinf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevConstant {
    pub c: f64,
    pub n0: f64,
}

pub fn sobolev_constant(d: usize, k: u32, s: u32, seminorm_s: f64, path: ConstantPath) -> Result<SobolevConstant> {
    ensure!(d >= 1, "dimension must be positive");
    ensure!(k < s, "k = {k} must be below s = {s}");
    ensure!(seminorm_s >= 0.0, "seminorm must be nonnegative");
    let df = d as f64;
    Ok(match path {
        ConstantPath::Cs => SobolevConstant { c: taylor_constant(d, k, s, seminorm_s), n0: 1.5 * df },
        ConstantPath::Wsinf => {
            let c = (0..=k)
                .map(|m| {
                    let fact: f64 = (1..s - m).map(f64::from).product();
                    PI.powf(0.25) * (s as f64).sqrt() * (5.0 * df * df).powi((s - m) as i32) / fact * seminorm_s
                })
                .fold(0.0, f64::max);
            SobolevConstant { c, n0: 5.0 * df * df }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzReport {
    pub bound: f64,
    pub w1: u128,
    pub w2: u128,
}

/// Sup-norm bound 7 d^2 L / N for an L-Lipschitz target, with widths.
pub fn lipschitz_bound(d: usize, l: f64, n: usize) -> Result<LipschitzReport> {
    ensure!(d >= 1, "dimension must be positive");
    ensure!(l > 0.0, "Lipschitz constant must be positive");
    let n0 = 5 * d * d;
    ensure!(n > n0, "N = {n} must exceed 5d^2 = {n0}");
    let df = d as f64;
    let (w1, w2) = if d == 1 {
        (n as u128 - 1, 6 * n as u128)
    } else {
        let cells = (n as u128).checked_pow(d as u32).ok_or_else(|| Error::Capacity("N^d overflows".into()))?;
        (
            (d * (n - 1)) as u128,
            3 * (d as u128 + 1).div_ceil(2) * cardinality(d as u32, d)? * cells,
        )
    };
    Ok(LipschitzReport { bound: 7.0 * df * df * l / n as f64, w1, w2 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticBounds {
    pub two_layer: f64,
    pub shallow: Option<f64>,
}

/// (1+delta) Q (3d/(2RN))^s and, when R > d/2, (1+delta) Q (d/(2R))^s.
pub fn analytic_bounds(d: usize, q: f64, r: f64, s: u32, n: usize, delta: f64) -> Result<AnalyticBounds> {
    ensure!(d >= 1, "dimension must be positive");
    ensure!(q > 0.0 && r > 0.0, "Q and R must be positive");
    let df = d as f64;
    ensure!(n as f64 > 1.5 * df, "N = {n} must exceed 3d/2");
    let two_layer = (1.0 + delta) * q * (1.5 * df / (r * n as f64)).powi(s as i32);
    let shallow = (r > df / 2.0).then(|| (1.0 + delta) * q * (df / (2.0 * r)).powi(s as i32));
    Ok(AnalyticBounds { two_layer, shallow })
}

/// Exponent parameter of the exponential-rate statement held fixed in reports.
pub const RATE_GAMMA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpRateReport {
    pub bound: f64,
    pub alpha: f64,
    pub gamma: f64,
    /// s = k + alpha (1-gamma)^{-1} (d+1) calN^{1/(d+1)}.
    pub s: f64,
    /// N = (3d/(2R)) calN^{1/(d+1)}.
    pub n: f64,
    /// True when the unspecified constant was replaced by 1.
    pub shape_only: bool,
}

/// Exponential-rate bound in terms of the single size parameter calN.
pub fn exp_rate_bound(d: usize, k: u32, q: f64, r: f64, alpha: f64, delta: f64, cal_n: f64) -> Result<ExpRateReport> {
    ensure!(cal_n >= 1.0, "calN must be at least 1");
    ensure!(d >= 1 && alpha > 0.0 && r > 0.0, "d, alpha and R must be positive");
    let df = d as f64;
    let root = cal_n.powf(1.0 / (df + 1.0));
    let decay = (-alpha * root * cal_n.ln()).exp();
    let (bound, shape_only) = if k == 0 {
        ((1.0 + delta) * q * decay, false)
    } else {
        (cal_n.powf(k as f64 / (df + 1.0)) * decay, true)
    };
    Ok(ExpRateReport {
        bound,
        alpha,
        gamma: RATE_GAMMA,
        s: k as f64 + alpha / (1.0 - RATE_GAMMA) * (df + 1.0) * root,
        n: 1.5 * df / r * root,
        shape_only,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntireWidth {
    pub width: u128,
    pub bound: f64,
}

/// Shallow width reaching exp(-calN) for |f|_{W^{s,inf}} <= C^s.
pub fn entire_function_width(d: usize, c: f64, cal_n: u64) -> Result<EntireWidth> {
    ensure!(d >= 1 && c > 0.0, "d and C must be positive");
    let bound = (-(cal_n as f64)).exp();
    if d == 1 {
        return Ok(EntireWidth { width: 3 * cal_n.div_ceil(2) as u128, bound });
    }
    let shift = (5.0 * c * d as f64).ceil() as u64;
    let top = cal_n + shift;
    let width = 3 * top.div_ceil(2) as u128 * binomial(top + d as u64, top)?;
    Ok(EntireWidth { width, bound })
}

/// One row of the minimal-width table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WidthRow {
    pub a: f64,
    pub tolerance: f64,
    pub s: u32,
    pub n: usize,
    pub width: usize,
    pub variant: WidthVariant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WidthVariant {
    TwoLayer,
    Shallow,
}

impl WidthVariant {
    pub fn name(self) -> &'static str {
        match self {
            WidthVariant::TwoLayer => "two_layer",
            WidthVariant::Shallow => "shallow",
        }
    }
}

pub const SEARCH_MAX_S: u32 = 200;
pub const SEARCH_MAX_N: usize = 10_000;

fn ln_factorial(s: u32) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let t = TABLE.get_or_init(|| {
        let mut acc = 0.0;
        let mut out = vec![0.0];
        for v in 1..=SEARCH_MAX_S {
            acc += (v as f64).ln();
            out.push(acc);
        }
        out
    });
    match t.get(s as usize) {
        Some(v) => *v,
        None => (1..=s).map(|v| (v as f64).ln()).sum(),
    }
}

/// (3a/(2N))^s / s! < eps, evaluated in logarithms. N = 1 is the shallow
/// variant (a/2)^s / s! < eps.
pub fn width_feasible(a: f64, s: u32, n: usize, eps: f64) -> bool {
    let base = if n == 1 { a / 2.0 } else { 1.5 * a / n as f64 };
    s as f64 * base.ln() - ln_factorial(s) < eps.ln()
}

pub fn two_layer_width(s: u32, n: usize) -> usize {
    (3 * s.div_ceil(2) as usize + n - 1).max(6 * n)
}

pub fn shallow_layer_width(s: u32) -> usize {
    3 * s.div_ceil(2) as usize
}

fn better(cand: (usize, u32, usize), best: Option<(usize, u32, usize)>) -> bool {
    best.is_none_or(|b| cand < b)
}

/// Minimal widths meeting each tolerance: the two-hidden-layer family over
/// (s, N >= 2) and the shallow family over s. Ties go to smaller s, then N.
pub fn min_width_search(a: f64, targets: &[f64]) -> Result<Vec<WidthRow>> {
    ensure!(a > 0.0 && a.is_finite(), "frequency must be positive");
    let mut rows = Vec::new();
    for &eps in targets {
        ensure!(eps > 0.0, "tolerances must be positive");
        let mut best: Option<(usize, u32, usize)> = None;
        for s in 1..=SEARCH_MAX_S {
            // The predicate is monotone in N: bisect for the smallest feasible N.
            if !width_feasible(a, s, SEARCH_MAX_N, eps) {
                continue;
            }
            let (mut lo, mut hi) = (2usize, SEARCH_MAX_N);
            while lo < hi {
                let mid = (lo + hi) / 2;
                if width_feasible(a, s, mid, eps) {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            let cand = (two_layer_width(s, lo), s, lo);
            if better(cand, best) {
                best = Some(cand);
            }
        }
        let (width, s, n) = best.ok_or_else(|| {
            Error::Contract(format!("no (s, N) within s <= {SEARCH_MAX_S}, N <= {SEARCH_MAX_N} reaches {eps:e} for a = {a}"))
        })?;
        rows.push(WidthRow { a, tolerance: eps, s, n, width, variant: WidthVariant::TwoLayer });
        if let Some(s) = (1..=SEARCH_MAX_S).find(|&s| width_feasible(a, s, 1, eps)) {
            rows.push(WidthRow { a, tolerance: eps, s, n: 1, width: shallow_layer_width(s), variant: WidthVariant::Shallow });
        }
    }
    Ok(rows)
}

/// Faa di Bruno composition bound 16 (e^2 n^4 m d^2)^n |g| max_i |f_i|^n.
pub fn faadibruno_bound(n: u32, m: usize, d: usize, g_norm: f64, f_norms: &[f64]) -> Result<f64> {
    ensure!(g_norm >= 0.0 && f_norms.iter().all(|&v| v >= 0.0), "norms must be nonnegative");
    let nf = n as f64;
    let fmax = f_norms.iter().cloned().fold(0.0, f64::max);
    Ok(16.0 * (E * E * nf.powi(4) * m as f64 * (d * d) as f64).powf(nf) * g_norm * fmax.powf(nf))
}
