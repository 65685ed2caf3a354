//! Empirical Sobolev-error measurement, convergence-rate fitting and the
//! property ledger.

use std::fmt::Write as _;

use rayon::prelude::*;
use rug::ops::Pow;
use rug::Float;
use serde_json::Value;

use crate::assembler::TargetFunction;
use crate::error::{ensure, Error, Result};
use crate::netgraph::{JetLayout, NetMeta, Network};
use crate::scalar::Real;

mod suite;
pub use suite::{lemma_suite, lemma_suite_with, Fault, Ledger, LedgerRow};

/// Total point budget of the default grids (per-axis count is its d-th root).
pub const DEFAULT_POINTS: usize = 10_000;

/// Tensor-product sample grid described by one sorted axis per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: Vec<Vec<f64>>,
    label: String,
}

fn clustered_axis(per_axis: usize, lo: f64, hi: f64) -> Vec<f64> {
    // Half the points uniform in the interior, half Chebyshev-Lobatto so the
    // ends of the interval are sampled densely.
    let cheb = per_axis / 2;
    let uni = per_axis - cheb;
    let mut axis: Vec<f64> = (0..uni).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / uni as f64).collect();
    if cheb == 1 {
        axis.push(lo);
    } else {
        axis.extend((0..cheb).map(|i| {
            let t = 0.5 - 0.5 * (std::f64::consts::PI * i as f64 / (cheb - 1) as f64).cos();
            lo + (hi - lo) * t
        }));
    }
    axis.sort_by(f64::total_cmp);
    axis
}

impl Grid {
    pub fn from_axes(axes: Vec<Vec<f64>>, label: impl Into<String>) -> Result<Self> {
        ensure!(!axes.is_empty(), "a grid needs at least one axis");
        for a in &axes {
            ensure!(!a.is_empty(), "grid axes must be nonempty");
            ensure!(a.iter().all(|v| v.is_finite()), "grid coordinates must be finite");
        }
        let mut axes = axes;
        axes.iter_mut().for_each(|a| a.sort_by(f64::total_cmp));
        Ok(Self { axes, label: label.into() })
    }

    /// `per_axis` equispaced points on [lo, hi] in each of `d` coordinates.
    pub fn uniform(d: usize, per_axis: usize, lo: f64, hi: f64) -> Result<Self> {
        ensure!(d >= 1, "grid dimension must be positive");
        ensure!(per_axis >= 2, "need at least two points per axis");
        ensure!(lo < hi, "empty interval [{lo}, {hi}]");
        let axis: Vec<f64> = (0..per_axis).map(|i| lo + (hi - lo) * i as f64 / (per_axis - 1) as f64).collect();
        Self::from_axes(vec![axis; d], format!("uniform({per_axis}^{d} on [{lo},{hi}])"))
    }

    /// Roughly `points` samples of [0,1]^d, clustered towards the faces.
    pub fn clustered(d: usize, points: usize) -> Result<Self> {
        ensure!(d >= 1, "grid dimension must be positive");
        ensure!(points >= 2, "need at least two points");
        let per = ((points as f64).powf(1.0 / d as f64).round() as usize).max(2);
        Self::from_axes(vec![clustered_axis(per, 0.0, 1.0); d], format!("clustered({per}^{d})"))
    }

    /// 10^4 points for d = 1, 100^2 for d = 2, 30^3 for d = 3, 10^4 for d = 4.
    pub fn default_for(d: usize) -> Result<Self> {
        Self::clustered(d, if d == 3 { 27_000 } else { DEFAULT_POINTS })
    }

    /// Adds j/N and j/N +- 1e-3/N for j = 0..=N on every axis, clipped to [0,1].
    pub fn with_cell_boundaries(mut self, n: usize) -> Result<Self> {
        ensure!(n >= 1, "cell count must be positive");
        let off = 1e-3 / n as f64;
        for axis in &mut self.axes {
            for j in 0..=n {
                let t = j as f64 / n as f64;
                for v in [t - off, t, t + off] {
                    if (0.0..=1.0).contains(&v) {
                        axis.push(v);
                    }
                }
            }
            axis.sort_by(f64::total_cmp);
        }
        self.label = format!("{}+cells({n})", self.label);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    /// Point number `i` in row-major order over the axes.
    pub fn point(&self, mut i: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.axes.len()];
        for (slot, axis) in x.iter_mut().zip(&self.axes).rev() {
            *slot = axis[i % axis.len()];
            i /= axis.len();
        }
        x
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }
}

/// Anything whose partial derivatives can be sampled at a point.
pub trait Approximant: Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    /// "double" or "high:BITS".
    fn precision(&self) -> String;
    /// D^beta of output `output` for every beta of `layout`, in layout order.
    fn partials(&self, layout: &JetLayout, output: usize, x: &[f64]) -> Result<Vec<f64>>;
}

impl<T: Real> Approximant for Network<T> {
    fn input_dim(&self) -> usize {
        Network::input_dim(self)
    }

    fn output_dim(&self) -> usize {
        Network::output_dim(self)
    }

    fn precision(&self) -> String {
        if T::MULTIPRECISION {
            format!("high:{}", self.bits())
        } else {
            "double".into()
        }
    }

    fn partials(&self, layout: &JetLayout, output: usize, x: &[f64]) -> Result<Vec<f64>> {
        ensure!(output < Network::output_dim(self), "output {output} out of range");
        if layout.order() == 0 {
            let v = self.evaluate(&self.lift_point(x))?;
            return Ok(vec![v[output].to_f64()]);
        }
        let jets = self.evaluate_jet_with(layout, x)?;
        Ok(jets[output].partials().into_iter().map(|(_, v)| v.to_f64()).collect())
    }
}

/// The target itself viewed as an approximant; its error is exactly zero.
pub struct ExactCopy<'a>(pub &'a dyn TargetFunction);

impl Approximant for ExactCopy<'_> {
    fn input_dim(&self) -> usize {
        self.0.dim()
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn precision(&self) -> String {
        "oracle".into()
    }

    fn partials(&self, layout: &JetLayout, output: usize, x: &[f64]) -> Result<Vec<f64>> {
        ensure!(output == 0, "an exact copy has a single output");
        Ok(layout.index().members().iter().map(|b| self.0.partial(b, x)).collect())
    }
}

/// Measured W^{k,inf} error of one approximant output against a target.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub k: u32,
    pub grid: String,
    pub points: usize,
    /// seminorms[m] = max over the grid and |beta| = m of |D^beta (f - fhat)|.
    pub seminorms: Vec<f64>,
    pub guaranteed: Option<f64>,
    pub precision: String,
    pub cancellation_floor: Option<f64>,
    pub warning: Option<String>,
}

impl ErrorReport {
    /// W^{k,inf} error, the max over the per-order seminorms.
    pub fn empirical(&self) -> f64 {
        self.seminorms.iter().cloned().fold(0.0, f64::max)
    }

    /// guaranteed / empirical (infinite when the measured error is zero).
    pub fn slack(&self) -> Option<f64> {
        self.guaranteed.map(|g| if self.empirical() == 0.0 { f64::INFINITY } else { g / self.empirical() })
    }

    pub fn within_bound(&self) -> bool {
        self.guaranteed.is_none_or(|g| self.empirical() <= g)
    }

    /// Bound exceeded by a build that carried no cancellation warning.
    pub fn hard_failure(&self) -> bool {
        !self.within_bound() && self.warning.is_none()
    }

    pub fn with_guaranteed(mut self, g: f64) -> Self {
        self.guaranteed = Some(g);
        self
    }

    /// Reads `guaranteed`, `cancellation_floor` and `warning` from build metadata.
    pub fn with_meta(mut self, meta: &NetMeta) -> Self {
        let tol = &meta.tolerances;
        if let Some(g) = tol.get("guaranteed").and_then(Value::as_f64) {
            self.guaranteed = Some(g);
        }
        if let Some(c) = tol.get("cancellation_floor").and_then(Value::as_f64) {
            self.cancellation_floor = Some(c);
        }
        if let Some(w) = meta_warning(meta) {
            self.warning = Some(w);
        }
        self
    }

    fn fields(&self) -> Vec<(String, String)> {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        let mut out = vec![
            ("k".to_string(), self.k.to_string()),
            ("grid".into(), self.grid.clone()),
            ("points".into(), self.points.to_string()),
        ];
        for (m, v) in self.seminorms.iter().enumerate() {
            out.push((format!("seminorm_{m}"), format!("{v:e}")));
        }
        out.extend([
            ("empirical".into(), format!("{:e}", self.empirical())),
            ("guaranteed".into(), opt(self.guaranteed)),
            ("slack".into(), opt(self.slack())),
            ("precision".into(), self.precision.clone()),
            ("cancellation_floor".into(), opt(self.cancellation_floor)),
            ("warning".into(), self.warning.clone().unwrap_or_default()),
            ("within_bound".into(), self.within_bound().to_string()),
        ]);
        out
    }

    /// Two-column `quantity,value` CSV.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["quantity", "value"]).map_err(csv_error)?;
        for (key, v) in self.fields() {
            w.write_record([key, v]).map_err(csv_error)?;
        }
        into_string(w)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (key, v) in self.fields() {
            let _ = writeln!(s, "{key}: {v}");
        }
        s
    }
}

/// Cancellation warning recorded by a builder, as text.
pub fn meta_warning(meta: &NetMeta) -> Option<String> {
    match meta.tolerances.get("warning") {
        Some(Value::Bool(true)) => Some("build reported a precision warning".into()),
        Some(Value::String(s)) if !s.is_empty() => Some(s.clone()),
        _ => None,
    }
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub(crate) fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(std::io::Error::other(e)))
}

/// W^{k,inf} error of output 0 of `net` against `f` on `grid`.
pub fn sobolev_error(net: &dyn Approximant, f: &dyn TargetFunction, k: u32, grid: &Grid) -> Result<ErrorReport> {
    sobolev_error_at(net, 0, f, k, grid)
}

pub fn sobolev_error_at(
    net: &dyn Approximant,
    output: usize,
    f: &dyn TargetFunction,
    k: u32,
    grid: &Grid,
) -> Result<ErrorReport> {
    let d = f.dim();
    ensure!(net.input_dim() == d, "approximant has {} inputs but the target has {d}", net.input_dim());
    ensure!(grid.dim() == d, "grid has dimension {} but the target has {d}", grid.dim());
    ensure!(output < net.output_dim(), "output {output} out of range");
    // k = 0 is a plain value scan, so the jet dimension cap does not apply.
    let layout = if k == 0 { JetLayout::with_caps(d, 0, d, 0)? } else { JetLayout::new(d, k)? };
    let orders: Vec<usize> = layout.index().members().iter().map(|b| b.iter().sum::<u32>() as usize).collect();
    let seminorms = (0..grid.len())
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let x = grid.point(i);
            let got = net.partials(&layout, output, &x)?;
            let mut worst = vec![0.0f64; k as usize + 1];
            for ((beta, g), &m) in layout.index().members().iter().zip(&got).zip(&orders) {
                let diff = (f.partial(beta, &x) - g).abs();
                worst[m] = worst[m].max(if diff.is_nan() { f64::INFINITY } else { diff });
            }
            Ok(worst)
        })
        .try_reduce(
            || vec![0.0; k as usize + 1],
            |a, b| Ok(a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect()),
        )?;
    Ok(ErrorReport {
        k,
        grid: grid.label().to_string(),
        points: grid.len(),
        seminorms,
        guaranteed: None,
        precision: net.precision(),
        cancellation_floor: None,
        warning: None,
    })
}

/// Least-squares fit of log(error) against log(N).
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Slopes between consecutive points (sorted by N).
    pub local_slopes: Vec<f64>,
    /// Local slopes spread by more than a quarter of the fitted slope, which
    /// algebraic decay c N^-r would not do.
    pub non_algebraic: bool,
}

pub fn rate_fit(points: &[(f64, f64)]) -> Result<RateFit> {
    ensure!(points.len() >= 3, "rate fit needs at least 3 points, got {}", points.len());
    for &(n, e) in points {
        ensure!(n > 0.0 && n.is_finite(), "N must be positive, got {n}");
        ensure!(e > 0.0 && e.is_finite(), "errors must be positive, got {e}");
    }
    let mut pts: Vec<(f64, f64)> = points.iter().map(|&(n, e)| (n.ln(), e.ln())).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    ensure!(pts.windows(2).all(|w| w[1].0 > w[0].0), "N values must be distinct");
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let local_slopes: Vec<f64> = pts.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
    let lo = local_slopes.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = local_slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let non_algebraic = hi - lo > 0.25 * slope.abs().max(1e-12);
    Ok(RateFit { slope, intercept: my - slope * mx, local_slopes, non_algebraic })
}

/// Bits used by the finite-difference oracle for tanh derivatives.
pub const FD_ORACLE_BITS: u32 = 640;

/// m-th derivative of tanh at x by a central difference of tanh itself,
/// carried out in high precision with step 1e-15 so cancellation is harmless.
pub fn fd_tanh_derivative(m: u32, x: f64) -> f64 {
    let bits = FD_ORACLE_BITS;
    let h = Float::with_val(bits, 1e-15);
    let mut acc = Float::with_val(bits, 0);
    let mut binom = Float::with_val(bits, 1);
    for i in 0..=m {
        // node (m/2 - i) h
        let offset = Float::with_val(bits, m as f64 / 2.0 - i as f64) * &h;
        let t = (Float::with_val(bits, x) + offset).tanh();
        let term = Float::with_val(bits, &binom * &t);
        if i % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
        binom *= m - i;
        binom /= i + 1;
    }
    let hm = Float::with_val(bits, (&h).pow(m));
    (acc / hm).to_f64()
}

#[cfg(test)]
mod tests;
