//! Tanh networks: representation, evaluation, combination.

mod document;
mod jet;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub use document::{from_document, to_document, NetworkDocument};
pub use jet::{JetLayout, JetValue, JET_DIM_CAP, JET_ORDER_CAP};

use crate::error::{ensure, Error, Result};
use crate::scalar::{Hp, Real};

/// One affine map `x -> W x + b` with `W` stored row-major (rows x cols).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T = f64> {
    pub rows: usize,
    pub cols: usize,
    pub w: Vec<T>,
    pub b: Vec<T>,
}

impl<T: Real> Layer<T> {
    pub fn new(rows: usize, cols: usize, w: Vec<T>, b: Vec<T>) -> Result<Self> {
        ensure!(
            w.len() == rows * cols && b.len() == rows,
            "layer shape {rows}x{cols} does not match {} weights and {} biases",
            w.len(),
            b.len()
        );
        ensure!(
            w.iter().chain(&b).all(|v| v.to_f64().is_finite()),
            "layer weights must be finite"
        );
        Ok(Self { rows, cols, w, b })
    }

    pub fn zeros(rows: usize, cols: usize, like: &T) -> Self {
        Self {
            rows,
            cols,
            w: vec![T::lift(0.0, like); rows * cols],
            b: vec![T::lift(0.0, like); rows],
        }
    }

    pub fn at(&self, i: usize, j: usize) -> &T {
        &self.w[i * self.cols + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut T {
        &mut self.w[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.w[i * self.cols..(i + 1) * self.cols]
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        (0..self.rows)
            .map(|i| {
                let mut acc = self.b[i].clone();
                for (w, xj) in self.row(i).iter().zip(x) {
                    if !w.is_zero() {
                        acc.add_mul(w, xj);
                    }
                }
                acc
            })
            .collect()
    }

    /// `self ∘ inner` as a single affine map.
    pub fn after(&self, inner: &Layer<T>) -> Layer<T> {
        let like = self.b.first().or(inner.b.first()).cloned().unwrap_or_else(T::zero);
        let mut out = Layer::zeros(self.rows, inner.cols, &like);
        for i in 0..self.rows {
            let mut bias = self.b[i].clone();
            for m in 0..self.cols {
                let a = self.at(i, m);
                if a.is_zero() {
                    continue;
                }
                bias.add_mul(a, &inner.b[m]);
                for j in 0..inner.cols {
                    let c = inner.at(m, j);
                    if !c.is_zero() {
                        out.w[i * inner.cols + j].add_mul(a, c);
                    }
                }
            }
            out.b[i] = bias;
        }
        out
    }

    pub fn map<U: Real>(&self, f: impl Fn(&T) -> U) -> Layer<U> {
        Layer {
            rows: self.rows,
            cols: self.cols,
            w: self.w.iter().map(&f).collect(),
            b: self.b.iter().map(&f).collect(),
        }
    }
}

/// Provenance recorded with a network.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NetMeta {
    pub builder: String,
    #[serde(default)]
    pub parameters: Map<String, Value>,
    #[serde(default)]
    pub tolerances: Map<String, Value>,
}

impl NetMeta {
    pub fn new(builder: impl Into<String>) -> Self {
        Self { builder: builder.into(), ..Default::default() }
    }
    pub fn param(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.parameters.insert(key.into(), v.into());
        self
    }
    pub fn tol(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.tolerances.insert(key.into(), v.into());
        self
    }
}

/// Feed-forward tanh network; tanh follows every layer except the last.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T = f64> {
    layers: Vec<Layer<T>>,
    pub meta: NetMeta,
}

pub type TanhNetwork = Network<f64>;
pub type HpNetwork = Network<Hp>;

impl<T: Real> Network<T> {
    pub fn new(layers: Vec<Layer<T>>, meta: NetMeta) -> Result<Self> {
        ensure!(!layers.is_empty(), "a network needs at least one affine layer");
        for (i, pair) in layers.windows(2).enumerate() {
            ensure!(
                pair[1].cols == pair[0].rows,
                "layer {} expects {} inputs but layer {} produces {}",
                i + 1,
                pair[1].cols,
                i,
                pair[0].rows
            );
        }
        for l in &layers {
            ensure!(
                l.w.len() == l.rows * l.cols && l.b.len() == l.rows,
                "inconsistent layer storage"
            );
            ensure!(
                l.w.iter().chain(&l.b).all(|v| v.to_f64().is_finite()),
                "network weights must be finite"
            );
        }
        Ok(Self { layers, meta })
    }

    /// Single affine map `W x + b` (depth 1).
    pub fn affine(rows: usize, cols: usize, w: Vec<T>, b: Vec<T>) -> Result<Self> {
        Self::new(vec![Layer::new(rows, cols, w, b)?], NetMeta::new("affine"))
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn into_layers(self) -> Vec<Layer<T>> {
        self.layers
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].cols];
        d.extend(self.layers.iter().map(|l| l.rows));
        d
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.rows).unwrap_or(0)
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(|l| l.rows).collect()
    }

    /// A value at the network's precision, used to lift inputs.
    pub fn template(&self) -> T {
        self.layers[0].b.first().cloned().unwrap_or_else(T::zero)
    }

    pub fn lift_point(&self, x: &[f64]) -> Vec<T> {
        let t = self.template();
        x.iter().map(|&v| T::lift(v, &t)).collect()
    }

    pub fn evaluate(&self, x: &[T]) -> Result<Vec<T>> {
        ensure!(
            x.len() == self.input_dim(),
            "input has dimension {} but the network expects {}",
            x.len(),
            self.input_dim()
        );
        let last = self.layers.len() - 1;
        let mut a = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            a = layer.apply(&a);
            if i < last {
                a.iter_mut().for_each(|v| v.tanh_mut());
            }
        }
        Ok(a)
    }

    /// Evaluates at an f64 point, computing at the network's precision.
    pub fn evaluate_f64(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate(&self.lift_point(x))?.iter().map(|v| v.to_f64()).collect())
    }

    pub fn evaluate_jet(&self, x: &[f64], k: u32) -> Result<Vec<JetValue<T>>> {
        let layout = JetLayout::new(self.input_dim(), k)?;
        self.evaluate_jet_with(&layout, x)
    }

    pub fn evaluate_jet_with(&self, layout: &JetLayout, x: &[f64]) -> Result<Vec<JetValue<T>>> {
        ensure!(
            x.len() == self.input_dim() && layout.dim() == self.input_dim(),
            "jet input has dimension {} but the network expects {}",
            x.len(),
            self.input_dim()
        );
        let t = self.template();
        let mut a: Vec<JetValue<T>> =
            x.iter().enumerate().map(|(i, &v)| layout.variable(i, T::lift(v, &t))).collect();
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let mut next = Vec::with_capacity(layer.rows);
            for i in 0..layer.rows {
                let mut acc = layout.constant(layer.b[i].clone());
                for (w, aj) in layer.row(i).iter().zip(&a) {
                    if !w.is_zero() {
                        acc.add_scaled(w, aj);
                    }
                }
                if li < last {
                    acc = layout.tanh(&acc)?;
                }
                next.push(acc);
            }
            a = next;
        }
        Ok(a)
    }

    /// Block-diagonal combination: inputs and outputs are concatenated.
    pub fn parallelize(&self, other: &Network<T>) -> Result<Network<T>> {
        ensure!(
            self.depth() == other.depth(),
            "parallelization needs equal depth, got {} and {}",
            self.depth(),
            other.depth()
        );
        let t = self.template();
        let layers = self
            .layers
            .iter()
            .zip(&other.layers)
            .map(|(a, b)| block_diag(a, b, &t))
            .collect();
        Network::new(layers, NetMeta::new(format!("parallel({},{})", self.meta.builder, other.meta.builder)))
    }

    /// Shared-input combination: outputs are concatenated.
    pub fn stack(&self, other: &Network<T>) -> Result<Network<T>> {
        ensure!(
            self.input_dim() == other.input_dim(),
            "stacked networks need the same input dimension"
        );
        let mut net = self.parallelize(other)?;
        let first = &mut net.layers[0];
        let (n, m) = (self.input_dim(), first.rows);
        let mut merged = Layer::zeros(m, n, &self.template());
        for i in 0..m {
            for j in 0..n {
                let v = if i < self.layers[0].rows {
                    self.layers[0].at(i, j).clone()
                } else {
                    other.layers[0].at(i - self.layers[0].rows, j).clone()
                };
                *merged.at_mut(i, j) = v;
            }
        }
        merged.b = first.b.clone();
        *first = merged;
        net.meta = NetMeta::new(format!("stack({},{})", self.meta.builder, other.meta.builder));
        Ok(net)
    }

    /// `outer ∘ self`, merging the junction affine maps.
    pub fn compose(&self, outer: &Network<T>) -> Result<Network<T>> {
        ensure!(
            self.output_dim() == outer.input_dim(),
            "composition mismatch: inner output {} vs outer input {}",
            self.output_dim(),
            outer.input_dim()
        );
        let mut layers: Vec<Layer<T>> = self.layers[..self.depth() - 1].to_vec();
        layers.push(outer.layers[0].after(self.layers.last().expect("depth >= 1")));
        layers.extend(outer.layers[1..].iter().cloned());
        Network::new(layers, NetMeta::new(format!("compose({},{})", self.meta.builder, outer.meta.builder)))
    }

    /// Applies the affine map `y -> A y + c` to the output.
    pub fn map_output(&self, rows: usize, a: Vec<T>, c: Vec<T>) -> Result<Network<T>> {
        let post = Layer::new(rows, self.output_dim(), a, c)?;
        let mut layers = self.layers.clone();
        let last = layers.pop().expect("depth >= 1");
        layers.push(post.after(&last));
        Network::new(layers, self.meta.clone())
    }

    /// Keeps only the listed outputs, in the given order.
    pub fn select_outputs(&self, idx: &[usize]) -> Result<Network<T>> {
        ensure!(
            idx.iter().all(|&i| i < self.output_dim()),
            "output index out of range"
        );
        let last = self.layers.last().expect("depth >= 1");
        let mut w = Vec::with_capacity(idx.len() * last.cols);
        for &i in idx {
            w.extend_from_slice(last.row(i));
        }
        let b = idx.iter().map(|&i| last.b[i].clone()).collect();
        let mut layers = self.layers.clone();
        *layers.last_mut().expect("depth >= 1") = Layer::new(idx.len(), last.cols, w, b)?;
        Network::new(layers, self.meta.clone())
    }

    /// Fraction of weights and biases that are nonzero.
    pub fn sparsity(&self) -> f64 {
        let (mut nz, mut total) = (0usize, 0usize);
        for l in &self.layers {
            for v in l.w.iter().chain(&l.b) {
                total += 1;
                if !v.is_zero() {
                    nz += 1;
                }
            }
        }
        if total == 0 {
            0.0
        } else {
            nz as f64 / total as f64
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn max_abs_weight(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(&l.b))
            .map(|v| v.to_f64().abs())
            .fold(0.0, f64::max)
    }

    pub fn map_scalar<U: Real>(&self, f: impl Fn(&T) -> U) -> Network<U> {
        Network { layers: self.layers.iter().map(|l| l.map(&f)).collect(), meta: self.meta.clone() }
    }

    pub fn to_f64(&self) -> TanhNetwork {
        self.map_scalar(|v| v.to_f64())
    }

    /// Precision in bits of the stored weights.
    pub fn bits(&self) -> u32 {
        self.template().bits()
    }

    /// Bound on the output error per unit roundoff, for inputs bounded by
    /// `input_bound`: propagates magnitude bounds forward, charging each
    /// layer's rounding at the size of its partial sums.
    pub fn rounding_amplification(&self, input_bound: f64) -> f64 {
        let mut a = vec![input_bound.abs(); self.input_dim()];
        let mut g = a.clone();
        let last = self.layers.len() - 1;
        for (li, l) in self.layers.iter().enumerate() {
            let mut na = Vec::with_capacity(l.rows);
            let mut ng = Vec::with_capacity(l.rows);
            for i in 0..l.rows {
                let mut z = l.b[i].to_f64().abs();
                let mut e = 0.0;
                for (w, (aj, gj)) in l.row(i).iter().zip(a.iter().zip(&g)) {
                    let w = w.to_f64().abs();
                    z += w * aj;
                    e += w * gj;
                }
                let cost = e + 2.0 * z;
                if li < last {
                    na.push(z.min(1.0));
                    ng.push(cost + 1.0);
                } else {
                    na.push(z);
                    ng.push(cost);
                }
            }
            a = na;
            g = ng;
        }
        g.into_iter().fold(0.0, f64::max)
    }
}

impl TanhNetwork {
    /// High-precision copy; f64 weights are exact at any precision.
    pub fn to_hp(&self, bits: u32) -> HpNetwork {
        self.map_scalar(|v| Hp::with_bits(*v, bits))
    }
}

fn block_diag<T: Real>(a: &Layer<T>, b: &Layer<T>, like: &T) -> Layer<T> {
    let mut out = Layer::zeros(a.rows + b.rows, a.cols + b.cols, like);
    for i in 0..a.rows {
        for j in 0..a.cols {
            *out.at_mut(i, j) = a.at(i, j).clone();
        }
        out.b[i] = a.b[i].clone();
    }
    for i in 0..b.rows {
        for j in 0..b.cols {
            *out.at_mut(a.rows + i, a.cols + j) = b.at(i, j).clone();
        }
        out.b[a.rows + i] = b.b[i].clone();
    }
    out
}

/// Bits needed so that the rounding floor of `probe` stays below
/// `tolerance / 1024`, never less than `floor_bits`.
pub fn required_bits(probe: &TanhNetwork, input_bound: f64, tolerance: f64, floor_bits: u32) -> u32 {
    let g = probe.rounding_amplification(input_bound).max(1.0);
    let need = (g / tolerance).log2() + 10.0 + 8.0;
    (need.ceil().max(0.0) as u32).max(floor_bits)
}

/// Builds with `construct` at a precision sufficient for `tolerance`, judged
/// from the rounding amplification of the f64 `probe` built the same way.
pub fn build_at_precision<T: Real>(
    probe: impl FnOnce() -> Result<TanhNetwork>,
    input_bound: f64,
    tolerance: f64,
    construct: impl FnOnce() -> Result<Network<T>>,
) -> Result<Network<T>> {
    if !T::MULTIPRECISION {
        return construct();
    }
    let probe = probe()?;
    let bits = required_bits(&probe, input_bound, tolerance, crate::scalar::working_bits());
    crate::scalar::with_bits(bits, construct)
}

pub(crate) fn parse_error(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse { path: path.into(), message: message.into() }
}

#[cfg(test)]
mod tests;
