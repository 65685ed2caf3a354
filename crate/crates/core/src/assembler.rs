//! Two-hidden-layer networks for smooth targets on [0,1]^d: local Taylor
//! polynomials times approximate partition weights, with approximate
//! products.

use std::f64::consts::E;

use serde_json::json;

use crate::combinatorics::{binomial, cardinality, enumerate, index_factorial, MultiIndex};
use crate::error::{ensure, Error, Result};
use crate::monomial::{build_all_monomials, build_monomials_with_constant};
use crate::netgraph::{required_bits, Layer, NetMeta, Network};
use crate::partition::PartitionSpec;
use crate::product::{build_pairwise_product, build_product_shallow};
use crate::scalar::Real;
use crate::tanh_calculus::decay_threshold;

/// A target with derivative oracles on [0,1]^d.
pub trait TargetFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn label(&self) -> String;
    /// D^beta f(x).
    fn partial(&self, beta: &[u32], x: &[f64]) -> f64;
    /// Upper bound of |f|_{W^{m,inf}([0,1]^d)}.
    fn seminorm(&self, m: u32) -> f64;
    /// (Q, R) with |f|_{W^{s,inf}} <= Q R^{-s} s!, when known.
    fn analytic(&self) -> Option<(f64, f64)> {
        None
    }
    fn evaluate(&self, x: &[f64]) -> f64 {
        self.partial(&vec![0; self.dim()], x)
    }
}

/// Floor applied to the approximation constant so that targets whose
/// remainder vanishes still receive positive tolerances.
pub const CONSTANT_FLOOR: f64 = 1e-8;

/// Default cap on the number of product nodes (cells).
pub const PRODUCT_NODE_CAP: usize = 100_000;

fn product_node_cap() -> usize {
    std::env::var("TANHFORGE_CAP").ok().and_then(|v| v.parse().ok()).unwrap_or(PRODUCT_NODE_CAP)
}

/// Polynomial in the global monomial basis: terms ordered by degree, then
/// descending lexicographically within a degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub d: usize,
    pub terms: Vec<(MultiIndex, f64)>,
}

impl Polynomial {
    pub fn degree_bound(&self) -> u32 {
        self.terms.iter().map(|(a, _)| a.iter().sum()).max().unwrap_or(0)
    }

    pub fn coefficient(&self, alpha: &[u32]) -> f64 {
        self.terms.iter().find(|(a, _)| a == alpha).map_or(0.0, |(_, c)| *c)
    }

    pub fn partial(&self, beta: &[u32], x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (alpha, c) in &self.terms {
            if alpha.iter().zip(beta).any(|(a, b)| b > a) {
                continue;
            }
            let mut t = *c;
            for i in 0..self.d {
                let (a, b) = (alpha[i], beta[i]);
                let falling: f64 = ((a - b + 1)..=a).map(f64::from).product();
                t *= falling * x[i].powi((a - b) as i32);
            }
            acc += t;
        }
        acc
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.partial(&vec![0; self.d], x)
    }

    /// Sum of |coefficient| over the non-constant terms.
    pub fn l1_nonconstant(&self) -> f64 {
        self.terms.iter().filter(|(a, _)| a.iter().any(|&v| v > 0)).map(|(_, c)| c.abs()).sum()
    }
}

fn indices_up_to(deg: u32, d: usize) -> Result<Vec<MultiIndex>> {
    let mut out = Vec::new();
    for n in 0..=deg {
        out.extend(enumerate(n, d)?.members().iter().cloned());
    }
    Ok(out)
}

/// Taylor coefficients D^a f(c)/a! for |a| <= s-1 in the shifted basis (x-c)^a.
pub fn taylor_coefficients(f: &dyn TargetFunction, center: &[f64], s: u32) -> Result<Vec<(MultiIndex, f64)>> {
    ensure!(s >= 1, "Taylor order must be at least 1");
    ensure!(center.len() == f.dim(), "centre has dimension {} but f has {}", center.len(), f.dim());
    let terms = indices_up_to(s - 1, f.dim())?;
    let out: Vec<_> = terms
        .into_iter()
        .map(|a| {
            let v = f.partial(&a, center) / index_factorial(&a);
            (a, v)
        })
        .collect();
    ensure!(out.iter().all(|(_, v)| v.is_finite()), "derivative oracle returned a non-finite value");
    Ok(out)
}

/// Degree s-1 Taylor polynomial of f at `center`, re-expanded in powers of x.
pub fn taylor_polynomial(f: &dyn TargetFunction, center: &[f64], s: u32) -> Result<Polynomial> {
    let d = f.dim();
    let shifted = taylor_coefficients(f, center, s)?;
    let mut terms: Vec<(MultiIndex, f64)> = shifted.iter().map(|(a, _)| (a.clone(), 0.0)).collect();
    for (alpha, a_coef) in &shifted {
        if *a_coef == 0.0 {
            continue;
        }
        for (gamma, slot) in terms.iter_mut() {
            if gamma.iter().zip(alpha).any(|(g, a)| g > a) {
                continue;
            }
            let mut t = *a_coef;
            for i in 0..d {
                let (a, g) = (alpha[i], gamma[i]);
                t *= binomial(a as u64, g as u64)? as f64 * (-center[i]).powi((a - g) as i32);
            }
            *slot += t;
        }
    }
    Ok(Polynomial { d, terms })
}

/// Constants and tolerances of one two-hidden-layer build.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildPlan {
    pub label: String,
    pub d: usize,
    pub s: u32,
    pub k: u32,
    pub n: usize,
    pub delta: f64,
    /// C(d, l, s, f) for l = 0..=k (before flooring).
    pub c_levels: Vec<f64>,
    /// C(d, k, s, f) with the floor applied; used by every tolerance.
    pub c_const: f64,
    pub seminorm_s: f64,
    pub f_sup: f64,
    pub f_norm_k: f64,
    pub eps: f64,
    pub eta: f64,
    pub h_mult: f64,
    pub alpha: f64,
    pub r: f64,
    /// Input bound of the product networks.
    pub product_bound: f64,
    pub guaranteed: f64,
    pub widths: (usize, usize),
}

/// Faa di Bruno constant used in the product tolerance.
pub fn composition_constant(k: u32) -> f64 {
    let kf = k as f64;
    16.0 * (E * E * kf.powi(4)).powf(kf)
}

/// C(d, l, s, f) = max_{m <= l} (3d/2)^{s-m}/(s-m)! |f|_{W^{s,inf}}.
pub fn taylor_constant(d: usize, l: u32, s: u32, seminorm_s: f64) -> f64 {
    (0..=l)
        .map(|m| {
            let r = s - m;
            let fact: f64 = (1..=r).map(f64::from).product();
            (1.5 * d as f64).powi(r as i32) / fact * seminorm_s
        })
        .fold(0.0, f64::max)
}

fn bank_width(d: usize, s: u32) -> Result<usize> {
    if s <= 1 {
        return Ok(0);
    }
    let half = s.div_ceil(2) as usize;
    if d == 1 {
        Ok(3 * half)
    } else {
        Ok(3 * half * cardinality(s - 1, d + 1)? as usize)
    }
}

fn product_width(d: usize) -> Result<usize> {
    if d == 1 {
        Ok(6)
    } else {
        Ok(3 * (d + 2).div_ceil(2) * cardinality(d as u32 + 1, d + 1)? as usize)
    }
}

/// Hidden widths the assembler emits for (d, s, N).
pub fn predicted_widths(d: usize, s: u32, n: usize) -> Result<(usize, usize)> {
    let cells = n.checked_pow(d as u32).ok_or_else(|| Error::Capacity("N^d overflows".into()))?;
    Ok((bank_width(d, s)? + d * (n - 1), product_width(d)? * cells))
}

/// Tolerances of the construction for target f.
pub fn plan(f: &dyn TargetFunction, s: u32, k: u32, n: usize, delta: f64) -> Result<BuildPlan> {
    let d = f.dim();
    ensure!(d >= 1, "target dimension must be positive");
    ensure!(s >= 1, "smoothness order must be at least 1");
    ensure!(k < s, "derivative order k = {k} must be below s = {s}");
    ensure!(
        (n as f64) > 1.5 * d as f64,
        "N = {n} must exceed N_0(d) = 3d/2 = {}",
        1.5 * d as f64
    );
    ensure!(delta > 0.0 && delta < 5.0 / 6.0, "delta = {delta} must lie in (0, 5/6)");
    let cells = n.checked_pow(d as u32).unwrap_or(usize::MAX);
    let cap = product_node_cap();
    if cells > cap {
        return Err(Error::Capacity(format!("{cells} product nodes exceed the cap {cap}")));
    }
    let seminorm_s = f.seminorm(s);
    ensure!(seminorm_s.is_finite() && seminorm_s >= 0.0, "declared seminorm must be finite");
    let f_sup = f.seminorm(0);
    let f_norm_k = (0..=k).map(|m| f.seminorm(m)).fold(0.0, f64::max);
    let c_levels: Vec<f64> = (0..=k).map(|l| taylor_constant(d, l, s, seminorm_s)).collect();
    let c = c_levels[k as usize].max(CONSTANT_FLOOR * f_norm_k.max(1.0));
    let c0 = c_levels[0].max(CONSTANT_FLOOR * f_norm_k.max(1.0));

    let (nf, df, kf, sf) = (n as f64, d as f64, k as f64, s as f64);
    let kk = if k == 0 { 1.0 } else { kf.powf(kf) };
    let mut eps = delta * delta * c.min(1.0)
        / (nf.powf(2.0 * sf + 2.0 * df + kf) * kk * 2f64.powf((kf + 1.0) * df) * df * f_norm_k.max(1.0));
    if k == 0 {
        let local = delta / (6.0 * (1.0 + delta / 6.0) * (df + nf.powf(df + sf)));
        let global = delta * c / (3.0 * nf.powf(sf) * f_sup.max(CONSTANT_FLOOR) * (df + nf.powf(df)));
        eps = eps.min(local).min(global);
    }
    eps = eps.min(0.2);
    let eta = (delta * c / (6.0 * nf.powf(sf))).min(f_norm_k.max(CONSTANT_FLOOR));
    let r = if k == 0 { 0.0 } else { decay_threshold(k as usize)? };
    let part = PartitionSpec::with_threshold(d, n, k, eps, r)?;
    let alpha = part.alpha;
    let h_mult = 2f64.powf(kf) * delta * c
        / (3.0
            * nf.powf(df + sf - kf)
            * composition_constant(k)
            * (df + 1.0).powf(df)
            * df.powf(2.0 * kf)
            * (2.0 * f_norm_k + c + (2.0 * alpha * kf).powf(kf + 1.0)).powf(kf));
    // |q_j| <= sup|f| + Taylor remainder over the whole cube + eta.
    let product_bound = (f_sup + c0 + eta).max(1.0).ceil();
    let guaranteed = if k == 0 {
        (1.0 + delta) * c0 / nf.powf(sf)
    } else {
        let beta = kf.powi(3) * 2f64.powf(df) * df.sqrt() * f_norm_k.sqrt().max(1.0) / (delta * c.sqrt().min(1.0));
        let log_term = (beta * nf.powf(sf + df + 2.0)).ln();
        3f64.powf(df) * (1.0 + delta) * (2.0 * (kf + 1.0)).powf(3.0 * kf) * r.powf(kf).max(log_term.powf(kf)) * c
            / nf.powf(sf - kf)
    };
    Ok(BuildPlan {
        label: f.label(),
        d,
        s,
        k,
        n,
        delta,
        c_levels,
        c_const: c,
        seminorm_s,
        f_sup,
        f_norm_k,
        eps,
        eta,
        h_mult,
        alpha,
        r,
        product_bound,
        guaranteed,
        widths: predicted_widths(d, s, n)?,
    })
}

impl BuildPlan {
    pub fn partition(&self) -> Result<PartitionSpec> {
        PartitionSpec::with_threshold(self.d, self.n, self.k, self.eps, self.r)
    }

    /// Taylor centre of cell j (1-based).
    pub fn center(&self, j: &[usize]) -> Vec<f64> {
        j.iter().map(|&v| (v as f64 - 0.5) / self.n as f64).collect()
    }

    pub fn cells(&self) -> Vec<Vec<usize>> {
        let (n, d) = (self.n, self.d);
        (0..n.pow(d as u32))
            .map(|mut idx| {
                let mut j = vec![0; d];
                for slot in j.iter_mut().rev() {
                    *slot = idx % n + 1;
                    idx /= n;
                }
                j
            })
            .collect()
    }

    fn meta(&self) -> NetMeta {
        NetMeta::new("theorem_network")
            .param("f", self.label.clone())
            .param("d", self.d)
            .param("s", self.s)
            .param("k", self.k)
            .param("N", self.n)
            .param("delta", self.delta)
            .tol("C", self.c_const)
            .tol("C_levels", self.c_levels.clone())
            .tol("eps", self.eps)
            .tol("eta", self.eta)
            .tol("h_mult", self.h_mult)
            .tol("alpha", self.alpha)
            .tol("R", self.r)
            .tol("product_bound", self.product_bound)
            .tol("guaranteed", self.guaranteed)
            .tol("predicted_widths", json!([self.widths.0, self.widths.1]))
    }
}

/// Monomial bank shared by all cells: a shallow net and, for every
/// non-constant monomial, the output row that realizes it.
struct Bank<T> {
    net: Option<Network<T>>,
    rows: Vec<(MultiIndex, usize)>,
    warning: bool,
}

fn meta_warning<T>(net: &Network<T>) -> bool {
    net.meta.tolerances.get("warning").and_then(|v| v.as_bool()).unwrap_or(false)
}

fn build_bank<T: Real>(d: usize, degree: u32, m: f64, k: u32, eps: f64) -> Result<Bank<T>> {
    if degree == 0 {
        return Ok(Bank { net: None, rows: Vec::new(), warning: false });
    }
    if d == 1 {
        let odd = degree | 1;
        let net = build_all_monomials::<T>(odd, m, k, eps)?;
        let rows = (1..=degree).map(|p| (vec![p], p as usize - 1)).collect();
        let warning = meta_warning(&net);
        return Ok(Bank { net: Some(net), rows, warning });
    }
    let net = build_monomials_with_constant::<T>(degree, d, m, k, eps)?;
    let set = enumerate(degree, d + 1)?;
    let rows = set
        .iter()
        .enumerate()
        .filter(|(_, g)| g[1..].iter().any(|&v| v > 0))
        .map(|(i, g)| (g[1..].to_vec(), i))
        .collect();
    let warning = meta_warning(&net);
    Ok(Bank { net: Some(net), rows, warning })
}

fn construct<T: Real>(p: &BuildPlan, polys: &[Polynomial], bank_eps: f64) -> Result<Network<T>> {
    let (d, n) = (p.d, p.n);
    let bank = build_bank::<T>(d, p.s - 1, 1.0, p.k, bank_eps)?;
    let product: Network<T> = if d == 1 {
        build_pairwise_product::<T>(p.product_bound, p.k, p.h_mult)?
    } else {
        build_product_shallow::<T>(d + 1, p.product_bound, p.k, p.h_mult)?
    };
    let like = product.template();
    let zero = T::lift(0.0, &like);
    let part = p.partition()?;

    // First hidden layer: bank neurons then d (N-1) ramps.
    let hb = bank.net.as_ref().map_or(0, |b| b.layers()[0].rows);
    let ramps = n - 1;
    let w1_rows = hb + d * ramps;
    let mut l1 = Layer::zeros(w1_rows, d, &like);
    if let Some(b) = &bank.net {
        let first = &b.layers()[0];
        for i in 0..hb {
            for c in 0..d {
                *l1.at_mut(i, c) = first.at(i, c).clone();
            }
            l1.b[i] = first.b[i].clone();
        }
    }
    for axis in 0..d {
        for t in 1..n {
            let row = hb + axis * ramps + (t - 1);
            let (w, b) = part.ramp(t, &like);
            *l1.at_mut(row, axis) = w;
            l1.b[row] = b;
        }
    }

    let p1 = &product.layers()[0];
    let p2 = &product.layers()[1];
    let hp = p1.rows;
    let cells = p.cells();
    let mut l2 = Layer::zeros(hp * cells.len(), w1_rows, &like);
    let mut l3 = Layer::zeros(1, hp * cells.len(), &like);
    let out_bank = bank.net.as_ref().map(|b| &b.layers()[1]);
    for (ci, (j, poly)) in cells.iter().zip(polys).enumerate() {
        // z = Z a + z0 gives the product inputs (q_j, rho_{j_1}, ..., rho_{j_d}).
        let mut zmat = vec![vec![zero.clone(); w1_rows]; d + 1];
        let mut z0 = vec![zero.clone(); d + 1];
        z0[0] = T::lift(poly.coefficient(&vec![0; d]), &like);
        if let Some(ob) = out_bank {
            for (alpha, row) in &bank.rows {
                let c = poly.coefficient(alpha);
                if c == 0.0 {
                    continue;
                }
                let c = T::lift(c, &like);
                for col in 0..hb {
                    let w = ob.at(*row, col);
                    if !w.is_zero() {
                        zmat[0][col].add_mul(&c, w);
                    }
                }
                z0[0].add_mul(&c, &ob.b[*row]);
            }
        }
        for axis in 0..d {
            let (c, terms) = part.bump_affine(j[axis]);
            z0[axis + 1] = T::lift(c, &like);
            for (t, coef) in terms {
                zmat[axis + 1][hb + axis * ramps + (t - 1)] = T::lift(coef, &like);
            }
        }
        for r in 0..hp {
            let row = ci * hp + r;
            let mut bias = p1.b[r].clone();
            for (input, zrow) in zmat.iter().enumerate() {
                let w = p1.at(r, input);
                if w.is_zero() {
                    continue;
                }
                bias.add_mul(w, &z0[input]);
                for (col, z) in zrow.iter().enumerate() {
                    if !z.is_zero() {
                        l2.at_mut(row, col).add_mul(w, z);
                    }
                }
            }
            l2.b[row] = bias;
            *l3.at_mut(0, row) = p2.at(0, r).clone();
        }
        l3.b[0] = l3.b[0].clone() + p2.b[0].clone();
    }
    let mut meta = p.meta();
    meta = meta
        .tol("bank_eps", bank_eps)
        .tol("bank_warning", bank.warning)
        .tol("product_warning", meta_warning(&product))
        .tol("warning", bank.warning || meta_warning(&product));
    Network::new(vec![l1, l2, l3], meta)
}

/// Records the double-precision rounding floor machine-eps * G of the f64
/// realization and flags it when it exceeds a tenth of the working tolerance.
fn with_rounding_floor(meta: NetMeta, probe: &Network<f64>, tol: f64) -> NetMeta {
    let floor = f64::EPSILON * probe.rounding_amplification(1.0);
    let before = meta.tolerances.get("warning").and_then(|v| v.as_bool()).unwrap_or(false);
    // NaN floors warn too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    let warn = before || !(floor <= tol / 10.0);
    meta.tol("cancellation_floor", floor).tol("warning", warn)
}

fn bank_tolerance(eta: f64, polys: &[Polynomial]) -> f64 {
    let l1 = polys.iter().map(Polynomial::l1_nonconstant).fold(0.0, f64::max);
    eta / l1.max(1.0)
}

/// The two-hidden-layer network for `f` following `plan`.
pub fn assemble<T: Real>(f: &dyn TargetFunction, p: &BuildPlan) -> Result<Network<T>> {
    ensure!(f.dim() == p.d, "plan dimension {} does not match f ({})", p.d, f.dim());
    let polys = p
        .cells()
        .iter()
        .map(|j| taylor_polynomial(f, &p.center(j), p.s))
        .collect::<Result<Vec<_>>>()?;
    let bank_eps = bank_tolerance(p.eta, &polys);
    let tol = bank_eps.min(p.h_mult).min(p.eta);
    let probe = construct::<f64>(p, &polys, bank_eps)?;
    let mut net = if T::MULTIPRECISION {
        let bits = required_bits(&probe, 1.0, tol, crate::scalar::working_bits());
        crate::scalar::with_bits(bits, || construct::<T>(p, &polys, bank_eps))?
    } else {
        construct::<T>(p, &polys, bank_eps)?
    };
    net.meta = with_rounding_floor(net.meta, &probe, tol);
    if net.hidden_widths() != vec![p.widths.0, p.widths.1] {
        return Err(Error::Consistency(format!(
            "emitted widths {:?} differ from the prediction {:?}",
            net.hidden_widths(),
            p.widths
        )));
    }
    Ok(net)
}

/// Width of the one-hidden-layer analytic network.
pub fn shallow_width(d: usize, s: u32) -> Result<usize> {
    bank_width(d, s)
}

/// Guaranteed sup error (1+delta) Q (d/(2R))^s of the shallow analytic net.
pub fn shallow_bound(d: usize, q: f64, r: f64, s: u32, delta: f64) -> f64 {
    (1.0 + delta) * q * (d as f64 / (2.0 * r)).powi(s as i32)
}

/// One Taylor polynomial at the cube centre realized by a single monomial
/// bank (no partition, one hidden layer).
pub fn assemble_shallow_analytic<T: Real>(f: &dyn TargetFunction, s: u32, delta: f64) -> Result<Network<T>> {
    let d = f.dim();
    let (q, r) = f
        .analytic()
        .ok_or_else(|| Error::Contract(format!("{} declares no (Q,R) analyticity", f.label())))?;
    ensure!(s >= 1, "order must be at least 1");
    ensure!(delta > 0.0, "delta must be positive");
    ensure!(r > d as f64 / 2.0, "R = {r} must exceed d/2 = {} for the shallow bound", d as f64 / 2.0);
    let center = vec![0.5; d];
    let coeffs = taylor_coefficients(f, &center, s)?;
    let remainder = q * (d as f64 / (2.0 * r)).powi(s as i32);
    let eta = delta * remainder;
    let l1: f64 = coeffs.iter().filter(|(a, _)| a.iter().any(|&v| v > 0)).map(|(_, c)| c.abs()).sum();
    let bank_eps = eta / l1.max(1.0);
    let guaranteed = shallow_bound(d, q, r, s, delta);
    let meta = NetMeta::new("analytic_shallow")
        .param("f", f.label())
        .param("d", d)
        .param("s", s)
        .param("delta", delta)
        .tol("Q", q)
        .tol("R", r)
        .tol("eta", eta)
        .tol("bank_eps", bank_eps)
        .tol("guaranteed", guaranteed);
    let constant = coeffs[0].1;
    let build = || -> Result<Network<T>> {
        let bank = build_bank::<T>(d, s - 1, 0.5, 0, bank_eps)?;
        let Some(bnet) = bank.net else {
            let like = T::from_f64(0.0);
            let mut net = Network::affine(1, d, vec![T::lift(0.0, &like); d], vec![T::lift(constant, &like)])?;
            net.meta = meta.clone();
            return Ok(net);
        };
        let like = bnet.template();
        let mut w = vec![T::lift(0.0, &like); d * d];
        let mut b = Vec::with_capacity(d);
        for i in 0..d {
            w[i * d + i] = T::lift(1.0, &like);
            b.push(T::lift(-0.5, &like));
        }
        let shift = Network::affine(d, d, w, b)?;
        let mut a = vec![T::lift(0.0, &like); bnet.output_dim()];
        for (alpha, row) in &bank.rows {
            let c = coeffs.iter().find(|(g, _)| g == alpha).map_or(0.0, |(_, c)| *c);
            a[*row] = T::lift(c, &like);
        }
        let mut net = shift.compose(&bnet)?.map_output(1, a, vec![T::lift(constant, &like)])?;
        net.meta = meta.clone().tol("warning", bank.warning);
        Ok(net)
    };
    let mut net = build()?;
    net.meta = with_rounding_floor(net.meta.clone(), &net.to_f64(), bank_eps.min(eta));
    ensure!(
        net.hidden_widths().iter().sum::<usize>() == shallow_width(d, s)?,
        "shallow width mismatch"
    );
    Ok(net)
}

#[cfg(test)]
mod tests;
