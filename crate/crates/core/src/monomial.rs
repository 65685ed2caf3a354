//! Shallow networks for univariate and multivariate monomials.

use std::f64::consts::E;

use serde_json::json;

use crate::combinatorics::{enumerate, multinomial, MultiIndexSet};
use crate::error::{ensure, Error, Result};
use crate::linalg::{inf_norm, matmul, Lu};
use crate::netgraph::{build_at_precision, Layer, NetMeta, Network};
use crate::scalar::Real;
use crate::tanh_calculus::derivative_at_zero;

/// Central difference stencil of odd order `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilPlan {
    pub p: u32,
    pub h: f64,
    pub m: f64,
    /// (-1)^i binom(p, i), i = 0..=p
    pub coefficients: Vec<i128>,
    /// p/2 - i, i = 0..=p
    pub nodes: Vec<f64>,
}

impl StencilPlan {
    pub fn new(p: u32, h: f64, m: f64) -> Result<Self> {
        ensure!(p % 2 == 1, "stencil order must be odd, got {p}");
        ensure!(
            h > 0.0 && h < 2.0 / (p as f64 * m),
            "step {h} outside (0, 2/(pM)) = (0, {})",
            2.0 / (p as f64 * m)
        );
        let mut coefficients = Vec::with_capacity(p as usize + 1);
        let mut c: i128 = 1;
        for i in 0..=p as i128 {
            coefficients.push(if i % 2 == 0 { c } else { -c });
            c = c * (p as i128 - i) / (i + 1);
        }
        let nodes = (0..=p).map(|i| p as f64 / 2.0 - i as f64).collect();
        Ok(Self { p, h, m, coefficients, nodes })
    }

    /// 2^l sum_i (-1)^i binom(p,i) (p/2 - i)^l, exactly.
    pub fn scaled_moment(&self, l: u32) -> i128 {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| c * (self.p as i128 - 2 * i as i128).pow(l))
            .sum()
    }
}

/// Step size and its double-precision cancellation estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct StepChoice {
    pub h: f64,
    /// machine epsilon * max_i binom(p,i) / (h^p |sigma^(p)(0)|)
    pub cancellation_floor: f64,
    pub warning: Option<String>,
}

pub fn step_for_tolerance(p: u32, m: f64, k: u32, eps: f64) -> Result<StepChoice> {
    ensure!(p % 2 == 1, "stencil order must be odd, got {p}");
    ensure!(eps > 0.0 && eps.is_finite(), "tolerance must be positive, got {eps}");
    ensure!(m > 0.0 && m.is_finite(), "domain bound must be positive, got {m}");
    let (pf, kf) = (p as f64, k as f64);
    let denom = (2.0 * (pf + 2.0) * pf * m).powf(pf + 3.0) + (2.0 * pf * kf).powf(kf + 1.0);
    let raw = (eps / denom).sqrt();
    let h = raw.min(0.99 * (2.0 / (pf * m)).min(1.0));
    let max_binom = (0..=p).map(|i| binom_f64(p, i)).fold(0.0, f64::max);
    let sigma_p = derivative_at_zero(p as usize)?.abs() as f64;
    let floor = f64::EPSILON * max_binom / (h.powi(p as i32) * sigma_p);
    let warning = if h.is_nan() || h <= f64::MIN_POSITIVE || !floor.is_finite() {
        Some(format!("step h = {h:e} underflows double precision"))
    } else if floor > eps / 10.0 {
        Some(format!(
            "double-precision cancellation floor {floor:e} exceeds eps/10 = {:e}; evaluate in high precision",
            eps / 10.0
        ))
    } else {
        None
    };
    Ok(StepChoice { h, cancellation_floor: floor, warning })
}

fn binom_f64(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// sqrt(e) (2 e s)^(s/2): bound on max_p E*_p / eps at alpha = 1/s.
pub fn even_power_rescale(s: u32) -> f64 {
    E.sqrt() * (2.0 * E * s as f64).powf(s as f64 / 2.0)
}

/// Error amplification 2^(p/2) (1+a)^((p^2+p)/2) / a^(p/2) of the even-power recursion.
pub fn even_power_amplification(p: u32, alpha: f64) -> f64 {
    let pf = p as f64;
    2f64.powf(pf / 2.0) * (1.0 + alpha).powf((pf * pf + pf) / 2.0) / alpha.powf(pf / 2.0)
}

/// Output row of the odd stencil f_p over the `(s+1)/2` neurons sigma((s/2-j) h y).
fn odd_row<T: Real>(s: u32, p: u32, h: &T) -> Result<Vec<T>> {
    let w = s.div_ceil(2) as usize;
    let mut row = vec![T::lift(0.0, h); w];
    let sigma_p = T::lift_i128(derivative_at_zero(p as usize)?, h);
    let scale = T::lift(2.0, h) / (sigma_p * h.powu(p));
    let mut binom: i128 = 1;
    for i in 0..=((p - 1) / 2) {
        let j = ((s - p) / 2 + i) as usize;
        let signed = if i % 2 == 0 { binom } else { -binom };
        row[j] = T::lift_i128(signed, h) * scale.clone();
        binom = binom * (p - i) as i128 / (i + 1) as i128;
    }
    Ok(row)
}

fn node_weight<T: Real>(s: u32, j: usize, h: &T) -> T {
    T::lift((s as i64 - 2 * j as i64) as f64, h) * h.clone() / T::lift(2.0, h)
}

/// Rows (weights over 3(s+1)/2 neurons, bias) approximating y^p, p = 0..=s.
/// Neuron banks are ordered shift 0, +alpha, -alpha.
fn power_rows<T: Real>(s: u32, h: &T, alpha: &T) -> Result<Vec<(Vec<T>, T)>> {
    let w = s.div_ceil(2) as usize;
    let zero = T::lift(0.0, h);
    let mut rows: Vec<(Vec<T>, T)> = vec![(vec![zero.clone(); 3 * w], T::lift(1.0, h))];
    for p in 1..=s {
        if p % 2 == 1 {
            let mut r = vec![zero.clone(); 3 * w];
            r[..w].clone_from_slice(&odd_row(s, p, h)?);
            rows.push((r, zero.clone()));
            continue;
        }
        let n = p / 2;
        let q = 2 * n + 1;
        let odd = odd_row(s, q, h)?;
        let denom = T::lift(2.0, h) * alpha.clone() * T::lift(q as f64, h);
        let mut r = vec![zero.clone(); 3 * w];
        for j in 0..w {
            r[w + j] = odd[j].clone() / denom.clone();
            r[2 * w + j] = -(odd[j].clone() / denom.clone());
        }
        let mut bias = zero.clone();
        for kk in 0..n {
            let c = T::lift(2.0 * binom_f64(q, 2 * kk), h) * alpha.powu(2 * (n - kk) + 1)
                / denom.clone();
            let (prev_w, prev_b) = &rows[(2 * kk) as usize];
            for (dst, src) in r.iter_mut().zip(prev_w) {
                if !src.is_zero() {
                    dst.add_mul(&-c.clone(), src);
                }
            }
            bias.add_mul(&-c, prev_b);
        }
        rows.push((r, bias));
    }
    Ok(rows)
}

fn check_odd(s: u32) -> Result<()> {
    ensure!(s % 2 == 1, "maximal degree must be odd, got {s}");
    Ok(())
}

fn step_meta(meta: NetMeta, step: &StepChoice, internal_eps: f64) -> NetMeta {
    let mut meta = meta
        .tol("h", step.h)
        .tol("internal_eps", internal_eps)
        .tol("cancellation_floor", step.cancellation_floor);
    if let Some(w) = &step.warning {
        meta = meta.tol("warning", w.as_str());
    }
    meta
}

fn construct_odd<T: Real>(s: u32, step: &StepChoice, meta: &NetMeta) -> Result<Network<T>> {
    let h = T::from_f64(step.h);
    let w = s.div_ceil(2) as usize;
    let w1 = (0..w).map(|j| node_weight(s, j, &h)).collect();
    let hidden = Layer::new(w, 1, w1, vec![T::lift(0.0, &h); w])?;
    let mut w2 = Vec::with_capacity(w * w);
    for p in (1..=s).step_by(2) {
        w2.extend(odd_row(s, p, &h)?);
    }
    let out = Layer::new(w, w, w2, vec![T::lift(0.0, &h); w])?;
    Network::new(vec![hidden, out], meta.clone())
}

/// Shallow net of width (s+1)/2 whose outputs approximate y, y^3, ..., y^s
/// on [-M, M] to `eps` in W^{k,inf}.
pub fn build_odd_monomials<T: Real>(s: u32, m: f64, k: u32, eps: f64) -> Result<Network<T>> {
    check_odd(s)?;
    let step = step_for_tolerance(s, m, k, eps)?;
    let meta = step_meta(
        NetMeta::new("odd_monomials").param("s", s).param("M", m).param("k", k).param("eps", eps),
        &step,
        eps,
    );
    build_at_precision(
        || construct_odd::<f64>(s, &step, &meta),
        m,
        eps,
        || construct_odd::<T>(s, &step, &meta),
    )
}

/// Plan shared by the all-monomials constructions.
#[derive(Debug, Clone)]
struct PowerPlan {
    s: u32,
    step: StepChoice,
    inner_eps: f64,
}

fn power_plan(s: u32, m: f64, k: u32, eps: f64) -> Result<PowerPlan> {
    check_odd(s)?;
    ensure!(eps > 0.0, "tolerance must be positive, got {eps}");
    let alpha = 1.0 / s as f64;
    let inner_eps = eps / even_power_rescale(s);
    let step = step_for_tolerance(s, m + alpha, k, inner_eps)?;
    Ok(PowerPlan { s, step, inner_eps })
}

fn construct_all<T: Real>(plan: &PowerPlan, meta: &NetMeta) -> Result<Network<T>> {
    let s = plan.s;
    let h = T::from_f64(plan.step.h);
    let alpha = T::lift(1.0, &h) / T::lift(s as f64, &h);
    let w = s.div_ceil(2) as usize;
    let zero = T::lift(0.0, &h);
    let mut w1 = Vec::with_capacity(3 * w);
    let mut b1 = Vec::with_capacity(3 * w);
    for shift in [zero.clone(), alpha.clone(), -alpha.clone()] {
        for j in 0..w {
            let c = node_weight(s, j, &h);
            b1.push(c.clone() * shift.clone());
            w1.push(c);
        }
    }
    let hidden = Layer::new(3 * w, 1, w1, b1)?;
    let rows = power_rows(s, &h, &alpha)?;
    let mut w2 = Vec::with_capacity(s as usize * 3 * w);
    let mut b2 = Vec::with_capacity(s as usize);
    for (r, b) in rows.into_iter().skip(1) {
        w2.extend(r);
        b2.push(b);
    }
    let out = Layer::new(s as usize, 3 * w, w2, b2)?;
    Network::new(vec![hidden, out], meta.clone())
}

/// Shallow net of width 3(s+1)/2 whose outputs approximate y, y^2, ..., y^s.
pub fn build_all_monomials<T: Real>(s: u32, m: f64, k: u32, eps: f64) -> Result<Network<T>> {
    let plan = power_plan(s, m, k, eps)?;
    let meta = step_meta(
        NetMeta::new("all_monomials").param("s", s).param("M", m).param("k", k).param("eps", eps),
        &plan.step,
        plan.inner_eps,
    );
    build_at_precision(
        || construct_all::<f64>(&plan, &meta),
        m,
        eps,
        || construct_all::<T>(&plan, &meta),
    )
}

/// D[a][b] = multinomial(n, b) a^b / n^n over P_{n,q} (row-major, 0^0 = 1).
pub fn dyson_matrix<T: Real>(n: u32, q: usize) -> Result<(MultiIndexSet, Vec<T>)> {
    let set = enumerate(n, q)?;
    let like = T::from_f64(0.0);
    let nn = T::lift(n as f64, &like).powu(n);
    let len = set.len();
    let mut d = Vec::with_capacity(len * len);
    for a in set.iter() {
        for b in set.iter() {
            let mut v = T::lift_i128(multinomial(n, b)? as i128, &like);
            for (&ai, &bi) in a.iter().zip(b) {
                v *= T::lift(ai as f64, &like).powu(bi);
            }
            d.push(v / nn.clone());
        }
    }
    Ok((set, d))
}

/// Inverse of the Dyson matrix with its residual ||D D^-1 - I||_max.
pub fn dyson_inverse<T: Real>(n: u32, q: usize) -> Result<(MultiIndexSet, Vec<T>, f64)> {
    let (set, d) = dyson_matrix::<T>(n, q)?;
    let len = set.len();
    let inv = Lu::factor(&d, len)?.inverse();
    let prod = matmul(&d, &inv, len);
    let mut residual: f64 = 0.0;
    for i in 0..len {
        for j in 0..len {
            let e = if i == j { 1.0 } else { 0.0 };
            residual = residual.max((prod[i * len + j].to_f64() - e).abs());
        }
    }
    if residual > 1e-8 {
        return Err(Error::Conditioning(format!(
            "Dyson solve for n={n}, q={q} has residual {residual:e} > 1e-8"
        )));
    }
    Ok((set, inv, residual))
}

/// (n!)^3 |P_{n,q}|^2 2^n.
pub fn dyson_inverse_bound(n: u32, q: usize) -> Result<f64> {
    let len = crate::combinatorics::cardinality(n, q)? as f64;
    let fact: f64 = (1..=n).map(|i| i as f64).product();
    Ok(fact.powi(3) * len * len * 2f64.powi(n as i32))
}

/// 16 (e^2 k^4 q^2)^k max{1,M}^k.
fn composition_factor(k: u32, q: usize, m: f64) -> f64 {
    let kf = k as f64;
    16.0 * (E * E * kf.powi(4) * (q * q) as f64).powf(kf) * m.max(1.0).powf(kf)
}

struct MultiPlan {
    n: u32,
    q: usize,
    power: PowerPlan,
    dinv_norm: f64,
    residual: f64,
}

fn multi_plan(n: u32, q: usize, m: f64, k: u32, eps: f64) -> Result<MultiPlan> {
    ensure!(n >= 1 && q >= 1, "degree and dimension must be positive");
    ensure!(eps > 0.0, "tolerance must be positive, got {eps}");
    let (_, inv, residual) = crate::scalar::with_exact_bits(256, || dyson_inverse::<crate::Hp>(n, q))?;
    let len = (inv.len() as f64).sqrt() as usize;
    let dinv_norm = inf_norm(&inv, len);
    let s = 2 * (n / 2) + 1;
    let psi_eps = eps / (dinv_norm * composition_factor(k, q, m));
    Ok(MultiPlan { n, q, power: power_plan(s, m, k, psi_eps)?, dinv_norm, residual })
}

fn construct_multi<T: Real>(plan: &MultiPlan, meta: &NetMeta) -> Result<Network<T>> {
    let (n, q, s) = (plan.n, plan.q, plan.power.s);
    let (set, inv, _) = dyson_inverse::<T>(n, q)?;
    let len = set.len();
    let h = T::from_f64(plan.power.step.h);
    let alpha = T::lift(1.0, &h) / T::lift(s as f64, &h);
    let w = s.div_ceil(2) as usize;
    let sub = 3 * w;
    let zero = T::lift(0.0, &h);
    let nf = T::lift(n as f64, &h);
    let mut w1 = Vec::with_capacity(len * sub * q);
    let mut b1 = Vec::with_capacity(len * sub);
    for a in set.iter() {
        for shift in [zero.clone(), alpha.clone(), -alpha.clone()] {
            for j in 0..w {
                let c = node_weight(s, j, &h);
                for &ai in a {
                    w1.push(c.clone() * T::lift(ai as f64, &h) / nf.clone());
                }
                b1.push(c * shift.clone());
            }
        }
    }
    let hidden = Layer::new(len * sub, q, w1, b1)?;
    let (psi_w, psi_b) = power_rows(s, &h, &alpha)?.swap_remove(n as usize);
    let mut w2 = vec![zero.clone(); len * len * sub];
    let mut b2 = vec![zero.clone(); len];
    for beta in 0..len {
        for a in 0..len {
            let c = &inv[beta * len + a];
            if c.is_zero() {
                continue;
            }
            for (j, pw) in psi_w.iter().enumerate() {
                if !pw.is_zero() {
                    w2[beta * len * sub + a * sub + j].add_mul(c, pw);
                }
            }
            b2[beta].add_mul(c, &psi_b);
        }
    }
    let out = Layer::new(len, len * sub, w2, b2)?;
    Network::new(vec![hidden, out], meta.clone())
}

fn multi_meta(name: &str, plan: &MultiPlan, m: f64, k: u32, eps: f64) -> NetMeta {
    step_meta(
        NetMeta::new(name)
            .param("n", plan.n)
            .param("q", plan.q)
            .param("M", m)
            .param("k", k)
            .param("eps", eps),
        &plan.power.step,
        plan.power.inner_eps,
    )
    .tol("dyson_inverse_norm", plan.dinv_norm)
    .tol("dyson_residual", plan.residual)
    .tol("output_order", json!("descending lexicographic over P_{n,q}"))
}

/// Shallow net whose output iota(beta) approximates omega^beta for every
/// beta in P_{n,q} on [-M, M]^q.
pub fn build_multivariate_monomials<T: Real>(n: u32, q: usize, m: f64, k: u32, eps: f64) -> Result<Network<T>> {
    let plan = multi_plan(n, q, m, k, eps)?;
    let meta = multi_meta("multivariate_monomials", &plan, m, k, eps);
    build_at_precision(
        || construct_multi::<f64>(&plan, &meta),
        m + 1.0,
        eps,
        || construct_multi::<T>(&plan, &meta),
    )
}

/// All d-variate monomials of degree <= s through omega = (1, x); output
/// iota(beta) for beta in P_{s,d+1} approximates x^(beta_1..beta_d).
pub fn build_monomials_with_constant<T: Real>(s: u32, d: usize, m: f64, k: u32, eps: f64) -> Result<Network<T>> {
    ensure!(d >= 1, "dimension must be positive");
    let mm = m.max(1.0);
    let plan = multi_plan(s, d + 1, mm, k, eps)?;
    let meta = multi_meta("monomials_with_constant", &plan, m, k, eps).param("d", d).param("s", s);
    fn embed<U: Real>(d: usize, like: &U) -> Result<Network<U>> {
        let mut w = vec![U::lift(0.0, like); (d + 1) * d];
        for i in 0..d {
            w[(i + 1) * d + i] = U::lift(1.0, like);
        }
        let mut b = vec![U::lift(0.0, like); d + 1];
        b[0] = U::lift(1.0, like);
        Network::affine(d + 1, d, w, b)
    }
    let run = |net: Network<f64>| -> Result<Network<f64>> {
        let e = embed(d, &0.0)?;
        let mut out = e.compose(&net)?;
        out.meta = meta.clone();
        Ok(out)
    };
    build_at_precision(
        || run(construct_multi::<f64>(&plan, &meta)?),
        mm + 1.0,
        eps,
        || {
            let net = construct_multi::<T>(&plan, &meta)?;
            let e = embed(d, &net.template())?;
            let mut out = e.compose(&net)?;
            out.meta = meta.clone();
            Ok(out)
        },
    )
}
