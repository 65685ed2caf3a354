//! Networks approximating products of their inputs.

use std::f64::consts::E;

use crate::combinatorics::enumerate;
use crate::error::{ensure, Result};
use crate::monomial::{build_multivariate_monomials, build_odd_monomials};
use crate::netgraph::{build_at_precision, Layer, NetMeta, Network};
use crate::scalar::Real;
use crate::tanh_calculus::{tanh_derivative, tanh_derivatives};

/// Expansion point of the squaring stencil.
pub const SQUARE_POINT: f64 = 0.5;

/// Bound on max_{m<=k} sup_{|z|<=2M} |D^m (sq_h(z) - z^2)| divided by h^2.
fn square_error_factor(m: f64, k: u32) -> Result<f64> {
    let sigma2 = tanh_derivative(2, SQUARE_POINT)?.abs();
    let b4 = 8f64.powi(5);
    let mut g: f64 = 0.0;
    for order in 0..=k {
        let term = if order <= 3 {
            let r = 4 - order;
            let fact: f64 = (1..=r).map(|v| v as f64).product();
            2.0 * (2.0 * m).powi(r as i32) * b4 / fact
        } else {
            let o = order as f64;
            2.0 * (2.0 * o).powf(o + 1.0)
        };
        g = g.max(term);
    }
    Ok(g / sigma2)
}

/// Step of the pairwise product: W^{k,inf} error on [-M,M]^2 is at most
/// h^2 * factor / 2 <= eps.
pub fn pairwise_step(m: f64, k: u32, eps: f64) -> Result<f64> {
    ensure!(eps > 0.0 && eps.is_finite(), "tolerance must be positive, got {eps}");
    ensure!(m > 0.0 && m.is_finite(), "domain bound must be positive, got {m}");
    let factor = square_error_factor(m, k)?;
    Ok((2.0 * eps / factor).sqrt().min(1.0))
}

fn construct_pairwise<T: Real>(h: f64, meta: &NetMeta) -> Result<Network<T>> {
    let h = T::from_f64(h);
    let zero = T::lift(0.0, &h);
    let x0 = T::lift(SQUARE_POINT, &h);
    let sigma2 = tanh_derivatives(&x0, 2)?.swap_remove(2);
    let w1 = vec![
        h.clone(), h.clone(),
        -h.clone(), -h.clone(),
        h.clone(), -h.clone(),
        -h.clone(), h.clone(),
        zero.clone(), zero.clone(),
        zero.clone(), zero.clone(),
    ];
    let b1 = vec![x0.clone(), x0.clone(), x0.clone(), x0.clone(), x0.clone(), x0];
    let c = T::lift(1.0, &h) / (T::lift(4.0, &h) * sigma2 * h.clone() * h);
    let two_c = T::lift(2.0, &c) * c.clone();
    let w2 = vec![c.clone(), c.clone(), -c.clone(), -c, -two_c.clone(), two_c];
    Network::new(
        vec![Layer::new(6, 2, w1, b1)?, Layer::new(1, 6, w2, vec![zero])?],
        meta.clone(),
    )
}

/// xy = ((x+y)^2 - (x-y)^2)/4 with each square a second difference of tanh
/// at 1/2. Six hidden neurons; the two centre neurons are constant.
pub fn build_pairwise_product<T: Real>(m: f64, k: u32, eps: f64) -> Result<Network<T>> {
    let h = pairwise_step(m, k, eps)?;
    let meta = NetMeta::new("pairwise_product")
        .param("M", m)
        .param("k", k)
        .param("eps", eps)
        .tol("h", h);
    build_at_precision(
        || construct_pairwise::<f64>(h, &meta),
        m,
        eps,
        || construct_pairwise::<T>(h, &meta),
    )
}

/// Product of d inputs with one hidden layer, via the multivariate monomial
/// network restricted to beta = (1, ..., 1).
pub fn build_product_shallow<T: Real>(d: usize, m: f64, k: u32, eps: f64) -> Result<Network<T>> {
    ensure!(d >= 1, "product needs at least one factor");
    let net = build_multivariate_monomials::<T>(d as u32, d, m, k, eps)?;
    let set = enumerate(d as u32, d)?;
    let ones = vec![1u32; d];
    let idx = set.position(&ones).expect("(1,...,1) is in P_{d,d}");
    let mut out = net.select_outputs(&[idx])?;
    out.meta.builder = "product_shallow".into();
    out.meta.parameters.insert("d".into(), d.into());
    Ok(out)
}

/// Tolerance bookkeeping of the binary product tree.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepPlan {
    pub d: usize,
    pub depth: usize,
    /// Node tolerance shared by every product and pass-through node.
    pub node_eps: f64,
    /// Domain bound for the inputs of each level (index 0 = network input).
    pub level_bounds: Vec<f64>,
    /// Number of values entering each level.
    pub level_sizes: Vec<usize>,
    pub amplification: f64,
}

pub fn deep_plan(d: usize, m: f64, k: u32, eps: f64) -> Result<DeepPlan> {
    ensure!(d >= 1, "product needs at least one factor");
    ensure!(eps > 0.0 && eps.is_finite(), "tolerance must be positive, got {eps}");
    let mut sizes = vec![d];
    while *sizes.last().expect("nonempty") > 1 {
        let c = *sizes.last().expect("nonempty");
        sizes.push(c / 2 + c % 2);
    }
    let depth = sizes.len() - 1;
    let base = m.max(1.0);
    // Exact level-l values are products of at most 2^l inputs.
    let norms: Vec<f64> = (0..=depth).map(|l| base.powf(2f64.powi(l as i32))).collect();
    let kf = k as f64;
    let fdb = |l: usize| -> f64 {
        if k == 0 {
            1.0
        } else {
            16.0 * (E * E * kf.powi(4) * 2.0 * (d * d) as f64).powf(kf) * (norms[l - 1] + 1.0).powf(kf)
        }
    };
    let amp = |l: usize| -> f64 { 2f64.powf(kf) * (2.0 * norms[l - 1] + 1.0) };
    let mut total = 0.0;
    for l in 1..=depth {
        let tail: f64 = (l + 1..=depth).map(amp).product();
        total += fdb(l) * tail;
    }
    let total = total.max(1.0);
    let node_eps = eps / (2f64.powi(depth as i32) * total);
    let mut level_bounds = vec![m];
    for l in 1..=depth {
        level_bounds.push(norms[l] + eps);
    }
    Ok(DeepPlan { d, depth, node_eps, level_bounds, level_sizes: sizes, amplification: total })
}

/// One level of the tree as a shallow network.
fn level_net<T: Real>(plan: &DeepPlan, level: usize, k: u32) -> Result<Network<T>> {
    let count = plan.level_sizes[level - 1];
    let bound = plan.level_bounds[level - 1];
    let pair = build_pairwise_product::<T>(bound, k, plan.node_eps)?;
    let mut net: Option<Network<T>> = None;
    for _ in 0..count / 2 {
        net = Some(match net {
            None => pair.clone(),
            Some(n) => n.parallelize(&pair)?,
        });
    }
    if count % 2 == 1 {
        let id = build_odd_monomials::<T>(1, bound, k, plan.node_eps)?;
        net = Some(match net {
            None => id,
            Some(n) => n.parallelize(&id)?,
        });
    }
    Ok(net.expect("level has at least one node"))
}

/// Level networks of the product tree, for inspection.
pub fn build_product_deep_levels<T: Real>(d: usize, m: f64, k: u32, eps: f64) -> Result<(DeepPlan, Vec<Network<T>>)> {
    let plan = deep_plan(d, m, k, eps)?;
    let levels = (1..=plan.depth).map(|l| level_net::<T>(&plan, l, k)).collect::<Result<Vec<_>>>()?;
    Ok((plan, levels))
}

fn chain<T: Real>(d: usize, levels: Vec<Network<T>>, like: T) -> Result<Network<T>> {
    let mut it = levels.into_iter();
    match it.next() {
        None => Network::affine(1, d, vec![T::lift(1.0, &like); d], vec![T::lift(0.0, &like)]),
        Some(first) => it.try_fold(first, |acc, next| acc.compose(&next)),
    }
}

/// Product of d inputs as a binary tree of pairwise products with
/// ceil(log2 d) hidden layers of width at most 3d.
pub fn build_product_deep<T: Real>(d: usize, m: f64, k: u32, eps: f64) -> Result<Network<T>> {
    let plan = deep_plan(d, m, k, eps)?;
    let meta = NetMeta::new("product_deep")
        .param("d", d)
        .param("M", m)
        .param("k", k)
        .param("eps", eps)
        .tol("node_eps", plan.node_eps)
        .tol("amplification", plan.amplification)
        .tol("level_bounds", plan.level_bounds.clone());
    let build = |p: &DeepPlan| -> Result<Network<f64>> {
        let levels = (1..=p.depth).map(|l| level_net::<f64>(p, l, k)).collect::<Result<Vec<_>>>()?;
        chain(d, levels, 0.0)
    };
    let mut net = build_at_precision(
        || build(&plan),
        m,
        eps,
        || {
            let levels = (1..=plan.depth).map(|l| level_net::<T>(&plan, l, k)).collect::<Result<Vec<_>>>()?;
            chain(d, levels, T::from_f64(0.0))
        },
    )?;
    net.meta = meta;
    Ok(net)
}
