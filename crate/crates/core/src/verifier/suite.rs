//! Property ledger: every construction and bound checked at a small,
//! fixed parameter matrix.

use std::f64::consts::PI;

use crate::assembler::{
    assemble, assemble_shallow_analytic, plan, predicted_widths, taylor_constant, taylor_polynomial, TargetFunction,
};
use crate::bounds::faadibruno_bound;
use crate::catalog::{make, CatalogParams};
use crate::combinatorics::{cardinality_bounds, enumerate, multinomial};
use crate::error::Result;
use crate::linalg::inf_norm;
use crate::monomial::{
    build_all_monomials, build_monomials_with_constant, build_multivariate_monomials, build_odd_monomials,
    dyson_inverse, dyson_inverse_bound, StencilPlan,
};
use crate::netgraph::{JetLayout, Layer, NetMeta, Network};
use crate::partition::{PartitionSpec, PartitionTables};
use crate::product::{build_pairwise_product, build_product_deep, build_product_shallow};
use crate::scalar::{Hp, Real};
use crate::tanh_calculus::{decay_threshold, derivative_upper_bound, tanh_derivative};

use super::{csv_error, fd_tanh_derivative, into_string, sobolev_error, sobolev_error_at, Grid};

/// Deliberate corruption applied before checking, to show the ledger notices.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Fault {
    #[default]
    None,
    /// Scales one first-layer weight of every odd-monomial network by 1.01.
    MonomialWeight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerRow {
    pub lemma: String,
    pub params: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl LedgerRow {
    pub fn margin(&self) -> f64 {
        self.bound - self.value
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ledger {
    pub rows: Vec<LedgerRow>,
}

impl Ledger {
    pub fn failures(&self) -> Vec<&LedgerRow> {
        self.rows.iter().filter(|r| !r.pass).collect()
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// `lemma,params,value,bound,margin,pass` with fixed number formatting.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["lemma", "params", "value", "bound", "margin", "pass"]).map_err(csv_error)?;
        for r in &self.rows {
            w.write_record([
                r.lemma.clone(),
                r.params.clone(),
                format!("{:.6e}", r.value),
                format!("{:.6e}", r.bound),
                format!("{:.6e}", r.margin()),
                r.pass.to_string(),
            ])
            .map_err(csv_error)?;
        }
        into_string(w)
    }
}

struct Rows(Vec<LedgerRow>);

impl Rows {
    /// Runs one check; an error becomes a failing row.
    fn check(&mut self, lemma: &str, params: String, f: impl FnOnce() -> Result<(f64, f64)>) {
        let row = match f() {
            Ok((value, bound)) => LedgerRow { lemma: lemma.into(), params, value, bound, pass: value <= bound },
            Err(e) => LedgerRow {
                lemma: lemma.into(),
                params: format!("{params}; error: {e}"),
                value: f64::NAN,
                bound: f64::NAN,
                pass: false,
            },
        };
        self.0.push(row);
    }
}

/// x^exps, for checking monomial and product outputs.
struct Power {
    exps: Vec<u32>,
}

impl TargetFunction for Power {
    fn dim(&self) -> usize {
        self.exps.len()
    }

    fn label(&self) -> String {
        format!("x^{:?}", self.exps)
    }

    fn partial(&self, beta: &[u32], x: &[f64]) -> f64 {
        let mut v = 1.0;
        for ((&e, &b), &xi) in self.exps.iter().zip(beta).zip(x) {
            if b > e {
                return 0.0;
            }
            let falling: f64 = ((e - b + 1)..=e).map(f64::from).product();
            v *= falling * xi.powi((e - b) as i32);
        }
        v
    }

    fn seminorm(&self, _m: u32) -> f64 {
        f64::NAN
    }
}

fn corrupt<T: Real>(net: Network<T>, fault: Fault) -> Result<Network<T>> {
    if fault != Fault::MonomialWeight {
        return Ok(net);
    }
    let meta = net.meta.clone();
    let mut layers = net.into_layers();
    let w = layers[0].at_mut(0, 0);
    *w = w.clone() * T::lift(1.01, w);
    Network::new(layers, meta)
}

fn monomial_error(net: &Network<Hp>, outputs: &[(usize, Vec<u32>)], k: u32, grid: &Grid) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (idx, exps) in outputs {
        worst = worst.max(sobolev_error_at(net, *idx, &Power { exps: exps.clone() }, k, grid)?.empirical());
    }
    Ok(worst)
}

fn tanh_rows(rows: &mut Rows) {
    let xs: Vec<f64> = (0..=120).map(|i| -3.0 + 6.0 * i as f64 / 120.0).collect();
    for m in 1..=8u32 {
        rows.check("tanh_derivative_formula", format!("m={m}"), || {
            let mut worst: f64 = 0.0;
            for &x in &xs {
                let exact = tanh_derivative(m as usize, x)?;
                worst = worst.max((exact - fd_tanh_derivative(m, x)).abs() / exact.abs().max(1.0));
            }
            Ok((worst, 1e-6))
        });
    }
    for m in 1..=8usize {
        rows.check("tanh_derivative_bound", format!("m={m}"), || {
            let mut worst: f64 = 0.0;
            for &x in &xs {
                worst = worst.max(tanh_derivative(m, x)?.abs() / derivative_upper_bound(m, x)?);
            }
            Ok((worst, 1.0))
        });
    }
    for k in 1..=4usize {
        rows.check("decay_threshold", format!("k={k}"), || {
            let r = decay_threshold(k)?;
            let mut rise: f64 = 0.0;
            for m in 1..=k {
                let mut prev = tanh_derivative(m, r)?.abs();
                for i in 1..=8000 {
                    let cur = tanh_derivative(m, r + i as f64 * 1e-3)?.abs();
                    rise = rise.max(cur - prev);
                    prev = cur;
                }
            }
            Ok((rise, 0.0))
        });
    }
}

fn stencil_rows(rows: &mut Rows) {
    for p in (1..=9u32).step_by(2) {
        rows.check("stencil_moments", format!("p={p}"), || {
            let plan = StencilPlan::new(p, 1e-3, 1.0)?;
            let pfact: i128 = (1..=p as i128).product();
            let worst = (0..=p + 1)
                .map(|l| {
                    let want = if l == p { (1i128 << l) * pfact } else { 0 };
                    (plan.scaled_moment(l) - want).abs() as f64
                })
                .fold(0.0, f64::max);
            Ok((worst, 0.0))
        });
    }
}

fn monomial_rows(rows: &mut Rows, fault: Fault) {
    let line = Grid::uniform(1, 201, -1.0, 1.0).expect("valid grid");
    for s in [3u32, 5] {
        for k in [0u32, 1] {
            let eps = 1e-2;
            rows.check("odd_monomials", format!("s={s} M=1 k={k} eps={eps}"), || {
                let net = corrupt(build_odd_monomials::<Hp>(s, 1.0, k, eps)?, fault)?;
                let outs: Vec<(usize, Vec<u32>)> = (1..=s).step_by(2).map(|p| (((p - 1) / 2) as usize, vec![p])).collect();
                Ok((monomial_error(&net, &outs, k, &line)?, eps))
            });
        }
    }
    for k in [0u32, 1] {
        let (s, eps) = (3u32, 1e-2);
        rows.check("all_monomials", format!("s={s} M=1 k={k} eps={eps}"), || {
            let net = build_all_monomials::<Hp>(s, 1.0, k, eps)?;
            let outs: Vec<(usize, Vec<u32>)> = (1..=s).map(|p| ((p - 1) as usize, vec![p])).collect();
            Ok((monomial_error(&net, &outs, k, &line)?, eps))
        });
    }
    for n in 1..=4u32 {
        for q in 1..=4usize {
            rows.check("dyson_inverse_bound", format!("n={n} q={q}"), || {
                let (set, inv, _) = dyson_inverse::<Hp>(n, q)?;
                Ok((inf_norm(&inv, set.len()), dyson_inverse_bound(n, q)?))
            });
        }
    }
    let square = Grid::uniform(2, 21, -1.0, 1.0).expect("valid grid");
    rows.check("multivariate_monomials", "n=2 q=2 M=1 k=0 eps=1e-2".into(), || {
        let net = build_multivariate_monomials::<Hp>(2, 2, 1.0, 0, 1e-2)?;
        let outs: Vec<(usize, Vec<u32>)> = enumerate(2, 2)?.members().iter().cloned().enumerate().collect();
        Ok((monomial_error(&net, &outs, 0, &square)?, 1e-2))
    });
    rows.check("monomials_with_constant", "s=2 d=1 M=1 k=0 eps=1e-2".into(), || {
        let net = build_monomials_with_constant::<Hp>(2, 1, 1.0, 0, 1e-2)?;
        let outs: Vec<(usize, Vec<u32>)> =
            enumerate(2, 2)?.members().iter().enumerate().map(|(i, b)| (i, b[1..].to_vec())).collect();
        Ok((monomial_error(&net, &outs, 0, &line)?, 1e-2))
    });
}

fn product_rows(rows: &mut Rows) {
    let eps = 1e-2;
    for k in [0u32, 1] {
        rows.check("pairwise_product", format!("M=1 k={k} eps={eps}"), || {
            let net = build_pairwise_product::<Hp>(1.0, k, eps)?;
            let grid = Grid::uniform(2, 21, -1.0, 1.0)?;
            Ok((sobolev_error(&net, &Power { exps: vec![1, 1] }, k, &grid)?.empirical(), eps))
        });
    }
    for d in [2usize, 3] {
        rows.check("shallow_product", format!("d={d} M=1 k=0 eps={eps}"), || {
            let net = build_product_shallow::<Hp>(d, 1.0, 0, eps)?;
            let grid = Grid::uniform(d, if d == 2 { 21 } else { 9 }, -1.0, 1.0)?;
            Ok((sobolev_error(&net, &Power { exps: vec![1; d] }, 0, &grid)?.empirical(), eps))
        });
    }
    for d in [2usize, 3, 4] {
        rows.check("deep_product", format!("d={d} M=1 k=0 eps={eps}"), || {
            let net = build_product_deep::<Hp>(d, 1.0, 0, eps)?;
            let per = match d {
                2 => 21,
                3 => 9,
                _ => 5,
            };
            let grid = Grid::uniform(d, per, -1.0, 1.0)?;
            Ok((sobolev_error(&net, &Power { exps: vec![1; d] }, 0, &grid)?.empirical(), eps))
        });
    }
}

fn partition_rows(rows: &mut Rows) {
    let eps = 1e-2;
    for d in [1usize, 2] {
        for n in [4usize, 7] {
            for k in [0u32, 1] {
                let params = format!("d={d} N={n} k={k} eps={eps}");
                let tables = PartitionSpec::new(d, n, k, eps).and_then(|s| PartitionTables::with_samples(&s, 64));
                rows.check("partition_close", params.clone(), || {
                    let t = tables.as_ref().map_err(|e| crate::Error::Contract(e.to_string()))?;
                    let mut value: f64 = 0.0;
                    for j in t.cells() {
                        value = value.max(t.close(&j)?.value);
                    }
                    Ok((value, t.spec().close_bound()))
                });
                rows.check("partition_far", params, || {
                    let t = tables.as_ref().map_err(|e| crate::Error::Contract(e.to_string()))?;
                    let mut value: f64 = 0.0;
                    for j in t.cells() {
                        if let Some(c) = t.worst_far(&j)? {
                            value = value.max(c.value);
                        }
                    }
                    Ok((value, t.spec().far_bound()))
                });
            }
        }
    }
}

fn combinatorics_rows(rows: &mut Rows) {
    for d in 1..=3usize {
        rows.check("multinomial_theorem", format!("d={d} n<=6"), || {
            let mut worst: f64 = 0.0;
            for n in 0..=6u32 {
                let mut sum: u128 = 0;
                for b in enumerate(n, d)?.iter() {
                    sum += multinomial(n, b)?;
                }
                worst = worst.max((sum as f64 - (d as f64).powi(n as i32)).abs());
            }
            Ok((worst, 0.0))
        });
    }
    for d in 2..=4usize {
        rows.check("cardinality_bounds", format!("d={d} n<=8"), || {
            let mut worst: f64 = 0.0;
            for n in 1..=8u32 {
                let c = cardinality_bounds(n, d)?;
                worst = worst.max(c.exact as f64 / c.bound_nd.min(c.bound_dn));
            }
            Ok((worst, 1.0))
        });
    }
}

/// Jet product of tanh(x) and tanh(2x) against the Leibniz sum.
fn calculus_rows(rows: &mut Rows) {
    for k in 1..=4u32 {
        rows.check("leibniz_rule", format!("k={k} x=0.3"), || {
            let x0 = 0.3;
            let layout = JetLayout::new(1, k)?;
            let u = layout.variable(0, x0);
            let mut two_u = layout.constant(0.0);
            two_u.add_scaled(&2.0, &u);
            let prod = layout.tanh(&u)?.mul(&layout.tanh(&two_u)?);
            let mut worst: f64 = 0.0;
            for m in 0..=k {
                let mut want = 0.0;
                let mut binom = 1.0;
                for i in 0..=m {
                    let j = m - i;
                    want += binom
                        * tanh_derivative(i as usize, x0)?
                        * 2f64.powi(j as i32)
                        * tanh_derivative(j as usize, 2.0 * x0)?;
                    binom = binom * (m - i) as f64 / (i + 1) as f64;
                }
                let got = prod.partial(&[m]).unwrap_or(f64::NAN);
                worst = worst.max((got - want).abs() / want.abs().max(1.0));
            }
            Ok((worst, 1e-12))
        });
    }
    for (n, d) in [(1u32, 1usize), (2, 1), (1, 2), (2, 2)] {
        rows.check("faa_di_bruno", format!("n={n} d={d} m=2"), || faa_di_bruno_case(n, d));
    }
}

/// Fixed deterministic layer with entries scale * sin(seed + 1.7 i).
fn fixed_layer(seed: f64, rows: usize, cols: usize, scale: f64) -> Result<Layer> {
    let w = (0..rows * cols).map(|i| scale * (seed + 1.7 * i as f64).sin()).collect();
    let b = (0..rows).map(|i| 0.5 * (seed + 2.3 * i as f64).cos()).collect();
    Layer::new(rows, cols, w, b)
}

fn sampled_norms(net: &Network, points: &[Vec<f64>], n: u32) -> Result<Vec<f64>> {
    let mut out = vec![0.0f64; net.output_dim()];
    for x in points {
        for (o, jet) in net.evaluate_jet(x, n)?.iter().enumerate() {
            for (_, v) in jet.partials() {
                out[o] = out[o].max(v.abs());
            }
        }
    }
    Ok(out)
}

fn box_points(lo: &[f64], hi: &[f64], per: usize) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![]];
    for (a, b) in lo.iter().zip(hi) {
        pts = pts
            .into_iter()
            .flat_map(|p: Vec<f64>| {
                (0..per).map(move |i| {
                    let mut q = p.clone();
                    q.push(a + (b - a) * i as f64 / (per - 1) as f64);
                    q
                })
            })
            .collect();
    }
    pts
}

/// |D^n (g o f)| sampled on [0,1]^d against the composition bound, with f
/// of norm at least one so the bound applies.
fn faa_di_bruno_case(n: u32, d: usize) -> Result<(f64, f64)> {
    let m = 2usize;
    let seed = (n * 10 + d as u32) as f64;
    let f = Network::new(
        vec![fixed_layer(seed, 3, d, 1.5)?, fixed_layer(seed + 1.0, m, 3, 2.5)?],
        NetMeta::new("inner"),
    )?;
    let g = Network::new(vec![fixed_layer(seed + 2.0, 3, m, 1.0)?, fixed_layer(seed + 3.0, 1, 3, 1.0)?], NetMeta::new("outer"))?;
    let points = box_points(&vec![0.0; d], &vec![1.0; d], 21);
    let f_norms = sampled_norms(&f, &points, n)?;
    let images: Vec<Vec<f64>> = points.iter().map(|x| f.evaluate_f64(x)).collect::<Result<_>>()?;
    let lo: Vec<f64> = (0..m).map(|i| images.iter().map(|v| v[i]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..m).map(|i| images.iter().map(|v| v[i]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let g_norm = sampled_norms(&g, &box_points(&lo, &hi, 21), n)?[0];
    let lhs = sampled_norms(&f.compose(&g)?, &points, n)?[0];
    let fmax = f_norms.iter().cloned().fold(0.0, f64::max);
    crate::error::ensure!(fmax >= 1.0, "inner network norm {fmax} below 1");
    Ok((lhs, faadibruno_bound(n, m, d, g_norm, &f_norms)?))
}

fn sin_2pi() -> Result<Box<dyn TargetFunction>> {
    make("sin_a", &CatalogParams { a: 2.0 * PI, ..Default::default() })
}

fn assembly_rows(rows: &mut Rows) {
    let (s, n) = (3u32, 4usize);
    for l in [0u32, 1] {
        rows.check("taylor_remainder", format!("f=sin_a a=2pi s={s} N={n} order={l}"), || {
            let f = sin_2pi()?;
            let bound = taylor_constant(1, l, s, f.seminorm(s)) / (n as f64).powi((s - l) as i32);
            let reach = 1.5 / n as f64;
            let mut worst: f64 = 0.0;
            for j in 1..=n {
                let c = (j as f64 - 0.5) / n as f64;
                let p = taylor_polynomial(f.as_ref(), &[c], s)?;
                for i in 0..=100 {
                    let y = (c - reach + 2.0 * reach * i as f64 / 100.0).clamp(0.0, 1.0);
                    for m in 0..=l {
                        worst = worst.max((f.partial(&[m], &[y]) - p.partial(&[m], &[y])).abs());
                    }
                }
            }
            Ok((worst, bound))
        });
    }
    rows.check("theorem_network", format!("d=1 f=sin_a a=2pi s={s} k=0 N={n} delta=0.5"), || {
        let f = sin_2pi()?;
        let p = plan(f.as_ref(), s, 0, n, 0.5)?;
        let net = assemble::<Hp>(f.as_ref(), &p)?;
        let grid = Grid::uniform(1, 401, 0.0, 1.0)?.with_cell_boundaries(n)?;
        Ok((sobolev_error(&net, f.as_ref(), 0, &grid)?.empirical(), p.guaranteed))
    });
    rows.check("theorem_widths", format!("d=1 s={s} N={n}"), || {
        let f = sin_2pi()?;
        let p = plan(f.as_ref(), s, 0, n, 0.5)?;
        let net = assemble::<f64>(f.as_ref(), &p)?;
        let (w1, w2) = predicted_widths(1, s, n)?;
        let h = net.hidden_widths();
        Ok(((h[0].abs_diff(w1) + h[1].abs_diff(w2)) as f64, 0.0))
    });
    rows.check("theorem_network", "d=2 f=product_sines a=pi s=2 k=0 N=4 delta=0.5".into(), || {
        let f = make("product_sines", &CatalogParams { a: PI, d: 2, coeffs: vec![] })?;
        let p = plan(f.as_ref(), 2, 0, 4, 0.5)?;
        let net = assemble::<Hp>(f.as_ref(), &p)?;
        let grid = Grid::uniform(2, 17, 0.0, 1.0)?;
        Ok((sobolev_error(&net, f.as_ref(), 0, &grid)?.empirical(), p.guaranteed))
    });
    rows.check("analytic_shallow", "f=exp_a a=0.25 s=5 delta=0.5".into(), || {
        let f = make("exp_a", &CatalogParams { a: 0.25, ..Default::default() })?;
        let net = assemble_shallow_analytic::<Hp>(f.as_ref(), 5, 0.5)?;
        let grid = Grid::uniform(1, 201, 0.0, 1.0)?;
        let report = sobolev_error(&net, f.as_ref(), 0, &grid)?.with_meta(&net.meta);
        Ok((report.empirical(), report.guaranteed.unwrap_or(f64::NAN)))
    });
}

/// The default ledger.
pub fn lemma_suite() -> Ledger {
    lemma_suite_with(Fault::None)
}

pub fn lemma_suite_with(fault: Fault) -> Ledger {
    let mut rows = Rows(Vec::new());
    tanh_rows(&mut rows);
    stencil_rows(&mut rows);
    monomial_rows(&mut rows, fault);
    product_rows(&mut rows);
    partition_rows(&mut rows);
    combinatorics_rows(&mut rows);
    calculus_rows(&mut rows);
    assembly_rows(&mut rows);
    Ledger { rows: rows.0 }
}
