//! Acceptance run: one PASS/FAIL line per criterion, each with its measured
//! quantity and wall time. Exits nonzero when any criterion fails.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use tanhforge::assembler::{assemble, assemble_shallow_analytic, plan, predicted_widths, shallow_bound, TargetFunction};
use tanhforge::bounds::{min_width_search, theorem_widths, WidthRow, WidthVariant, SEARCH_MAX_N, SEARCH_MAX_S};
use tanhforge::catalog::{make, CatalogParams};
use tanhforge::combinatorics::{cardinality, enumerate, factorial};
use tanhforge::linalg::inf_norm;
use tanhforge::monomial::{
    build_all_monomials, build_multivariate_monomials, build_odd_monomials, dyson_inverse, StencilPlan,
};
use tanhforge::partition::{figure1_header, figure1_rows, PartitionSpec, PartitionTables};
use tanhforge::product::{build_product_deep, build_product_shallow};
use tanhforge::tanh_calculus::tanh_derivative;
use tanhforge::verifier::{fd_tanh_derivative, lemma_suite, rate_fit, sobolev_error, sobolev_error_at, Grid};
use tanhforge::{Hp, Network, Result};

/// x^exps with exact partials.
struct Power(Vec<u32>);

impl TargetFunction for Power {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn label(&self) -> String {
        format!("x^{:?}", self.0)
    }

    fn partial(&self, beta: &[u32], x: &[f64]) -> f64 {
        let mut v = 1.0;
        for ((&e, &b), &xi) in self.0.iter().zip(beta).zip(x) {
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

/// 401 uniform points plus 201 Chebyshev-Lobatto points on [-1, 1].
fn line() -> Result<Grid> {
    let mut axis: Vec<f64> = (0..=400).map(|i| -1.0 + i as f64 / 200.0).collect();
    axis.extend((0..=200).map(|i| (PI * i as f64 / 200.0).cos()));
    axis.sort_by(f64::total_cmp);
    axis.dedup();
    Grid::from_axes(vec![axis], "uniform+chebyshev[-1,1]")
}

fn worst_output(net: &Network<Hp>, outputs: &[(usize, Vec<u32>)], k: u32, grid: &Grid) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (o, exps) in outputs {
        worst = worst.max(sobolev_error_at(net, *o, &Power(exps.clone()), k, grid)?.empirical());
    }
    Ok(worst)
}

fn sin_2pi() -> Result<Box<dyn TargetFunction>> {
    make("sin_a", &CatalogParams { a: 2.0 * PI, ..Default::default() })
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn c1_tanh_calculus() -> Result<Outcome> {
    let (mut rel, mut ratio) = (0.0f64, 0.0f64);
    for m in 1..=8usize {
        for i in 0..=600 {
            let x = -3.0 + i as f64 / 100.0;
            let exact = tanh_derivative(m, x)?;
            let fd = fd_tanh_derivative(m as u32, x);
            // Below the oracle's resolution (640-bit rounding of the binomial sum
            // over h^m, 40 bits of margin) the reference is indistinguishable from 0.
            let resolution = 2f64.powi(m as i32) * 2f64.powi(-600) / 1e-15f64.powi(m as i32);
            rel = rel.max((exact - fd).abs() / fd.abs().max(resolution));
            let bound = (2.0 * m as f64).powi(m as i32 + 1) * (-2.0 * x.abs()).exp();
            ratio = ratio.max(exact.abs() / bound);
        }
    }
    outcome(rel <= 1e-6 && ratio <= 1.0, format!("max relative FD gap {rel:.2e} (<= 1e-6), max |derivative|/bound {ratio:.3}"))
}

fn c2_stencil() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for p in (1..=9u32).step_by(2) {
        let plan = StencilPlan::new(p, 1e-3, 1.0)?;
        let pfact = factorial(p)? as f64;
        for l in 0..=p + 1 {
            // sum_i (-1)^i binom(p,i) (p/2 - i)^l = p! [l = p] for l <= p + 1.
            let sum: f64 = plan.coefficients.iter().zip(&plan.nodes).map(|(&c, &t)| c as f64 * t.powi(l as i32)).sum();
            let want = if l == p { pfact } else { 0.0 };
            worst = worst.max((sum - want).abs() / pfact);
            let scaled = plan.scaled_moment(l);
            let scaled_want = if l == p { (1i128 << l) * pfact as i128 } else { 0 };
            if scaled != scaled_want {
                worst = f64::INFINITY;
            }
        }
    }
    outcome(worst <= 1e-6, format!("max moment deviation / p! {worst:.2e} over odd p <= 9, l <= p+1"))
}

fn c3_odd_monomials() -> Result<Outcome> {
    let grid = line()?;
    let (mut pass, mut worst_ratio) = (true, 0.0f64);
    for s in [3u32, 5, 7] {
        for k in [0u32, 1] {
            for eps in [1e-2, 1e-3] {
                let net = build_odd_monomials::<Hp>(s, 1.0, k, eps)?;
                pass &= net.hidden_widths() == vec![(s as usize).div_ceil(2)];
                let outs: Vec<(usize, Vec<u32>)> = (1..=s).step_by(2).map(|p| ((p as usize - 1) / 2, vec![p])).collect();
                let err = worst_output(&net, &outs, k, &grid)?;
                pass &= err <= eps;
                worst_ratio = worst_ratio.max(err / eps);
            }
        }
    }
    outcome(pass, format!("widths (s+1)/2, worst error/eps {worst_ratio:.3}"))
}

fn c4_all_monomials() -> Result<Outcome> {
    let grid = line()?;
    let eps = 1e-2;
    let (mut pass, mut worst_even) = (true, 0.0f64);
    let mut widths = Vec::new();
    for s in [3u32, 5] {
        for k in [0u32, 1] {
            let net = build_all_monomials::<Hp>(s, 1.0, k, eps)?;
            let w = net.hidden_widths();
            pass &= w == vec![3 * (s as usize + 1) / 2];
            widths.push(w[0]);
            let outs: Vec<(usize, Vec<u32>)> = (1..=s).map(|p| (p as usize - 1, vec![p])).collect();
            pass &= worst_output(&net, &outs, k, &grid)? <= eps;
            let even: Vec<(usize, Vec<u32>)> = outs.into_iter().filter(|(_, e)| e[0] % 2 == 0).collect();
            worst_even = worst_even.max(worst_output(&net, &even, k, &grid)?);
        }
    }
    outcome(pass && worst_even <= eps, format!("widths {widths:?}, worst even-power error {worst_even:.2e} (<= {eps:e})"))
}

fn c5_dyson() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for n in 1..=4u32 {
        for q in 1..=4usize {
            let (set, inv, _) = dyson_inverse::<Hp>(n, q)?;
            let card = cardinality(n, q)? as f64;
            let bound = (factorial(n)? as f64).powi(3) * card * card * 2f64.powi(n as i32);
            worst = worst.max(inf_norm(&inv, set.len()) / bound);
        }
    }
    let eps = 1e-2;
    let net = build_multivariate_monomials::<Hp>(2, 2, 1.0, 0, eps)?;
    let outs: Vec<(usize, Vec<u32>)> = enumerate(2, 2)?.members().iter().cloned().enumerate().collect();
    let err = worst_output(&net, &outs, 0, &Grid::uniform(2, 41, -1.0, 1.0)?)?;
    outcome(
        worst <= 1.0 && err <= eps,
        format!("max ||D^-1|| / bound {worst:.2e}, multivariate n=q=2 error {err:.2e} on 41^2 (<= {eps:e})"),
    )
}

fn product_grid(d: usize) -> Result<Grid> {
    let per = match d {
        2 => 41,
        3 => 21,
        4 => 11,
        _ => 7,
    };
    Grid::uniform(d, per, -1.0, 1.0)
}

fn c6_products() -> Result<Outcome> {
    let eps = 1e-2;
    let mut pass = true;
    let mut notes = String::new();
    for d in [2usize, 3] {
        let net = build_product_shallow::<Hp>(d, 1.0, 0, eps)?;
        let err = sobolev_error(&net, &Power(vec![1; d]), 0, &product_grid(d)?)?.empirical();
        pass &= err <= eps;
        write!(notes, "shallow d={d} {err:.1e}; ").ok();
    }
    for d in [2usize, 4, 5] {
        let net = build_product_deep::<Hp>(d, 1.0, 0, eps)?;
        let err = sobolev_error(&net, &Power(vec![1; d]), 0, &product_grid(d)?)?.empirical();
        let widths = net.hidden_widths();
        let depth = (d as f64).log2().ceil() as usize;
        pass &= err <= eps && widths.len() == depth && widths.iter().all(|&w| w <= 3 * d);
        write!(notes, "deep d={d} {err:.1e} widths {widths:?}; ").ok();
    }
    outcome(pass, notes.trim_end_matches("; ").to_string())
}

fn c7_partition() -> Result<Outcome> {
    let eps = 1e-2;
    let (mut pass, mut close_ratio, mut far_ratio) = (true, 0.0f64, 0.0f64);
    for d in [1usize, 2] {
        for n in [7usize, 16] {
            for k in [0u32, 1] {
                let spec = PartitionSpec::new(d, n, k, eps)?;
                let tables = PartitionTables::new(&spec)?;
                for j in tables.cells() {
                    let close = tables.close(&j)?;
                    pass &= close.passed();
                    close_ratio = close_ratio.max(close.value / spec.close_bound());
                    if let Some(far) = tables.worst_far(&j)? {
                        pass &= far.passed();
                        far_ratio = far_ratio.max(far.value / spec.far_bound());
                    }
                }
            }
        }
    }
    // The one-dimensional picture with N = 7.
    let spec = PartitionSpec::new(1, 7, 0, eps)?;
    let rows = figure1_rows(&spec, 7 * 200 + 1)?;
    let near_min = rows.iter().map(|r| r[spec.n + 1]).fold(f64::INFINITY, f64::min);
    let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("figure1.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| tanhforge::Error::Contract(e.to_string()))?;
    w.write_record(figure1_header(spec.n)).map_err(|e| tanhforge::Error::Contract(e.to_string()))?;
    for r in &rows {
        w.write_record(r.iter().map(|v| format!("{v:.9}"))).map_err(|e| tanhforge::Error::Contract(e.to_string()))?;
    }
    w.flush().map_err(|e| tanhforge::Error::Contract(e.to_string()))?;
    outcome(
        pass && near_min >= 0.99,
        format!(
            "worst near/bound {close_ratio:.3}, worst far/bound {far_ratio:.3}, N=7 min near sum {near_min:.5} ({})",
            path.display()
        ),
    )
}

fn c8_theorem_d1() -> Result<Outcome> {
    let f = sin_2pi()?;
    let s = 3u32;
    let mut pass = true;
    let mut points = Vec::new();
    let mut notes = String::new();
    for n in [4usize, 8, 16] {
        let p = plan(f.as_ref(), s, 0, n, 0.5)?;
        let net = assemble::<Hp>(f.as_ref(), &p)?;
        let h = net.hidden_widths();
        let (f1, f2) = theorem_widths(1, s, n)?;
        let predicted = predicted_widths(1, s, n)?;
        pass &= h.len() == 2 && h[0] as u128 <= f1 && h[1] as u128 <= f2 && (h[0], h[1]) == predicted;
        // (1+delta) C(1,0,3,f) / N^3 is the plan's guarantee at k = 0.
        let grid = Grid::default_for(1)?.with_cell_boundaries(n)?;
        let err = sobolev_error(&net, f.as_ref(), 0, &grid)?.empirical();
        pass &= err <= p.guaranteed;
        points.push((n as f64, err));
        write!(notes, "N={n} widths {h:?} error {err:.2e} <= {:.2e}; ", p.guaranteed).ok();
    }
    let fit = rate_fit(&points)?;
    pass &= fit.slope <= -2.75;
    write!(notes, "slope {:.3}", fit.slope).ok();
    outcome(pass, notes)
}

fn c9_theorem_d2() -> Result<Outcome> {
    let f = make("product_sines", &CatalogParams { a: PI, d: 2, coeffs: vec![] })?;
    let d = 2usize;
    let mut pass = true;
    let mut notes = String::new();
    for n in [4usize, 8] {
        let p = plan(f.as_ref(), 2, 0, n, 0.5)?;
        let net = assemble::<Hp>(f.as_ref(), &p)?;
        let h = net.hidden_widths();
        let formula = 3 * (d + 2).div_ceil(2) * cardinality(3, 3)? as usize * n * n;
        pass &= h.len() == 2 && h[1] == formula;
        let grid = Grid::default_for(d)?.with_cell_boundaries(n)?;
        let err = sobolev_error(&net, f.as_ref(), 0, &grid)?.empirical();
        pass &= err <= p.guaranteed;
        write!(notes, "N={n} width2 {} (formula {formula}) error {err:.2e} <= {:.2e}; ", h[1], p.guaranteed).ok();
    }
    outcome(pass, notes.trim_end_matches("; ").to_string())
}

fn c10_analytic_shallow() -> Result<Outcome> {
    let f = make("exp_a", &CatalogParams { a: 0.25, ..Default::default() })?;
    let (q, r) = f.analytic().expect("exp_a is analytic");
    let grid = Grid::default_for(1)?;
    let mut pass = true;
    let mut errors = Vec::new();
    for s in [3u32, 5, 7, 9] {
        let net = assemble_shallow_analytic::<Hp>(f.as_ref(), s, 0.5)?;
        let err = sobolev_error(&net, f.as_ref(), 0, &grid)?.empirical();
        pass &= err <= shallow_bound(1, q, r, s, 0.5);
        errors.push(err);
    }
    let worst_ratio = errors.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    pass &= worst_ratio <= 0.5;
    let shown: Vec<String> = errors.iter().map(|e| format!("{e:.2e}")).collect();
    outcome(pass, format!("errors s=3,5,7,9 [{}], worst ratio per +2 {worst_ratio:.3}", shown.join(", ")))
}

/// Direct product form of (base^s / s!) < eps.
fn feasible(a: f64, s: u32, n: usize, eps: f64) -> bool {
    let base = if n == 1 { a / 2.0 } else { 1.5 * a / n as f64 };
    (1..=s).map(|i| base / i as f64).product::<f64>() < eps
}

/// (width, s, N) of the two-layer optimum and (width, s) of the shallow one.
type Optima = (Option<(usize, u32, usize)>, Option<(usize, u32)>);

/// Exhaustive scan: every s, and for each s the first feasible N (larger N
/// only widens the second layer).
fn brute_force(a: f64, eps: f64) -> Optima {
    let mut best: Option<(usize, u32, usize)> = None;
    for s in 1..=SEARCH_MAX_S {
        if let Some(n) = (2..=SEARCH_MAX_N).find(|&n| feasible(a, s, n, eps)) {
            let width = (3 * s.div_ceil(2) as usize + n - 1).max(6 * n);
            let cand = (width, s, n);
            if best.is_none_or(|b| cand < b) {
                best = Some(cand);
            }
        }
    }
    let shallow = (1..=SEARCH_MAX_S).find(|&s| feasible(a, s, 1, eps)).map(|s| (3 * s.div_ceil(2) as usize, s));
    (best, shallow)
}

fn c11_min_width() -> Result<Outcome> {
    let tolerances: Vec<f64> = (1..=7).map(|e| 10f64.powi(-e)).collect();
    let mut pass = true;
    let mut notes = String::new();
    for a in [2.0 * PI, 4.0 * PI, 8.0 * PI] {
        let rows = min_width_search(a, &tolerances)?;
        for &eps in &tolerances {
            let of = |v: WidthVariant| -> Option<&WidthRow> { rows.iter().find(|r| r.tolerance == eps && r.variant == v) };
            let (two, shallow) = brute_force(a, eps);
            pass &= of(WidthVariant::TwoLayer).map(|r| (r.width, r.s, r.n)) == two;
            pass &= of(WidthVariant::Shallow).map(|r| (r.width, r.s)) == shallow;
        }
        for v in [WidthVariant::TwoLayer, WidthVariant::Shallow] {
            let widths: Vec<usize> = rows.iter().filter(|r| r.variant == v).map(|r| r.width).collect();
            pass &= widths.windows(2).all(|w| w[1] >= w[0]);
            if v == WidthVariant::TwoLayer {
                write!(notes, "a={a:.3} two-layer {widths:?}; ").ok();
            }
        }
    }
    outcome(pass, notes.trim_end_matches("; ").to_string())
}

fn c12_sparsity() -> Result<Outcome> {
    let f = sin_2pi()?;
    let (ss, ns) = ([2u32, 3, 4], [2usize, 4, 8]);
    let mut table = vec![vec![0.0; ns.len()]; ss.len()];
    for (i, &s) in ss.iter().enumerate() {
        for (j, &n) in ns.iter().enumerate() {
            let p = plan(f.as_ref(), s, 0, n, 0.5)?;
            table[i][j] = assemble::<Hp>(f.as_ref(), &p)?.sparsity();
        }
    }
    let in_range = table.iter().flatten().all(|&v| v > 0.0 && v <= 1.0);
    let up_in_s = (0..ns.len()).all(|j| (1..ss.len()).all(|i| table[i][j] >= table[i - 1][j]));
    let down_in_n = table.iter().all(|row| row.windows(2).all(|w| w[1] <= w[0]));
    let shown: Vec<String> =
        table.iter().map(|r| r.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(" ")).collect();
    outcome(in_range && up_in_s && down_in_n, format!("rows s=2,3,4 x cols N=2,4,8: [{}]", shown.join(" | ")))
}

fn c13_ledger() -> Result<Outcome> {
    let first = lemma_suite();
    let second = lemma_suite();
    let (a, b) = (first.to_csv()?, second.to_csv()?);
    let failures = first.failures().len();
    outcome(failures == 0 && a == b, format!("{} rows, {failures} failing, identical CSV {}", first.rows.len(), a == b))
}

type Criterion = (u32, &'static str, Duration, fn() -> Result<Outcome>);

fn main() -> ExitCode {
    let criteria: [Criterion; 13] = [
        (1, "tanh calculus", Duration::from_secs(1), c1_tanh_calculus),
        (2, "stencil exactness", Duration::from_secs(1), c2_stencil),
        (3, "odd monomials", Duration::from_secs(10), c3_odd_monomials),
        (4, "all monomials", Duration::from_secs(10), c4_all_monomials),
        (5, "dyson machinery", Duration::from_secs(20), c5_dyson),
        (6, "products", Duration::from_secs(30), c6_products),
        (7, "partition of unity", Duration::from_secs(30), c7_partition),
        (8, "two-layer network d=1", Duration::from_secs(120), c8_theorem_d1),
        (9, "two-layer network d=2", Duration::from_secs(300), c9_theorem_d2),
        (10, "analytic shallow path", Duration::from_secs(30), c10_analytic_shallow),
        (11, "minimal width search", Duration::from_secs(10), c11_min_width),
        (12, "sparsity trend", Duration::from_secs(60), c12_sparsity),
        (13, "property ledger", Duration::from_secs(600), c13_ledger),
    ];
    let mut failed = 0;
    for (id, name, limit, run) in criteria {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed <= limit, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {name}: {} | {detail} | {:.2}s (limit {}s)",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("acceptance: {} of 13 criteria passed", 13 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
