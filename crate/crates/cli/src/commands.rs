use std::fs;

use clap::ValueEnum;
use serde_json::Value;
use tanhforge::assembler::{assemble, assemble_shallow_analytic, plan, shallow_bound, shallow_width, TargetFunction};
use tanhforge::bounds::{
    analytic_bounds, entire_function_width, exp_rate_bound, general_widths, lipschitz_bound, min_width_search,
    theorem_widths,
};
use tanhforge::catalog::{make, CatalogParams, LABELS};
use tanhforge::netgraph::{from_document, to_document, NetworkDocument};
use tanhforge::scalar::{with_bits, Real};
use tanhforge::verifier::{
    lemma_suite_with, meta_warning, rate_fit, sobolev_error, ErrorReport, Fault, Grid,
};
use tanhforge::{Hp, Network};

use crate::args::{BoundsArgs, BuildArgs, BuildMode, FaultArg, FunctionArgs, LemmaArgs, SweepArgs, VerifyArgs};
use crate::output::{num, opt, write, Manifest, Table};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Precision {
    Auto,
    Double,
    High(u32),
}

impl Precision {
    fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "auto" => Ok(Self::Auto),
            "double" => Ok(Self::Double),
            _ => s
                .strip_prefix("high:")
                .and_then(|b| b.parse::<u32>().ok())
                .filter(|&b| (53..=100_000).contains(&b))
                .map(Self::High)
                .ok_or_else(|| CliError::Usage(format!("--precision must be double, auto or high:BITS (53..=100000), got {s:?}"))),
        }
    }
}

fn target(f: &FunctionArgs) -> Result<Box<dyn TargetFunction>, CliError> {
    target_from(&f.function, f.a.first().copied().unwrap_or(1.0), f.d, &f.coeffs)
}

fn target_from(label: &str, a: f64, d: usize, coeffs: &[f64]) -> Result<Box<dyn TargetFunction>, CliError> {
    if !LABELS.contains(&label) {
        return Err(CliError::Usage(format!("unknown function {label:?} (known: {})", LABELS.join(", "))));
    }
    let coeffs = if coeffs.is_empty() { CatalogParams::default().coeffs } else { coeffs.to_vec() };
    let f = make(label, &CatalogParams { a, d, coeffs })?;
    if f.dim() != d {
        return Err(CliError::Usage(format!("{label} is one-dimensional; drop --d {d}")));
    }
    Ok(f)
}

fn construct<T: Real>(f: &dyn TargetFunction, a: &BuildArgs) -> Result<Network<T>, CliError> {
    Ok(match a.mode {
        BuildMode::Theorem => assemble::<T>(f, &plan(f, a.s, a.k, a.n, a.delta)?)?,
        BuildMode::Lipschitz => assemble::<T>(f, &plan(f, 1, 0, a.n, a.delta)?)?,
        BuildMode::AnalyticShallow => assemble_shallow_analytic::<T>(f, a.s, a.delta)?,
    })
}

/// Network document and precision label for the requested precision mode.
fn build_document(f: &dyn TargetFunction, a: &BuildArgs) -> Result<(String, Network<f64>, String), CliError> {
    let high = |bits: u32| -> Result<(String, Network<f64>, String), CliError> {
        let net = with_bits(bits, || construct::<Hp>(f, a))?;
        Ok((to_document(&net), net.to_f64(), format!("high:{}", net.bits())))
    };
    match Precision::parse(&a.precision)? {
        Precision::Double => {
            let net = construct::<f64>(f, a)?;
            Ok((to_document(&net), net, "double".into()))
        }
        Precision::High(bits) => high(bits),
        Precision::Auto => {
            let net = construct::<f64>(f, a)?;
            if meta_warning(&net.meta).is_some() {
                let (doc, view, label) = high(tanhforge::scalar::DEFAULT_BITS)?;
                Ok((doc, view, format!("{label} (double build warned)")))
            } else {
                Ok((to_document(&net), net, "double".into()))
            }
        }
    }
}

pub fn build(a: &BuildArgs) -> Result<(), CliError> {
    let f = target(&a.function)?;
    let d = f.dim();
    let (doc, net, precision) = build_document(f.as_ref(), a)?;
    let realized = net.hidden_widths();
    let mut m = Manifest::default();
    m.set("command", "build");
    m.set("mode", a.mode.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default());
    m.set("function", f.label());
    m.set("d", d);
    let (s, k) = if a.mode == BuildMode::Lipschitz { (1, 0) } else { (a.s, a.k) };
    m.set("s", s);
    m.set("k", k);
    m.set("delta", a.delta);
    m.set("precision", &precision);
    let formula: Vec<u128> = match a.mode {
        BuildMode::AnalyticShallow => vec![shallow_width(d, s)? as u128],
        BuildMode::Theorem => {
            m.set("N", a.n);
            let (w1, w2) = theorem_widths(d, s, a.n)?;
            vec![w1, w2]
        }
        BuildMode::Lipschitz => {
            m.set("N", a.n);
            let lip = lipschitz_bound(d, f.seminorm(1), a.n)?;
            m.set("lipschitz_bound", num(lip.bound));
            vec![lip.w1, lip.w2]
        }
    };
    for (i, w) in formula.iter().enumerate() {
        let r = realized.get(i).copied().unwrap_or(0) as u128;
        m.set(&format!("formula_width_{}", i + 1), w);
        m.set(&format!("realized_width_{}", i + 1), r);
        m.set(&format!("width_slack_{}", i + 1), *w as i128 - r as i128);
    }
    let guaranteed = net.meta.tolerances.get("guaranteed").and_then(Value::as_f64);
    m.set("guaranteed_bound", opt(guaranteed));
    if let Some((q, r)) = f.analytic() {
        m.set("analytic_Q", q);
        m.set("analytic_R", r);
        if a.mode == BuildMode::AnalyticShallow {
            m.set("analytic_shallow_bound", num(shallow_bound(d, q, r, s, a.delta)));
        } else if let Ok(b) = analytic_bounds(d, q, r, s, a.n, a.delta) {
            m.set("analytic_two_layer_bound", num(b.two_layer));
        }
    }
    m.set("sparsity", net.sparsity());
    m.set("parameter_count", net.parameter_count());
    m.set("max_abs_weight", num(net.max_abs_weight()));
    for (key, v) in &net.meta.tolerances {
        if key != "guaranteed" && key != "warning" {
            m.set(&format!("tolerance.{key}"), v);
        }
    }
    m.set("warnings", meta_warning(&net.meta).unwrap_or_else(|| "none".into()));
    write(&a.out, "network.json", &doc)?;
    write(&a.out, "manifest.txt", &m.text())?;
    print!("{}", m.text());
    Ok(())
}

fn grid_for(d: usize, points: Option<usize>, cells: Option<usize>) -> Result<Grid, CliError> {
    let g = match points {
        Some(p) => Grid::clustered(d, p)?,
        None => Grid::default_for(d)?,
    };
    Ok(match cells {
        Some(n) => g.with_cell_boundaries(n)?,
        None => g,
    })
}

pub fn verify(a: &VerifyArgs) -> Result<(), CliError> {
    let f = target(&a.function)?;
    let text = fs::read_to_string(&a.net)?;
    let doc: NetworkDocument =
        serde_json::from_str(&text).map_err(|e| tanhforge::Error::Parse { path: a.net.display().to_string(), message: e.to_string() })?;
    let warned = meta_warning(&doc.meta).is_some();
    let cells = doc.meta.parameters.get("N").and_then(Value::as_u64).map(|n| n as usize);
    let grid = grid_for(f.dim(), a.grid, cells)?;
    let mut report = match Precision::parse(&a.precision)? {
        Precision::Double => sobolev_error(&from_document::<f64>(&text)?, f.as_ref(), a.k, &grid)?,
        Precision::High(bits) => with_bits(bits, || -> Result<ErrorReport, CliError> {
            Ok(sobolev_error(&from_document::<Hp>(&text)?, f.as_ref(), a.k, &grid)?)
        })?,
        Precision::Auto if warned || doc.exact.is_some() => {
            sobolev_error(&from_document::<Hp>(&text)?, f.as_ref(), a.k, &grid)?
        }
        Precision::Auto => sobolev_error(&from_document::<f64>(&text)?, f.as_ref(), a.k, &grid)?,
    }
    .with_meta(&doc.meta);
    // A bound certified for order k says nothing about higher orders.
    let built_k = doc.meta.parameters.get("k").and_then(Value::as_u64);
    if built_k.is_some_and(|bk| u64::from(a.k) > bk) {
        report.guaranteed = None;
    }
    let csv = report.to_csv()?;
    print!("{csv}");
    if let Some(dir) = &a.out {
        let mut m = Manifest::default();
        m.set("command", "verify");
        m.set("network", a.net.display());
        m.set("function", f.label());
        m.set("builder", &doc.meta.builder);
        m.set("guaranteed_bound", opt(report.guaranteed));
        m.set("empirical_error", num(report.empirical()));
        m.set("slack", opt(report.slack()));
        m.set("precision", &report.precision);
        m.set("grid", format!("{} ({} points)", report.grid, report.points));
        m.set("cancellation_floor", opt(report.cancellation_floor));
        m.set("warnings", report.warning.clone().unwrap_or_else(|| "none".into()));
        write(dir, "report.csv", &csv)?;
        write(dir, "manifest.txt", &m.text())?;
    }
    if report.hard_failure() {
        return Err(CliError::Violation(format!(
            "empirical error {:e} exceeds the guaranteed bound {}",
            report.empirical(),
            opt(report.guaranteed)
        )));
    }
    Ok(())
}

pub fn bounds(a: &BoundsArgs) -> Result<(), CliError> {
    let (name, csv) = if a.figure2 { ("figure2.csv", figure2(a)?) } else { ("bounds.csv", bound_table(a)?) };
    print!("{csv}");
    if let Some(dir) = &a.out {
        write(dir, name, &csv)?;
    }
    Ok(())
}

fn figure2(a: &BoundsArgs) -> Result<String, CliError> {
    if a.tolerances.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
        return Err(CliError::Usage("tolerances must lie in (0, 1)".into()));
    }
    let mut t = Table::new(&["a", "tolerance", "variant", "s", "N", "width"]);
    for &freq in &a.a {
        for r in min_width_search(freq, &a.tolerances)? {
            t.push(vec![num(r.a), num(r.tolerance), r.variant.name().into(), r.s.to_string(), r.n.to_string(), r.width.to_string()]);
        }
    }
    t.to_csv()
}

/// C with |f|_{W^{m,inf}} <= C^m for m <= 12, as used by the entire-function width.
fn growth_constant(f: &dyn TargetFunction) -> f64 {
    (1..=12).map(|m| f.seminorm(m).powf(1.0 / m as f64)).fold(f64::MIN_POSITIVE, f64::max)
}

fn bound_table(a: &BoundsArgs) -> Result<String, CliError> {
    let label = a.function.as_deref().ok_or_else(|| CliError::Usage("bounds needs --f or --figure2".into()))?;
    let f = target_from(label, a.a.first().copied().unwrap_or(1.0), a.d, &a.coeffs)?;
    let d = f.dim();
    let mut t = Table::new(&[
        "N",
        "formula_width_1",
        "formula_width_2",
        "general_width_1",
        "general_width_2",
        "C",
        "guaranteed",
        "analytic_two_layer",
        "analytic_shallow",
        "lipschitz",
        "exp_rate",
        "entire_width",
    ]);
    for &n in &a.n {
        let p = plan(f.as_ref(), a.s, a.k, n, a.delta)?;
        let (w1, w2) = theorem_widths(d, a.s, n)?;
        let (g1, g2) = general_widths(d, a.s, n)?;
        let (two, shallow) = match f.analytic() {
            Some((q, r)) => {
                let b = analytic_bounds(d, q, r, a.s, n, a.delta)?;
                (Some(b.two_layer), b.shallow)
            }
            None => (None, None),
        };
        let lip = (n > 5 * d * d).then(|| lipschitz_bound(d, f.seminorm(1), n)).transpose()?.map(|l| l.bound);
        let rate = match f.analytic() {
            Some((q, r)) => Some(exp_rate_bound(d, a.k, q, r, 1.0, a.delta, n as f64)?.bound),
            None => None,
        };
        let entire = entire_function_width(d, growth_constant(f.as_ref()), n as u64)?;
        t.push(vec![
            n.to_string(),
            w1.to_string(),
            w2.to_string(),
            g1.to_string(),
            g2.to_string(),
            num(p.c_const),
            num(p.guaranteed),
            opt(two),
            opt(shallow),
            opt(lip),
            opt(rate),
            entire.width.to_string(),
        ]);
    }
    t.to_csv()
}

pub fn sweep(a: &SweepArgs) -> Result<(), CliError> {
    let f = target(&a.function)?;
    let d = f.dim();
    let precision = Precision::parse(&a.precision)?;
    let mut rows = Table::new(&[
        "s",
        "N",
        "k",
        "width_1",
        "width_2",
        "formula_width_1",
        "formula_width_2",
        "sparsity",
        "empirical",
        "guaranteed",
        "slack",
        "within_bound",
        "precision",
        "warning",
    ]);
    let mut fits = Table::new(&["s", "slope", "non_algebraic", "local_slopes"]);
    let mut violations = Vec::new();
    for &s in &a.s {
        let mut points = Vec::new();
        for &n in &a.n {
            let p = plan(f.as_ref(), s, a.k, n, a.delta)?;
            let grid = grid_for(d, a.grid, Some(n))?;
            let (report, widths, sparsity) = match precision {
                Precision::Double => {
                    let net = assemble::<f64>(f.as_ref(), &p)?;
                    (sobolev_error(&net, f.as_ref(), a.k, &grid)?.with_meta(&net.meta), net.hidden_widths(), net.sparsity())
                }
                Precision::High(bits) => with_bits(bits, || -> Result<_, CliError> {
                    let net = assemble::<Hp>(f.as_ref(), &p)?;
                    Ok((sobolev_error(&net, f.as_ref(), a.k, &grid)?.with_meta(&net.meta), net.hidden_widths(), net.sparsity()))
                })?,
                Precision::Auto => {
                    let net = assemble::<Hp>(f.as_ref(), &p)?;
                    (sobolev_error(&net, f.as_ref(), a.k, &grid)?.with_meta(&net.meta), net.hidden_widths(), net.sparsity())
                }
            };
            let (fw1, fw2) = theorem_widths(d, s, n)?;
            if report.hard_failure() {
                violations.push(format!("s={s} N={n}: {:e} > {}", report.empirical(), opt(report.guaranteed)));
            }
            points.push((n as f64, report.empirical()));
            rows.push(vec![
                s.to_string(),
                n.to_string(),
                a.k.to_string(),
                widths[0].to_string(),
                widths[1].to_string(),
                fw1.to_string(),
                fw2.to_string(),
                sparsity.to_string(),
                num(report.empirical()),
                opt(report.guaranteed),
                opt(report.slack()),
                report.within_bound().to_string(),
                report.precision.clone(),
                report.warning.clone().unwrap_or_default(),
            ]);
        }
        if points.len() >= 3 && points.iter().all(|p| p.1 > 0.0) {
            let fit = rate_fit(&points)?;
            let local: Vec<String> = fit.local_slopes.iter().map(|v| format!("{v:.4}")).collect();
            fits.push(vec![s.to_string(), format!("{:.6}", fit.slope), fit.non_algebraic.to_string(), local.join(";")]);
        }
    }
    let (rows, fits) = (rows.to_csv()?, fits.to_csv()?);
    print!("{rows}\n{fits}");
    if let Some(dir) = &a.out {
        write(dir, "sweep.csv", &rows)?;
        write(dir, "fit.csv", &fits)?;
    }
    if !violations.is_empty() {
        return Err(CliError::Violation(violations.join("; ")));
    }
    Ok(())
}

pub fn lemma_check(a: &LemmaArgs) -> Result<(), CliError> {
    let fault = match a.fault {
        FaultArg::None => Fault::None,
        FaultArg::MonomialWeight => Fault::MonomialWeight,
    };
    let ledger = lemma_suite_with(fault);
    let csv = ledger.to_csv()?;
    print!("{csv}");
    if let Some(dir) = &a.out {
        write(dir, "ledger.csv", &csv)?;
    }
    let failed = ledger.failures();
    if !failed.is_empty() {
        let names: Vec<String> = failed.iter().map(|r| format!("{} [{}]", r.lemma, r.params)).collect();
        return Err(CliError::Violation(format!("{} failing rows: {}", failed.len(), names.join(", "))));
    }
    Ok(())
}

pub fn catalog() -> Result<(), CliError> {
    let notes = [
        ("sin_a", "sin(a x) on [0,1]"),
        ("cos_a", "cos(a x) on [0,1]"),
        ("exp_a", "exp(a x) on [0,1]"),
        ("poly", "c0 + c1 x + ... from --coeffs"),
        ("runge", "1 / (1 + a^2 x^2)"),
        ("gaussian", "exp(-(a x)^2)"),
        ("product_sines", "prod_i sin(a x_i) on [0,1]^d"),
    ];
    for (label, note) in notes {
        debug_assert!(LABELS.contains(&label));
        println!("{label}\t{note}");
    }
    Ok(())
}
