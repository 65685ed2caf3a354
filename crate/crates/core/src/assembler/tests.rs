use std::f64::consts::PI;
use std::time::Instant;

use super::*;
use crate::catalog::{make, CatalogParams};
use crate::Hp;

struct Unit {
    s_norm: f64,
}

impl TargetFunction for Unit {
    fn dim(&self) -> usize {
        1
    }
    fn label(&self) -> String {
        "unit".into()
    }
    fn partial(&self, _beta: &[u32], _x: &[f64]) -> f64 {
        0.0
    }
    fn seminorm(&self, m: u32) -> f64 {
        if m == 0 { 0.0 } else { self.s_norm }
    }
}

fn sin_a(a: f64) -> Box<dyn TargetFunction> {
    make("sin_a", &CatalogParams { a, ..Default::default() }).unwrap()
}

fn sup_error(net: &Network<Hp>, f: &dyn TargetFunction, points: usize) -> f64 {
    (0..points)
        .map(|i| {
            let x = i as f64 / (points - 1) as f64;
            let v = net.evaluate(&net.lift_point(&[x])).unwrap()[0].to_f64();
            (v - f.evaluate(&[x])).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn taylor_examples() {
    let c = make("poly", &CatalogParams { coeffs: vec![2.5], ..Default::default() }).unwrap();
    let p = taylor_polynomial(c.as_ref(), &[0.3], 3).unwrap();
    assert_eq!(p.coefficient(&[0]), 2.5);
    assert_eq!(p.l1_nonconstant(), 0.0);
    let s = sin_a(1.0);
    let p = taylor_polynomial(s.as_ref(), &[0.0], 4).unwrap();
    let want = [0.0, 1.0, 0.0, -1.0 / 6.0];
    for (i, w) in want.iter().enumerate() {
        assert!((p.coefficient(&[i as u32]) - w).abs() < 1e-15);
    }
    // Re-expanded polynomial reproduces a cubic exactly.
    let cubic = make("poly", &CatalogParams { coeffs: vec![1.0, -2.0, 0.5, 3.0], ..Default::default() }).unwrap();
    let p = taylor_polynomial(cubic.as_ref(), &[0.7], 4).unwrap();
    for (i, w) in [1.0, -2.0, 0.5, 3.0].iter().enumerate() {
        assert!((p.coefficient(&[i as u32]) - w).abs() < 1e-13);
    }
}

#[test]
fn taylor_remainder_bound() {
    let f = sin_a(2.0 * PI);
    for n in [4usize, 8] {
        for s in [2u32, 3, 4] {
            for k in 0..s.min(3) {
                let center = [0.5 - 0.5 / n as f64];
                let p = taylor_polynomial(f.as_ref(), &center, s).unwrap();
                let half = 1.5 / n as f64;
                let fact: f64 = (1..=(s - k)).map(f64::from).product();
                let bound = (half).powi((s - k) as i32) / fact * f.seminorm(s);
                for i in 0..=200 {
                    let x = center[0] - half + 2.0 * half * i as f64 / 200.0;
                    for m in 0..=k {
                        let e = (p.partial(&[m], &[x]) - f.partial(&[m], &[x])).abs();
                        assert!(e <= bound * (1.0 + 1e-9) + 1e-13, "n={n} s={s} m={m}");
                    }
                }
            }
        }
    }
}

#[test]
fn plan_contracts_and_constants() {
    let u = Unit { s_norm: 1.0 };
    let p = plan(&u, 2, 0, 4, 0.5).unwrap();
    assert!((p.c_levels[0] - 1.125).abs() < 1e-15);
    assert!(plan(&u, 2, 0, 4, 0.9).is_err());
    assert!(plan(&u, 2, 0, 1, 0.5).is_err());
    assert!(plan(&u, 2, 2, 4, 0.5).is_err());
    let f = sin_a(2.0 * PI);
    for (s, k, n) in [(3, 0, 4), (3, 0, 16), (3, 1, 8), (4, 2, 4)] {
        let p = plan(f.as_ref(), s, k, n, 0.5).unwrap();
        assert!(p.eta * 6.0 * (n as f64).powi(s as i32) / (p.delta * p.c_const) <= 1.0 + 1e-12);
        let nf = n as f64;
        let bound1 = p.delta * p.c_const
            / (2f64.powi(((k + 1) * p.d as u32) as i32) * nf.powi(s as i32 + 1) * p.f_norm_k);
        assert!(p.eps <= bound1);
        if k >= 1 {
            assert!(p.eps <= p.delta * p.delta / (nf.powi((2 * s + 2 + k) as i32) * (k as f64).powi(k as i32)));
        }
        assert!(p.alpha >= nf * p.r);
        assert!(p.product_bound >= 1.0);
    }
}

#[test]
fn widths_match_formulas() {
    assert_eq!(predicted_widths(1, 3, 4).unwrap(), (9, 24));
    assert_eq!(predicted_widths(1, 1, 5).unwrap(), (4, 30));
    assert_eq!(predicted_widths(2, 2, 4).unwrap(), (9 + 6, 60 * 16));
    assert_eq!(shallow_width(1, 9).unwrap(), 15);
    let f = sin_a(2.0 * PI);
    let p = plan(f.as_ref(), 3, 0, 4, 0.5).unwrap();
    let net = assemble::<f64>(f.as_ref(), &p).unwrap();
    assert_eq!(net.hidden_widths(), vec![9, 24]);
}

#[test]
fn sine_network_meets_bound() {
    let f = sin_a(2.0 * PI);
    let p = plan(f.as_ref(), 3, 0, 8, 0.5).unwrap();
    let t = Instant::now();
    let net = assemble::<Hp>(f.as_ref(), &p).unwrap();
    let built = t.elapsed();
    let e = sup_error(&net, f.as_ref(), 1001);
    eprintln!("N=8 bits={} build={built:?} eval={:?} err={e:e} bound={:e}", net.bits(), t.elapsed() - built, p.guaranteed);
    assert!(e <= p.guaranteed);
    assert!(e <= 2e-2);
}

#[test]
fn constant_target_is_nearly_exact() {
    let c = make("poly", &CatalogParams { coeffs: vec![0.75], ..Default::default() }).unwrap();
    let p = plan(c.as_ref(), 2, 0, 4, 0.5).unwrap();
    let net = assemble::<Hp>(c.as_ref(), &p).unwrap();
    let e = sup_error(&net, c.as_ref(), 201);
    assert!(e <= p.guaranteed, "{e:e} vs {:e}", p.guaranteed);
}

#[test]
fn derivative_bound_k1() {
    let f = sin_a(PI);
    let p = plan(f.as_ref(), 3, 1, 4, 0.5).unwrap();
    let net = assemble::<Hp>(f.as_ref(), &p).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..=200 {
        let x = i as f64 / 200.0;
        let jet = net.evaluate_jet(&[x], 1).unwrap();
        for m in 0..=1u32 {
            let e = (jet[0].partial(&[m]).unwrap().to_f64() - f.partial(&[m], &[x])).abs();
            worst = worst.max(e);
        }
    }
    assert!(worst <= p.guaranteed, "{worst:e} vs {:e}", p.guaranteed);
}

#[test]
fn shallow_analytic() {
    let s2pi = sin_a(2.0 * PI);
    assert!(assemble_shallow_analytic::<f64>(s2pi.as_ref(), 3, 0.5).is_err());
    let slow = sin_a(0.25);
    assert!(assemble_shallow_analytic::<f64>(slow.as_ref(), 3, 0.5).is_ok());
    let f = make("exp_a", &CatalogParams { a: 0.25, ..Default::default() }).unwrap();
    let (q, r) = f.analytic().unwrap();
    let net = assemble_shallow_analytic::<Hp>(f.as_ref(), 7, 0.5).unwrap();
    assert_eq!(net.hidden_widths(), vec![12]);
    let e = sup_error(&net, f.as_ref(), 1001);
    assert!(e <= shallow_bound(1, q, r, 7, 0.5), "{e:e}");
    let one = assemble_shallow_analytic::<f64>(f.as_ref(), 1, 0.5).unwrap();
    assert_eq!(one.hidden_widths(), Vec::<usize>::new());
}

#[test]
fn two_dimensional_small() {
    let f = make("product_sines", &CatalogParams { a: PI, d: 2, coeffs: vec![] }).unwrap();
    let p = plan(f.as_ref(), 2, 0, 4, 0.5).unwrap();
    let t = Instant::now();
    let net = assemble::<Hp>(f.as_ref(), &p).unwrap();
    assert_eq!(net.hidden_widths(), vec![p.widths.0, p.widths.1]);
    let built = t.elapsed();
    let mut worst: f64 = 0.0;
    for i in 0..=20 {
        for j in 0..=20 {
            let x = [i as f64 / 20.0, j as f64 / 20.0];
            let v = net.evaluate(&net.lift_point(&x)).unwrap()[0].to_f64();
            worst = worst.max((v - f.evaluate(&x)).abs());
        }
    }
    eprintln!("d=2 N=4 bits={} build={built:?} eval441={:?} err={worst:e} bound={:e}", net.bits(), t.elapsed() - built, p.guaranteed);
    assert!(worst <= p.guaranteed);
}
