use std::f64::consts::PI;
use std::time::Instant;

use proptest::prelude::*;

use super::*;
use crate::catalog::{make, CatalogParams};
use crate::netgraph::Layer;
use crate::tanh_calculus::tanh_derivative;

fn sin_a(a: f64) -> Box<dyn TargetFunction> {
    make("sin_a", &CatalogParams { a, ..Default::default() }).unwrap()
}

#[test]
fn grids() {
    assert_eq!(Grid::default_for(1).unwrap().len(), 10_000);
    assert_eq!(Grid::default_for(2).unwrap().len(), 10_000);
    assert_eq!(Grid::default_for(3).unwrap().len(), 27_000);
    let g = Grid::default_for(1).unwrap();
    let axis = &g.axes()[0];
    assert_eq!(axis[0], 0.0);
    assert!((axis[axis.len() - 1] - 1.0).abs() < 1e-15);
    let u = Grid::uniform(2, 3, -1.0, 1.0).unwrap();
    assert_eq!(u.point(0), vec![-1.0, -1.0]);
    assert_eq!(u.point(5), vec![0.0, 1.0]);
    let c = Grid::uniform(1, 5, 0.0, 1.0).unwrap().with_cell_boundaries(4).unwrap();
    // 5 nodes + 5 boundaries + 8 interior offsets
    assert_eq!(c.len(), 18);
    assert!(c.points().all(|x| (0.0..=1.0).contains(&x[0])));
    assert!(Grid::uniform(1, 1, 0.0, 1.0).is_err());
}

#[test]
fn exact_copy_has_zero_error() {
    let f = sin_a(2.0 * PI);
    let r = sobolev_error(&ExactCopy(f.as_ref()), f.as_ref(), 3, &Grid::default_for(1).unwrap()).unwrap();
    assert_eq!(r.seminorms, vec![0.0; 4]);
    assert_eq!(r.empirical(), 0.0);
    assert_eq!(r.slack(), None);
    assert!(r.within_bound());
}

#[test]
fn order_zero_is_a_sup_scan() {
    // fhat = tanh(x) against sin(x): k = 0 equals the plain sup of |f - fhat|.
    let net = Network::new(
        vec![Layer::new(1, 1, vec![1.0], vec![0.0]).unwrap(), Layer::new(1, 1, vec![1.0], vec![0.0]).unwrap()],
        NetMeta::new("t"),
    )
    .unwrap();
    let f = sin_a(1.0);
    let grid = Grid::uniform(1, 501, 0.0, 1.0).unwrap();
    let r = sobolev_error(&net, f.as_ref(), 0, &grid).unwrap();
    let scan = grid.points().map(|x| (x[0].sin() - x[0].tanh()).abs()).fold(0.0, f64::max);
    assert_eq!(r.empirical(), scan);
    let r1 = sobolev_error(&net, f.as_ref(), 1, &grid).unwrap();
    let d1 = grid
        .points()
        .map(|x| (x[0].cos() - tanh_derivative(1, x[0]).unwrap()).abs())
        .fold(0.0, f64::max);
    assert_eq!(r1.seminorms[0], scan);
    assert!((r1.seminorms[1] - d1).abs() < 1e-14);
    assert_eq!(r.precision, "double");
}

#[test]
fn report_reads_build_metadata() {
    let meta = NetMeta::new("x").tol("guaranteed", 0.5).tol("cancellation_floor", 1e-9).tol("warning", "floor too high");
    let r = ErrorReport {
        k: 0,
        grid: "g".into(),
        points: 3,
        seminorms: vec![0.7],
        guaranteed: None,
        precision: "double".into(),
        cancellation_floor: None,
        warning: None,
    };
    let plain = r.clone().with_guaranteed(0.5);
    assert!(!plain.within_bound() && plain.hard_failure());
    let warned = r.with_meta(&meta);
    assert_eq!(warned.guaranteed, Some(0.5));
    assert!(!warned.within_bound() && !warned.hard_failure());
    let csv = warned.to_csv().unwrap();
    assert!(csv.starts_with("quantity,value\n"));
    assert!(csv.contains("seminorm_0,7e-1"));
    assert!(warned.to_text().contains("warning: floor too high"));
}

#[test]
fn built_network_meets_its_tolerance() {
    let net = crate::monomial::build_odd_monomials::<crate::Hp>(3, 1.0, 1, 1e-3).unwrap();
    struct Cube;
    impl TargetFunction for Cube {
        fn dim(&self) -> usize {
            1
        }
        fn label(&self) -> String {
            "y^3".into()
        }
        fn partial(&self, beta: &[u32], x: &[f64]) -> f64 {
            match beta[0] {
                0 => x[0].powi(3),
                1 => 3.0 * x[0] * x[0],
                2 => 6.0 * x[0],
                3 => 6.0,
                _ => 0.0,
            }
        }
        fn seminorm(&self, _m: u32) -> f64 {
            6.0
        }
    }
    let r = sobolev_error_at(&net, 1, &Cube, 1, &Grid::uniform(1, 401, -1.0, 1.0).unwrap()).unwrap();
    assert!(r.empirical() <= 1e-3, "{r:?}");
    assert!(r.precision.starts_with("high:"));
}

#[test]
fn rate_fit_examples() {
    let pts: Vec<(f64, f64)> = [4.0, 8.0, 16.0, 32.0].iter().map(|&n: &f64| (n, 2.5 / n.powi(3))).collect();
    let fit = rate_fit(&pts).unwrap();
    assert!((fit.slope + 3.0).abs() < 1e-9);
    assert!(!fit.non_algebraic);
    let pts: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0].iter().map(|&n: &f64| (n, 0.3 * (-n).exp())).collect();
    let fit = rate_fit(&pts).unwrap();
    assert!(fit.non_algebraic);
    assert!(fit.local_slopes.windows(2).all(|w| w[1] < w[0]));
    assert!(rate_fit(&[(4.0, 1.0)]).is_err());
    assert!(rate_fit(&[(4.0, 1.0), (8.0, 0.0), (16.0, 0.1)]).is_err());
    assert!(rate_fit(&[(4.0, 1.0), (4.0, 0.5), (16.0, 0.1)]).is_err());
}

#[test]
fn fd_oracle_matches_formula() {
    for m in 1..=8u32 {
        for x in [-2.5, -0.4, 0.0, 0.9, 3.0] {
            let exact = tanh_derivative(m as usize, x).unwrap();
            assert!((fd_tanh_derivative(m, x) - exact).abs() <= 1e-10 * exact.abs().max(1.0), "m={m} x={x}");
        }
    }
}

#[test]
fn ledger_passes_is_deterministic_and_detects_faults() {
    let t = Instant::now();
    let a = lemma_suite();
    let elapsed = t.elapsed();
    let csv = a.to_csv().unwrap();
    assert!(a.rows.len() > 50);
    assert!(a.all_pass(), "failing rows: {:#?}", a.failures());
    assert!(csv.starts_with("lemma,params,value,bound,margin,pass\n"));
    eprintln!("ledger: {} rows in {elapsed:?}", a.rows.len());
    let b = lemma_suite();
    assert_eq!(csv, b.to_csv().unwrap());
    let broken = lemma_suite_with(Fault::MonomialWeight);
    let failed: Vec<&str> = broken.failures().iter().map(|r| r.lemma.as_str()).collect();
    assert!(!failed.is_empty());
    assert!(failed.iter().all(|l| *l == "odd_monomials"), "{failed:?}");
}

/// Richardson-extrapolated central differences of a random small network.
fn richardson(net: &Network, beta: &[u32], x: &[f64]) -> f64 {
    fn fd(net: &Network, beta: &[u32], x: &[f64], h: f64) -> f64 {
        let Some(axis) = beta.iter().position(|&b| b > 0) else {
            return net.evaluate_f64(x).unwrap()[0];
        };
        let mut lower = beta.to_vec();
        lower[axis] -= 1;
        let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
        xp[axis] += h;
        xm[axis] -= h;
        (fd(net, &lower, &xp, h) - fd(net, &lower, &xm, h)) / (2.0 * h)
    }
    let h = 1e-2;
    (4.0 * fd(net, beta, x, h / 2.0) - fd(net, beta, x, h)) / 3.0
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 20, ..ProptestConfig::default() })]
    #[test]
    fn jets_match_finite_differences(
        d in 1usize..=2,
        w in proptest::collection::vec(-1.0f64..1.0, 24),
        x in proptest::collection::vec(0.0f64..1.0, 2),
    ) {
        let l1 = Layer::new(3, d, w[..3 * d].to_vec(), w[6..9].to_vec()).unwrap();
        let l2 = Layer::new(2, 3, w[9..15].to_vec(), w[15..17].to_vec()).unwrap();
        let l3 = Layer::new(1, 2, w[17..19].to_vec(), w[19..20].to_vec()).unwrap();
        let net = Network::new(vec![l1, l2, l3], NetMeta::new("random")).unwrap();
        let x = &x[..d];
        let jet = &net.evaluate_jet(x, 2).unwrap()[0];
        for (beta, v) in jet.partials() {
            let fd = richardson(&net, &beta, x);
            prop_assert!((fd - v).abs() < 1e-6, "beta={:?} jet={} fd={}", beta, v, fd);
        }
    }
}
