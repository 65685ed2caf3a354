use super::*;
use crate::scalar::with_exact_bits;

struct Lcg(u64);
impl Lcg {
    fn next(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((self.0 >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }
    fn vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.next()).collect()
    }
}

fn random_net(dims: &[usize], seed: u64) -> TanhNetwork {
    let mut r = Lcg(seed);
    let layers = dims
        .windows(2)
        .map(|p| Layer::new(p[1], p[0], r.vec(p[0] * p[1]), r.vec(p[1])).unwrap())
        .collect();
    Network::new(layers, NetMeta::new("random")).unwrap()
}

#[test]
fn identity_affine_net() {
    let net = TanhNetwork::affine(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0]).unwrap();
    assert_eq!(net.evaluate(&[0.3, -2.0]).unwrap(), vec![0.3, -2.0]);
}

#[test]
fn single_neuron() {
    let net = Network::new(
        vec![Layer::new(1, 1, vec![2.0], vec![1.0]).unwrap(), Layer::new(1, 1, vec![1.0], vec![0.0]).unwrap()],
        NetMeta::default(),
    )
    .unwrap();
    assert_eq!(net.evaluate(&[0.0]).unwrap()[0], 1f64.tanh());
    assert!(net.evaluate(&[0.0, 1.0]).is_err());
}

#[test]
fn construction_rejects_bad_shapes_and_nonfinite() {
    assert!(Layer::new(2, 2, vec![1.0; 3], vec![0.0; 2]).is_err());
    assert!(Layer::new(1, 1, vec![f64::NAN], vec![0.0]).is_err());
    let a = Layer::new(3, 1, vec![1.0; 3], vec![0.0; 3]).unwrap();
    let b = Layer::new(1, 2, vec![1.0; 2], vec![0.0]).unwrap();
    assert!(Network::new(vec![a, b], NetMeta::default()).is_err());
}

#[test]
fn linear_jet_is_the_weight_matrix() {
    let net = TanhNetwork::affine(2, 2, vec![1.5, -2.0, 0.25, 3.0], vec![1.0, 2.0]).unwrap();
    let jets = net.evaluate_jet(&[0.5, -0.5], 3).unwrap();
    assert_eq!(jets[0].partial(&[1, 0]).unwrap(), 1.5);
    assert_eq!(jets[0].partial(&[0, 1]).unwrap(), -2.0);
    assert_eq!(jets[1].partial(&[1, 0]).unwrap(), 0.25);
    assert_eq!(jets[1].partial(&[0, 1]).unwrap(), 3.0);
    for j in &jets {
        for (b, v) in j.partials() {
            if b.iter().sum::<u32>() >= 2 {
                assert_eq!(v, 0.0);
            }
        }
    }
}

#[test]
fn tanh_jet_at_zero() {
    let net = Network::new(
        vec![Layer::new(1, 1, vec![1.0], vec![0.0]).unwrap(), Layer::new(1, 1, vec![1.0], vec![0.0]).unwrap()],
        NetMeta::default(),
    )
    .unwrap();
    let j = &net.evaluate_jet(&[0.0], 4).unwrap()[0];
    assert!((j.partial(&[1]).unwrap() - 1.0).abs() < 1e-15);
    assert!(j.partial(&[2]).unwrap().abs() < 1e-15);
    assert!((j.partial(&[3]).unwrap() + 2.0).abs() < 1e-14);
}

#[test]
fn jet_caps() {
    let net = random_net(&[5, 3, 1], 1);
    assert!(matches!(net.evaluate_jet(&[0.0; 5], 1), Err(Error::Capacity(_))));
    let net = random_net(&[1, 3, 1], 1);
    assert!(matches!(net.evaluate_jet(&[0.0], 5), Err(Error::Capacity(_))));
}

fn richardson_partial(net: &TanhNetwork, x: &[f64], beta: &[u32]) -> f64 {
    // Mixed central differences in extended precision with one Richardson step.
    let hp = net.to_hp(200);
    let fd = |h: f64| -> f64 {
        let mut terms: Vec<(Vec<f64>, f64)> = vec![(x.to_vec(), 1.0)];
        for (axis, &order) in beta.iter().enumerate() {
            for _ in 0..order {
                let mut next = Vec::new();
                for (p, c) in &terms {
                    let mut a = p.clone();
                    a[axis] += h;
                    let mut b = p.clone();
                    b[axis] -= h;
                    next.push((a, c / (2.0 * h)));
                    next.push((b, -c / (2.0 * h)));
                }
                terms = next;
            }
        }
        terms.iter().map(|(p, c)| c * hp.evaluate_f64(p).unwrap()[0]).sum()
    };
    let h = 1e-3;
    (4.0 * fd(h) - fd(2.0 * h)) / 3.0
}

#[test]
fn jets_match_richardson_differences() {
    let net = random_net(&[2, 4, 3, 1], 7);
    let mut r = Lcg(99);
    for _ in 0..5 {
        let x = r.vec(2);
        let jet = &net.evaluate_jet(&x, 2).unwrap()[0];
        for (beta, v) in jet.partials() {
            let fd = richardson_partial(&net, &x, &beta);
            assert!((v - fd).abs() < 1e-6, "beta {beta:?}: jet {v} fd {fd}");
        }
        assert_eq!(*jet.value(), net.evaluate(&x).unwrap()[0]);
    }
}

#[test]
fn parallelize_widths_and_values() {
    let a = random_net(&[1, 3, 1], 2);
    let b = random_net(&[1, 5, 1], 3);
    let p = a.parallelize(&b).unwrap();
    assert_eq!(p.dims(), vec![2, 8, 2]);
    let mut r = Lcg(5);
    for _ in 0..100 {
        let x = r.vec(2);
        let out = p.evaluate(&x).unwrap();
        assert_eq!(out[0], a.evaluate(&x[..1]).unwrap()[0]);
        assert_eq!(out[1], b.evaluate(&x[1..]).unwrap()[0]);
    }
    assert!(a.parallelize(&random_net(&[1, 2, 2, 1], 1)).is_err());
}

#[test]
fn identity_parallel() {
    let id = TanhNetwork::affine(1, 1, vec![1.0], vec![0.0]).unwrap();
    assert_eq!(id.parallelize(&id).unwrap().evaluate(&[0.2, -0.7]).unwrap(), vec![0.2, -0.7]);
}

#[test]
fn compose_depth_and_semantics() {
    let f = random_net(&[2, 4, 3], 11);
    let g = random_net(&[3, 5, 1], 12);
    let c = f.compose(&g).unwrap();
    assert_eq!(c.depth(), 3);
    assert_eq!(c.dims(), vec![2, 4, 5, 1]);
    let (fh, gh) = (f.to_hp(256), g.to_hp(256));
    let ch = with_exact_bits(256, || fh.compose(&gh).unwrap());
    let mut r = Lcg(13);
    for _ in 0..100 {
        let x = r.vec(2);
        let direct = g.evaluate(&f.evaluate(&x).unwrap()).unwrap()[0];
        assert!((c.evaluate(&x).unwrap()[0] - direct).abs() < 1e-13);
        let xh = fh.lift_point(&x);
        let a = gh.evaluate(&fh.evaluate(&xh).unwrap()).unwrap().remove(0);
        let b = ch.evaluate(&xh).unwrap().remove(0);
        // merged affine maps agree to the working precision
        assert!((a - b).abs().to_f64() < 1e-70);
    }
    let a = TanhNetwork::affine(1, 1, vec![2.0], vec![1.0]).unwrap();
    let b = TanhNetwork::affine(1, 1, vec![3.0], vec![-1.0]).unwrap();
    let ab = a.compose(&b).unwrap();
    assert_eq!(ab.layers()[0].w, vec![6.0]);
    assert_eq!(ab.layers()[0].b, vec![2.0]);
    assert!(f.compose(&f).is_err());
}

#[test]
fn stack_shares_input() {
    let a = random_net(&[2, 3, 1], 21);
    let b = random_net(&[2, 2, 2], 22);
    let s = a.stack(&b).unwrap();
    assert_eq!(s.dims(), vec![2, 5, 3]);
    let x = [0.3, -0.4];
    let out = s.evaluate(&x).unwrap();
    assert_eq!(out[0], a.evaluate(&x).unwrap()[0]);
    assert_eq!(&out[1..], &b.evaluate(&x).unwrap()[..]);
}

#[test]
fn select_and_map_outputs() {
    let a = random_net(&[1, 3, 3], 4);
    let x = [0.25];
    let full = a.evaluate(&x).unwrap();
    let sel = a.select_outputs(&[2, 0]).unwrap();
    assert_eq!(sel.evaluate(&x).unwrap(), vec![full[2], full[0]]);
    let sum = a.map_output(1, vec![1.0, 1.0, 1.0], vec![0.5]).unwrap();
    assert!((sum.evaluate(&x).unwrap()[0] - (full.iter().sum::<f64>() + 0.5)).abs() < 1e-14);
}

#[test]
fn sparsity_extremes() {
    let z = Network::new(
        vec![Layer::zeros(3, 2, &0.0), Layer::zeros(1, 3, &0.0)],
        NetMeta::default(),
    )
    .unwrap();
    assert_eq!(z.sparsity(), 0.0);
    assert_eq!(random_net(&[2, 3, 1], 3).sparsity(), 1.0);
}

#[test]
fn document_round_trip_is_bit_exact() {
    let net = random_net(&[2, 4, 3, 1], 31);
    let text = to_document(&net);
    let back: TanhNetwork = from_document(&text).unwrap();
    assert_eq!(back, net);
    for (a, b) in back.layers().iter().zip(net.layers()) {
        for (x, y) in a.w.iter().zip(&b.w) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

#[test]
fn hp_document_keeps_exact_weights() {
    let net = with_exact_bits(300, || {
        let third = Hp::one() / Hp::from_f64(3.0);
        HpNetwork::affine(1, 1, vec![third.clone()], vec![third]).unwrap()
    });
    let text = to_document(&net);
    let back: HpNetwork = from_document(&text).unwrap();
    assert_eq!(back, net);
    assert_eq!(back.bits(), 300);
    let as_f64: TanhNetwork = from_document(&text).unwrap();
    assert_eq!(as_f64.layers()[0].w[0], 1.0 / 3.0);
}

#[test]
fn document_shape_errors_name_the_layer() {
    let text = r#"{"dims":[1,2,1],"layers":[{"W":[[1.0],[2.0]],"b":[0,0]},{"W":[[1.0]],"b":[0]}],"meta":{"builder":"x"}}"#;
    match from_document::<f64>(text) {
        Err(Error::Parse { path, .. }) => assert_eq!(path, "layers[1].W[0]"),
        other => panic!("unexpected {other:?}"),
    }
    let text = r#"{"dims":[1,1],"layers":[{"W":[["a"]],"b":[0]}]}"#;
    match from_document::<f64>(text) {
        Err(Error::Parse { path, .. }) => assert!(path.starts_with("layers[0].W[0]"), "{path}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn rounding_amplification_grows_with_cancellation() {
    let tame = random_net(&[1, 3, 1], 1);
    let h = 1e-8;
    let wild = Network::new(
        vec![
            Layer::new(1, 1, vec![h], vec![0.0]).unwrap(),
            Layer::new(1, 1, vec![1.0 / h], vec![0.0]).unwrap(),
        ],
        NetMeta::default(),
    )
    .unwrap();
    assert!(wild.rounding_amplification(1.0) > tame.rounding_amplification(1.0));
    assert!(required_bits(&wild, 1.0, 1e-30, 64) > 64);
}
