//! Approximate partition of unity on [0,1]^d built from shifted tanh ramps.

use rayon::prelude::*;

use crate::combinatorics::enumerate;
use crate::error::{ensure, Error, Result};
use crate::netgraph::{Layer, NetMeta, Network};
use crate::scalar::Real;
use crate::tanh_calculus::{decay_threshold, table};

/// Sample points per axis and cell used by the certificates.
pub const CELL_SAMPLES: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSpec {
    pub d: usize,
    pub n: usize,
    pub k: u32,
    pub eps: f64,
    pub r: f64,
    pub alpha: f64,
}

impl PartitionSpec {
    /// Uses the decay threshold of tanh derivatives up to order k (0 for k = 0).
    pub fn new(d: usize, n: usize, k: u32, eps: f64) -> Result<Self> {
        let r = if k == 0 { 0.0 } else { decay_threshold(k as usize)? };
        Self::with_threshold(d, n, k, eps, r)
    }

    pub fn with_threshold(d: usize, n: usize, k: u32, eps: f64, r: f64) -> Result<Self> {
        ensure!(d >= 1, "dimension must be at least 1");
        let alpha = select_alpha(n, k, eps, r)?;
        Ok(Self { d, n, k, eps, r, alpha })
    }

    /// Bound on the deviation of the near sum from 1 in W^{k,inf}.
    pub fn close_bound(&self) -> f64 {
        2f64.powi((self.d as u32 * self.k) as i32) * self.d as f64 * self.eps
    }

    /// Bound on a far cube weight in W^{k,inf}.
    pub fn far_bound(&self) -> f64 {
        let k = self.k as f64;
        let c = if self.k == 0 { 1.0 } else { (2.0 * k).powf(2.0 * k) * self.alpha.powf(k) };
        c.max(1.0) * self.eps
    }

    /// Ramp u_t(y) = tanh(alpha (y - t/N)) as (weight, bias) for 1 <= t < N.
    pub fn ramp<T: Real>(&self, t: usize, like: &T) -> (T, T) {
        let a = T::lift(self.alpha, like);
        let shift = a.clone() * T::lift_i128(t as i128, like) / T::lift_i128(self.n as i128, like);
        (a, -shift)
    }

    /// rho_j = c + sum_t coef_t u_t (1-based j).
    pub fn bump_affine(&self, j: usize) -> (f64, Vec<(usize, f64)>) {
        let n = self.n;
        if n == 1 {
            return (1.0, Vec::new());
        }
        if j == 1 {
            (0.5, vec![(1, -0.5)])
        } else if j == n {
            (0.5, vec![(n - 1, 0.5)])
        } else {
            (0.0, vec![(j - 1, 0.5), (j, -0.5)])
        }
    }

    fn ramp_derivative(&self, t: usize, m: usize, y: f64) -> f64 {
        let z = self.alpha * (y - t as f64 / self.n as f64);
        let dm = table().derivative(m, z).expect("order within table");
        if m == 0 {
            dm
        } else {
            self.alpha.powi(m as i32) * dm
        }
    }

    /// m-th derivative of rho_j at y.
    pub fn bump_derivative(&self, j: usize, m: usize, y: f64) -> f64 {
        let (c, terms) = self.bump_affine(j);
        let mut v = if m == 0 { c } else { 0.0 };
        for (t, coef) in terms {
            v += coef * self.ramp_derivative(t, m, y);
        }
        v
    }

    pub fn bump_value(&self, j: usize, y: f64) -> f64 {
        self.bump_derivative(j, 0, y)
    }

    /// Cell index (1-based) containing y.
    pub fn cell_of(&self, y: f64) -> usize {
        ((y * self.n as f64).floor() as isize + 1).clamp(1, self.n as isize) as usize
    }
}

/// Smallest slope parameter satisfying the closeness and decay conditions.
pub fn select_alpha(n: usize, k: u32, eps: f64, r: f64) -> Result<f64> {
    ensure!(n >= 1, "N must be at least 1");
    ensure!(eps > 0.0 && eps < 0.25, "partition tolerance must lie in (0, 1/4), got {eps}");
    ensure!(r >= 0.0 && r.is_finite(), "decay threshold must be nonnegative");
    let nf = n as f64;
    let kf = k as f64;
    let log_term = if k == 0 {
        0.5 * (2.0 / eps - 1.0).ln()
    } else {
        (kf + 1.0) * (2.0 * kf).ln() + kf * (nf * kf).ln() - kf - eps.ln()
    };
    let alpha = nf * r.max(log_term);
    let z = alpha / nf;
    let tab = table();
    let e = (-2.0 * z).exp();
    if 2.0 * e / (1.0 + e) > eps * (1.0 + 1e-12) {
        return Err(Error::Consistency(format!("alpha = {alpha} violates 1 - tanh(alpha/N) <= eps")));
    }
    for m in 1..=k as usize {
        let v = alpha.powi(m as i32) * tab.derivative(m, z)?.abs();
        if v > eps * (1.0 + 1e-12) {
            return Err(Error::Consistency(format!("alpha = {alpha} violates the order-{m} decay condition ({v:e})")));
        }
    }
    Ok(alpha)
}

/// rho_j as a network on one input: one hidden neuron for boundary cells,
/// two otherwise, none when N = 1.
pub fn build_bump<T: Real>(j: usize, spec: &PartitionSpec) -> Result<Network<T>> {
    ensure!(j >= 1 && j <= spec.n, "bump index {j} outside 1..={}", spec.n);
    let like = T::from_f64(0.0);
    let meta = NetMeta::new("bump")
        .param("j", j)
        .param("N", spec.n)
        .param("k", spec.k)
        .param("eps", spec.eps)
        .tol("alpha", spec.alpha)
        .tol("R", spec.r);
    let (c, terms) = spec.bump_affine(j);
    if terms.is_empty() {
        let mut net = Network::affine(1, 1, vec![T::lift(0.0, &like)], vec![T::lift(c, &like)])?;
        net.meta = meta;
        return Ok(net);
    }
    let mut w1 = Vec::new();
    let mut b1 = Vec::new();
    let mut w2 = Vec::new();
    for &(t, coef) in &terms {
        let (w, b) = spec.ramp(t, &like);
        w1.push(w);
        b1.push(b);
        w2.push(T::lift(coef, &like));
    }
    let h = terms.len();
    Network::new(
        vec![Layer::new(h, 1, w1, b1)?, Layer::new(1, h, w2, vec![T::lift(c, &like)])?],
        meta,
    )
}

/// Phi_j(x) = prod_i rho_{j_i}(x_i), 1-based indices.
pub fn ideal_cube_weight(j: &[usize], spec: &PartitionSpec, x: &[f64]) -> Result<f64> {
    ensure!(j.len() == spec.d && x.len() == spec.d, "index and point must have dimension {}", spec.d);
    ensure!(j.iter().all(|&v| v >= 1 && v <= spec.n), "cube index outside 1..={}", spec.n);
    Ok(j.iter().zip(x).map(|(&ji, &xi)| spec.bump_value(ji, xi)).product())
}

/// Outcome of one sampled certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub value: f64,
    pub bound: f64,
}

impl Certificate {
    pub fn passed(&self) -> bool {
        self.value <= self.bound
    }

    pub fn margin(&self) -> f64 {
        self.bound - self.value
    }
}

/// Separable per-axis sample tables from which every cube certificate
/// follows by products.
#[derive(Debug, Clone)]
pub struct PartitionTables {
    spec: PartitionSpec,
    /// near_min[c]: min over cell c of the near sum S_c.
    near_min: Vec<f64>,
    /// near_sup[c][m]: sup over cell c of |S_c^{(m)}|.
    near_sup: Vec<Vec<f64>>,
    /// bump_sup[c][w][m]: sup over cell c of |rho_w^{(m)}| (0-based c, w).
    bump_sup: Vec<Vec<Vec<f64>>>,
    betas: Vec<Vec<u32>>,
}

fn cell_points(n: usize, c: usize, samples: usize) -> impl Iterator<Item = f64> {
    let lo = c as f64 / n as f64;
    let width = 1.0 / n as f64;
    (0..samples).map(move |i| lo + width * i as f64 / (samples - 1) as f64)
}

impl PartitionTables {
    pub fn new(spec: &PartitionSpec) -> Result<Self> {
        Self::with_samples(spec, CELL_SAMPLES)
    }

    pub fn with_samples(spec: &PartitionSpec, samples: usize) -> Result<Self> {
        ensure!(samples >= 2, "need at least two samples per cell");
        let n = spec.n;
        let k = spec.k as usize;
        let rows: Vec<(f64, Vec<f64>, Vec<Vec<f64>>)> = (0..n)
            .into_par_iter()
            .map(|c| {
                let mut near_min = f64::INFINITY;
                let mut near_sup = vec![0.0f64; k + 1];
                let mut bump_sup = vec![vec![0.0f64; k + 1]; n];
                let near: Vec<usize> = (c.saturating_sub(1)..=(c + 1).min(n - 1)).collect();
                for y in cell_points(n, c, samples) {
                    for m in 0..=k {
                        let mut s = 0.0;
                        for w in 0..n {
                            let v = spec.bump_derivative(w + 1, m, y);
                            bump_sup[w][m] = bump_sup[w][m].max(v.abs());
                            if near.contains(&w) {
                                s += v;
                            }
                        }
                        near_sup[m] = near_sup[m].max(s.abs());
                        if m == 0 {
                            near_min = near_min.min(s);
                        }
                    }
                }
                (near_min, near_sup, bump_sup)
            })
            .collect();
        let mut betas = Vec::new();
        for deg in 0..=spec.k {
            betas.extend(enumerate(deg, spec.d)?.members().iter().cloned());
        }
        let mut t = Self { spec: spec.clone(), near_min: vec![], near_sup: vec![], bump_sup: vec![], betas };
        for (a, b, c) in rows {
            t.near_min.push(a);
            t.near_sup.push(b);
            t.bump_sup.push(c);
        }
        Ok(t)
    }

    pub fn spec(&self) -> &PartitionSpec {
        &self.spec
    }

    fn check_index(&self, j: &[usize]) -> Result<()> {
        ensure!(j.len() == self.spec.d, "cell index must have dimension {}", self.spec.d);
        ensure!(j.iter().all(|&v| v >= 1 && v <= self.spec.n), "cell index outside 1..={}", self.spec.n);
        Ok(())
    }

    /// Sampled W^{k,inf} deviation of sum_{|v|_inf <= 1} Phi_{j+v} from 1 on cell j.
    pub fn close(&self, j: &[usize]) -> Result<Certificate> {
        self.check_index(j)?;
        let mut value: f64 = 1.0 - j.iter().map(|&c| self.near_min[c - 1]).product::<f64>();
        for beta in self.betas.iter().filter(|b| b.iter().any(|&v| v > 0)) {
            let p: f64 = j.iter().zip(beta).map(|(&c, &m)| self.near_sup[c - 1][m as usize]).product();
            value = value.max(p);
        }
        Ok(Certificate { value, bound: self.spec.close_bound() })
    }

    /// Sampled W^{k,inf} norm of Phi_{j+v} on cell j.
    pub fn far(&self, j: &[usize], v: &[i64]) -> Result<Certificate> {
        self.check_index(j)?;
        ensure!(v.len() == j.len(), "offset must have dimension {}", j.len());
        ensure!(v.iter().any(|x| x.abs() >= 2), "far offsets need |v|_inf >= 2");
        let target: Vec<i64> = j.iter().zip(v).map(|(&a, &b)| a as i64 + b).collect();
        ensure!(
            target.iter().all(|&t| t >= 1 && t <= self.spec.n as i64),
            "j + v lies outside 1..={}",
            self.spec.n
        );
        let mut value: f64 = 0.0;
        for beta in &self.betas {
            let p: f64 = j
                .iter()
                .zip(&target)
                .zip(beta)
                .map(|((&c, &w), &m)| self.bump_sup[c - 1][w as usize - 1][m as usize])
                .product();
            value = value.max(p);
        }
        Ok(Certificate { value, bound: self.spec.far_bound() })
    }

    /// Max of `far` over every admissible offset, or None when the cell has
    /// no far neighbour.
    pub fn worst_far(&self, j: &[usize]) -> Result<Option<Certificate>> {
        self.check_index(j)?;
        let n = self.spec.n;
        let mut value: Option<f64> = None;
        for axis in 0..j.len() {
            let c = j[axis] - 1;
            let far_targets: Vec<usize> = (0..n).filter(|&w| w.abs_diff(c) >= 2).collect();
            if far_targets.is_empty() {
                continue;
            }
            for beta in &self.betas {
                let mut p = 1.0;
                for (i, &ji) in j.iter().enumerate() {
                    let m = beta[i] as usize;
                    let row = &self.bump_sup[ji - 1];
                    let best = if i == axis {
                        far_targets.iter().map(|&w| row[w][m]).fold(0.0, f64::max)
                    } else {
                        row.iter().map(|r| r[m]).fold(0.0, f64::max)
                    };
                    p *= best;
                }
                value = Some(value.unwrap_or(0.0).max(p));
            }
        }
        Ok(value.map(|value| Certificate { value, bound: self.spec.far_bound() }))
    }

    /// All cells of {1..N}^d in lexicographic order.
    pub fn cells(&self) -> Vec<Vec<usize>> {
        let (n, d) = (self.spec.n, self.spec.d);
        let total = n.pow(d as u32);
        (0..total)
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
}

pub fn certify_close(spec: &PartitionSpec, j: &[usize]) -> Result<Certificate> {
    PartitionTables::new(spec)?.close(j)
}

pub fn certify_far(spec: &PartitionSpec, j: &[usize], v: &[i64]) -> Result<Certificate> {
    PartitionTables::new(spec)?.far(j, v)
}

/// One-dimensional picture: rows (y, rho_1..rho_N, near_sum, far_sum) where
/// near and far are relative to the cell containing y.
pub fn figure1_rows(spec: &PartitionSpec, points: usize) -> Result<Vec<Vec<f64>>> {
    ensure!(spec.d == 1, "the partition picture is one-dimensional");
    ensure!(points >= 2, "need at least two sample points");
    Ok((0..points)
        .map(|i| {
            let y = i as f64 / (points - 1) as f64;
            let cell = spec.cell_of(y);
            let mut row = vec![y];
            let (mut near, mut far) = (0.0, 0.0);
            for w in 1..=spec.n {
                let v = spec.bump_value(w, y);
                row.push(v);
                if w.abs_diff(cell) <= 1 {
                    near += v;
                } else {
                    far += v;
                }
            }
            row.push(near);
            row.push(far);
            row
        })
        .collect())
}

pub fn figure1_header(n: usize) -> Vec<String> {
    let mut h = vec!["y".to_string()];
    h.extend((1..=n).map(|j| format!("rho_{j}")));
    h.push("near_sum".into());
    h.push("far_sum".into());
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Hp;

    #[test]
    fn alpha_formula_and_conditions() {
        let a = select_alpha(7, 1, 0.01, 1.0).unwrap();
        let expect = 7.0 * (4.0 * 7.0 / (std::f64::consts::E * 0.01)).ln().max(1.0);
        assert!((a - expect).abs() < 1e-12 * expect);
        assert!(select_alpha(7, 0, 0.5, 0.0).is_err());
        assert!(select_alpha(7, 0, 0.25, 0.0).is_err());
        for n in [1, 4, 7, 16, 32] {
            for k in 0..=3u32 {
                for eps in [0.2, 1e-2, 1e-6] {
                    let spec = PartitionSpec::new(1, n, k, eps).unwrap();
                    assert!(spec.alpha >= n as f64 * spec.r);
                    let z = spec.alpha / n as f64;
                    assert!(1.0 - z.tanh() <= eps * (1.0 + 1e-9));
                    for m in 1..=k as usize {
                        let v = spec.alpha.powi(m as i32) * table().derivative(m, z).unwrap().abs();
                        assert!(v <= eps * (1.0 + 1e-12));
                    }
                }
            }
        }
    }

    #[test]
    fn k0_alpha_inverts_closeness() {
        let eps = 0.01;
        let a = select_alpha(5, 0, eps, 0.0).unwrap();
        assert!((1.0 - (a / 5.0).tanh() - eps).abs() < 1e-14);
    }

    #[test]
    fn telescoping_sum() {
        for n in [1, 2, 7, 16, 32] {
            let spec = PartitionSpec::new(1, n, 1, 1e-2).unwrap();
            for i in 0..=10000 {
                let y = i as f64 / 10000.0;
                let s: f64 = (1..=n).map(|j| spec.bump_value(j, y)).sum();
                assert!((s - 1.0).abs() < 1e-14, "N={n} y={y} sum={s}");
            }
        }
    }

    #[test]
    fn bump_network_matches_ideal() {
        let spec = PartitionSpec::new(1, 7, 2, 1e-2).unwrap();
        for j in 1..=7 {
            let net = build_bump::<f64>(j, &spec).unwrap();
            let hidden = if j == 1 || j == 7 { 1 } else { 2 };
            assert_eq!(net.dims(), vec![1, hidden, 1]);
            for i in 0..=200 {
                let y = i as f64 / 200.0;
                let v = net.evaluate_f64(&[y]).unwrap()[0];
                assert!((v - spec.bump_value(j, y)).abs() < 1e-14);
                assert!((-1e-15..=1.0 + 1e-15).contains(&v));
                let jet = net.evaluate_jet(&[y], 2).unwrap();
                for m in 0..=2u32 {
                    let want = spec.bump_derivative(j, m as usize, y);
                    let got = jet[0].partial(&[m]).unwrap();
                    assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()));
                }
            }
            let centre = (j as f64 - 0.5) / 7.0;
            assert!(spec.bump_value(j, centre) >= 1.0 - 2.0 * spec.eps);
        }
        let single = build_bump::<f64>(1, &PartitionSpec::new(1, 1, 0, 1e-2).unwrap()).unwrap();
        assert_eq!(single.evaluate_f64(&[0.3]).unwrap()[0], 1.0);
        assert!(build_bump::<f64>(8, &spec).is_err());
    }

    #[test]
    fn hp_bump_agrees() {
        let spec = PartitionSpec::new(1, 4, 1, 1e-2).unwrap();
        let net = build_bump::<Hp>(2, &spec).unwrap();
        let v = net.evaluate(&net.lift_point(&[0.3])).unwrap()[0].to_f64();
        assert!((v - spec.bump_value(2, 0.3)).abs() < 1e-15);
    }

    #[test]
    fn inflections_at_cell_boundaries() {
        let spec = PartitionSpec::new(1, 7, 0, 1e-2).unwrap();
        for t in 1..7 {
            let y = t as f64 / 7.0;
            let (_, terms) = spec.bump_affine(t + 1);
            assert!(terms.iter().any(|&(s, _)| s == t));
            assert!(spec.ramp_derivative(t, 2, y).abs() < 1e-9 * spec.alpha.powi(2));
            assert!((0.5 * spec.ramp_derivative(t, 1, y) - spec.alpha / 2.0).abs() < 1e-12 * spec.alpha);
        }
    }

    #[test]
    fn figure1_scenario() {
        let spec = PartitionSpec::new(1, 7, 0, 0.01).unwrap();
        let tables = PartitionTables::new(&spec).unwrap();
        for c in 1..=7 {
            let cert = tables.close(&[c]).unwrap();
            assert!(cert.value <= 0.01, "cell {c}: {}", cert.value);
        }
        let rows = figure1_rows(&spec, 701).unwrap();
        assert_eq!(rows[0].len(), figure1_header(7).len());
        assert!(rows.iter().all(|r| r[8] >= 0.99 && r[9] <= 0.01));
    }

    #[test]
    fn certificates_over_matrix() {
        for d in 1..=3usize {
            for n in [4, 7, 16] {
                for k in 0..=2u32 {
                    let spec = PartitionSpec::new(d, n, k, 1e-2).unwrap();
                    let samples = if d == 3 && n == 16 { 64 } else { CELL_SAMPLES };
                    let tables = PartitionTables::with_samples(&spec, samples).unwrap();
                    for j in tables.cells() {
                        let c = tables.close(&j).unwrap();
                        assert!(c.passed(), "close d={d} N={n} k={k} j={j:?}: {c:?}");
                        if let Some(f) = tables.worst_far(&j).unwrap() {
                            assert!(f.passed(), "far d={d} N={n} k={k} j={j:?}: {f:?}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn far_offsets_explicit() {
        let spec = PartitionSpec::new(2, 7, 2, 1e-2).unwrap();
        let tables = PartitionTables::new(&spec).unwrap();
        let c = tables.far(&[1, 4], &[2, 3]).unwrap();
        assert!(c.passed());
        let worst = tables.worst_far(&[1, 4]).unwrap().unwrap();
        assert!(worst.value >= c.value);
        assert!(tables.far(&[1, 4], &[1, 1]).is_err());
        assert!(tables.far(&[6, 4], &[2, 0]).is_err());
        let k0 = PartitionSpec::new(1, 7, 0, 1e-2).unwrap();
        assert!(certify_far(&k0, &[1], &[3]).unwrap().value <= 1e-2);
        assert!(certify_close(&k0, &[4]).unwrap().passed());
    }

    #[test]
    fn cube_weight_is_product() {
        let spec = PartitionSpec::new(2, 4, 0, 1e-2).unwrap();
        let w = ideal_cube_weight(&[2, 3], &spec, &[0.3, 0.6]).unwrap();
        assert!((w - spec.bump_value(2, 0.3) * spec.bump_value(3, 0.6)).abs() < 1e-16);
        let mut total = 0.0;
        for a in 1..=4 {
            for b in 1..=4 {
                total += ideal_cube_weight(&[a, b], &spec, &[0.3, 0.6]).unwrap();
            }
        }
        assert!((total - 1.0).abs() < 1e-14);
    }
}
