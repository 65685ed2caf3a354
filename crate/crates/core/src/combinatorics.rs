//! Multi-indices, their enumeration and counting.

use std::collections::HashMap;

use crate::error::{ensure, Error, Result};

pub type MultiIndex = Vec<u32>;

pub const DEFAULT_CAP: usize = 1_000_000;

/// Enumeration cap, overridable through `TANHFORGE_CAP`.
pub fn size_cap() -> usize {
    std::env::var("TANHFORGE_CAP")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_CAP)
}

pub fn degree(alpha: &[u32]) -> u32 {
    alpha.iter().sum()
}

/// Componentwise `a <= b`.
pub fn le(a: &[u32], b: &[u32]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x <= y)
}

/// All multi-indices of dimension `d` and total degree `n`, in descending
/// lexicographic order.
#[derive(Debug, Clone)]
pub struct MultiIndexSet {
    n: u32,
    d: usize,
    members: Vec<MultiIndex>,
    position: HashMap<MultiIndex, usize>,
}

impl MultiIndexSet {
    pub fn n(&self) -> u32 {
        self.n
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn len(&self) -> usize {
        self.members.len()
    }
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
    pub fn members(&self) -> &[MultiIndex] {
        &self.members
    }
    pub fn get(&self, i: usize) -> &MultiIndex {
        &self.members[i]
    }
    /// Zero-based position of `alpha`.
    pub fn position(&self, alpha: &[u32]) -> Option<usize> {
        self.position.get(alpha).copied()
    }
    pub fn iter(&self) -> impl Iterator<Item = &MultiIndex> {
        self.members.iter()
    }
}

fn push_descending(n: u32, d: usize, prefix: &mut MultiIndex, out: &mut Vec<MultiIndex>) {
    if d == 1 {
        prefix.push(n);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=n).rev() {
        prefix.push(first);
        push_descending(n - first, d - 1, prefix, out);
        prefix.pop();
    }
}

pub fn enumerate(n: u32, d: usize) -> Result<MultiIndexSet> {
    ensure!(d >= 1, "multi-index dimension must be at least 1");
    let count = cardinality(n, d)?;
    let cap = size_cap();
    if count > cap as u128 {
        return Err(Error::Capacity(format!(
            "|P_{{{n},{d}}}| = {count} exceeds the cap {cap}"
        )));
    }
    let mut members = Vec::with_capacity(count as usize);
    push_descending(n, d, &mut Vec::with_capacity(d), &mut members);
    let position = members.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
    Ok(MultiIndexSet { n, d, members, position })
}

pub fn binomial(n: u64, k: u64) -> Result<u128> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc
            .checked_mul((n - i) as u128)
            .ok_or_else(|| Error::Capacity(format!("binomial({n},{k}) overflows")))?
            / (i as u128 + 1);
    }
    Ok(acc)
}

pub fn factorial(n: u32) -> Result<u128> {
    (1..=n as u128).try_fold(1u128, |acc, i| {
        acc.checked_mul(i)
            .ok_or_else(|| Error::Capacity(format!("{n}! overflows 128 bits")))
    })
}

/// |P_{n,d}| = binomial(n+d-1, n).
pub fn cardinality(n: u32, d: usize) -> Result<u128> {
    ensure!(d >= 1, "multi-index dimension must be at least 1");
    binomial(n as u64 + d as u64 - 1, n as u64)
}

/// n!/beta!.
pub fn multinomial(n: u32, beta: &[u32]) -> Result<u128> {
    ensure!(
        degree(beta) == n,
        "multinomial({n}, {beta:?}): |beta| = {} differs from n",
        degree(beta)
    );
    // Product of binomials avoids the overflow of n! itself.
    let mut acc: u128 = 1;
    let mut used: u64 = 0;
    for &b in beta {
        used += b as u64;
        acc = acc
            .checked_mul(binomial(used, b as u64)?)
            .ok_or_else(|| Error::Capacity(format!("multinomial({n}, {beta:?}) overflows")))?;
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CardinalityBounds {
    pub exact: u128,
    /// sqrt(pi) e^(d-1) n^(d-1)
    pub bound_nd: f64,
    /// sqrt(pi) e^n (d-1)^n
    pub bound_dn: f64,
}

pub fn cardinality_bounds(n: u32, d: usize) -> Result<CardinalityBounds> {
    ensure!(d >= 2, "cardinality bounds need d >= 2");
    let sp = std::f64::consts::PI.sqrt();
    let (nf, df) = (n as f64, d as f64);
    Ok(CardinalityBounds {
        exact: cardinality(n, d)?,
        bound_nd: sp * (df - 1.0).exp() * nf.powf(df - 1.0),
        bound_dn: sp * nf.exp() * (df - 1.0).powf(nf),
    })
}

/// Multi-indices of dimension `d` with |beta| <= k, graded by degree and
/// descending-lexicographic within a degree; index 0 is the zero index.
#[derive(Debug, Clone)]
pub struct GradedIndex {
    pub d: usize,
    pub k: u32,
    members: Vec<MultiIndex>,
    position: HashMap<MultiIndex, usize>,
    /// (i, j, i+j) for all pairs with |i|+|j| <= k.
    products: Vec<(usize, usize, usize)>,
}

impl GradedIndex {
    pub fn new(d: usize, k: u32) -> Result<Self> {
        let mut members = Vec::new();
        for m in 0..=k {
            members.extend(enumerate(m, d)?.members);
        }
        let position: HashMap<MultiIndex, usize> =
            members.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
        let mut products = Vec::new();
        for (i, a) in members.iter().enumerate() {
            for (j, b) in members.iter().enumerate() {
                if degree(a) + degree(b) <= k {
                    let sum: MultiIndex = a.iter().zip(b).map(|(x, y)| x + y).collect();
                    products.push((i, j, position[&sum]));
                }
            }
        }
        Ok(Self { d, k, members, position, products })
    }
    pub fn len(&self) -> usize {
        self.members.len()
    }
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
    pub fn members(&self) -> &[MultiIndex] {
        &self.members
    }
    pub fn get(&self, i: usize) -> &MultiIndex {
        &self.members[i]
    }
    pub fn position(&self, beta: &[u32]) -> Option<usize> {
        self.position.get(beta).copied()
    }
    pub fn unit(&self, axis: usize) -> usize {
        let mut e = vec![0; self.d];
        e[axis] = 1;
        self.position[&e]
    }
    pub fn products(&self) -> &[(usize, usize, usize)] {
        &self.products
    }
}

/// beta! as f64.
pub fn index_factorial(beta: &[u32]) -> f64 {
    beta.iter()
        .map(|&b| (1..=b).map(|i| i as f64).product::<f64>())
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn p22_in_descending_lex_order() {
        let p = enumerate(2, 2).unwrap();
        assert_eq!(p.members(), &[vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(p.position(&[1, 1]), Some(1));
    }

    #[test]
    fn small_cardinalities_by_hand() {
        assert_eq!(enumerate(3, 3).unwrap().len(), 10);
        assert_eq!(enumerate(0, 4).unwrap().len(), 1);
        assert_eq!(enumerate(5, 1).unwrap().members(), &[vec![5]]);
        for d in 2..=6u32 {
            assert!(enumerate(d, d as usize).unwrap().len() as u128 <= 5u128.pow(d));
        }
    }

    #[test]
    fn cardinality_matches_binomial_up_to_8() {
        for n in 0..=8u32 {
            for d in 1..=8usize {
                let set = enumerate(n, d).unwrap();
                // independent count: stars and bars via Pascal's triangle
                let mut pascal = vec![vec![0u128; 20]; 20];
                for i in 0..20 {
                    pascal[i][0] = 1;
                    for j in 1..=i {
                        pascal[i][j] = pascal[i - 1][j - 1] + pascal[i - 1][j];
                    }
                }
                assert_eq!(set.len() as u128, pascal[n as usize + d - 1][n as usize]);
                let mut sorted = set.members().to_vec();
                sorted.sort_by(|a, b| b.cmp(a));
                assert_eq!(sorted, set.members());
                sorted.dedup();
                assert_eq!(sorted.len(), set.len());
                assert!(set.iter().all(|a| degree(a) == n && a.len() == d));
            }
        }
    }

    #[test]
    fn multinomial_examples() {
        assert_eq!(multinomial(2, &[1, 1]).unwrap(), 2);
        assert_eq!(multinomial(3, &[3, 0]).unwrap(), 1);
        assert_eq!(multinomial(4, &[2, 1, 1]).unwrap(), 12);
        assert!(matches!(multinomial(3, &[1, 1]), Err(Error::Contract(_))));
    }

    #[test]
    fn cardinality_bound_examples() {
        let b = cardinality_bounds(3, 2).unwrap();
        assert_eq!(b.exact, 4);
        assert!((b.bound_nd - std::f64::consts::PI.sqrt() * std::f64::consts::E * 3.0).abs() < 1e-12);
        assert_eq!(cardinality_bounds(1, 2).unwrap().exact, 2);
        let b = cardinality_bounds(4, 4).unwrap();
        assert_eq!(b.exact, 35);
        for n in 1..=8 {
            for d in 2..=8 {
                let b = cardinality_bounds(n, d).unwrap();
                assert!(b.exact as f64 <= b.bound_nd.min(b.bound_dn) + 1e-9, "n={n} d={d}");
            }
        }
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(enumerate(40, 12), Err(Error::Capacity(_))));
    }

    #[test]
    fn graded_index_products_close() {
        let g = GradedIndex::new(2, 3).unwrap();
        assert_eq!(g.len(), 10);
        assert_eq!(g.get(0), &vec![0, 0]);
        for &(i, j, s) in g.products() {
            let sum: Vec<u32> = g.get(i).iter().zip(g.get(j)).map(|(a, b)| a + b).collect();
            assert_eq!(g.get(s), &sum);
        }
    }

    proptest! {
        #[test]
        fn multinomial_theorem(n in 0u32..=5, x in proptest::collection::vec(-2.0f64..2.0, 1..=5)) {
            let d = x.len();
            let set = enumerate(n, d).unwrap();
            let lhs: f64 = set.iter().map(|b| {
                multinomial(n, b).unwrap() as f64
                    * b.iter().zip(&x).map(|(&e, xi)| xi.powi(e as i32)).product::<f64>()
            }).sum();
            let rhs = x.iter().sum::<f64>().powi(n as i32);
            let scale = x.iter().map(|v| v.abs()).sum::<f64>().powi(n as i32).max(1.0);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * scale);
        }
    }
}
