//! Truncated multivariate Taylor arithmetic for exact partial derivatives.

use std::sync::Arc;

use crate::combinatorics::{index_factorial, GradedIndex};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tanh_calculus::tanh_derivatives;

pub const JET_ORDER_CAP: u32 = 4;
pub const JET_DIM_CAP: usize = 4;

/// Index layout shared by all jets of one (dimension, order).
#[derive(Debug, Clone)]
pub struct JetLayout {
    index: Arc<GradedIndex>,
    inv_factorial: Vec<f64>,
}

/// Coefficients are D^beta f(x) / beta!, one per |beta| <= k.
#[derive(Debug, Clone)]
pub struct JetValue<T> {
    pub k: u32,
    pub d: usize,
    pub coeffs: Vec<T>,
    index: Arc<GradedIndex>,
}

impl JetLayout {
    pub fn new(d: usize, k: u32) -> Result<Self> {
        Self::with_caps(d, k, JET_DIM_CAP, JET_ORDER_CAP)
    }

    pub fn with_caps(d: usize, k: u32, dim_cap: usize, order_cap: u32) -> Result<Self> {
        if k > order_cap || d > dim_cap {
            return Err(Error::Capacity(format!(
                "jet of order {k} in dimension {d} exceeds caps (order {order_cap}, dimension {dim_cap})"
            )));
        }
        let index = Arc::new(GradedIndex::new(d, k)?);
        let inv_factorial = (0..=k).map(|m| 1.0 / (1..=m).map(|i| i as f64).product::<f64>()).collect();
        Ok(Self { index, inv_factorial })
    }

    pub fn dim(&self) -> usize {
        self.index.d
    }

    pub fn order(&self) -> u32 {
        self.index.k
    }

    pub fn index(&self) -> &GradedIndex {
        &self.index
    }

    pub fn constant<T: Real>(&self, c: T) -> JetValue<T> {
        let mut coeffs = vec![T::lift(0.0, &c); self.index.len()];
        coeffs[0] = c;
        JetValue { k: self.index.k, d: self.index.d, coeffs, index: self.index.clone() }
    }

    /// The coordinate function x_axis expanded at `value`.
    pub fn variable<T: Real>(&self, axis: usize, value: T) -> JetValue<T> {
        let one = T::lift(1.0, &value);
        let mut j = self.constant(value);
        if self.index.k >= 1 {
            let u = self.index.unit(axis);
            j.coeffs[u] = one;
        }
        j
    }

    /// tanh composed with a jet through its truncated Taylor expansion.
    pub fn tanh<T: Real>(&self, u: &JetValue<T>) -> Result<JetValue<T>> {
        let k = self.index.k as usize;
        let derivs = tanh_derivatives(&u.coeffs[0], k)?;
        let mut out = self.constant(derivs[0].clone());
        if k == 0 {
            return Ok(out);
        }
        let like = &u.coeffs[0];
        let mut hat = u.clone();
        hat.coeffs[0] = T::lift(0.0, like);
        let mut power = hat.clone();
        for (m, dm) in derivs.iter().enumerate().skip(1) {
            let c = dm.clone() * T::lift(self.inv_factorial[m], like);
            if !c.is_zero() {
                for (o, p) in out.coeffs.iter_mut().zip(&power.coeffs).skip(1) {
                    if !p.is_zero() {
                        o.add_mul(&c, p);
                    }
                }
            }
            if m < k {
                power = power.mul(&hat);
            }
        }
        Ok(out)
    }
}

impl<T: Real> PartialEq for JetValue<T> {
    fn eq(&self, other: &Self) -> bool {
        self.k == other.k && self.d == other.d && self.coeffs == other.coeffs
    }
}

impl<T: Real> JetValue<T> {
    pub fn value(&self) -> &T {
        &self.coeffs[0]
    }

    /// `self += w * other`.
    pub fn add_scaled(&mut self, w: &T, other: &JetValue<T>) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            if !b.is_zero() {
                a.add_mul(w, b);
            }
        }
    }

    /// Truncated product.
    pub fn mul(&self, other: &JetValue<T>) -> JetValue<T> {
        let like = &self.coeffs[0];
        let mut coeffs = vec![T::lift(0.0, like); self.coeffs.len()];
        for &(i, j, s) in self.index.products() {
            let (a, b) = (&self.coeffs[i], &other.coeffs[j]);
            if !a.is_zero() && !b.is_zero() {
                coeffs[s].add_mul(a, b);
            }
        }
        JetValue { k: self.k, d: self.d, coeffs, index: self.index.clone() }
    }

    /// D^beta at the expansion point, or None if |beta| > k.
    pub fn partial(&self, beta: &[u32]) -> Option<T> {
        let pos = self.index.position(beta)?;
        let f = index_factorial(beta);
        Some(self.coeffs[pos].clone() * T::lift(f, &self.coeffs[0]))
    }

    /// (multi-index, D^beta) for every stored coefficient.
    pub fn partials(&self) -> Vec<(Vec<u32>, T)> {
        self.index
            .members()
            .iter()
            .zip(&self.coeffs)
            .map(|(b, c)| (b.clone(), c.clone() * T::lift(index_factorial(b), &self.coeffs[0])))
            .collect()
    }
}
