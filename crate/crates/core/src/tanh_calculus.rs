//! Closed-form derivatives of tanh.
//!
//! sigma^(m)(x) = (-2)^m (sigma+1) sum_{k=0}^m k!/2^k S2(m,k) (sigma-1)^k with
//! Stirling numbers of the second kind held exactly.

use std::sync::OnceLock;

use crate::error::{ensure, Result};
use crate::scalar::{Hp, Real};

pub const MAX_ORDER: usize = 30;

#[derive(Debug, Clone)]
pub struct DerivativeTable {
    max_order: usize,
    stirling: Vec<Vec<i128>>,
    factorial: Vec<i128>,
    /// k!/2^k S2(m,k) as f64, indexed [m][k].
    coeffs: Vec<Vec<f64>>,
}

impl DerivativeTable {
    pub fn new(max_order: usize) -> Result<Self> {
        ensure!(
            max_order <= MAX_ORDER,
            "max_order {max_order} exceeds the exact Stirling capacity {MAX_ORDER}"
        );
        let mut stirling = vec![vec![0i128; max_order + 1]; max_order + 1];
        stirling[0][0] = 1;
        for m in 1..=max_order {
            for k in 1..=m {
                stirling[m][k] = k as i128 * stirling[m - 1][k] + stirling[m - 1][k - 1];
            }
        }
        let mut factorial = vec![1i128; max_order + 1];
        for k in 1..=max_order {
            factorial[k] = factorial[k - 1] * k as i128;
        }
        let coeffs = (0..=max_order)
            .map(|m| {
                (0..=m)
                    .map(|k| {
                        factorial[k] as f64 * stirling[m][k] as f64 / 2f64.powi(k as i32)
                    })
                    .collect()
            })
            .collect();
        Ok(Self { max_order, stirling, factorial, coeffs })
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn stirling2(&self, m: usize, k: usize) -> i128 {
        if k > m || m > self.max_order {
            0
        } else {
            self.stirling[m][k]
        }
    }

    pub fn derivative(&self, m: usize, x: f64) -> Result<f64> {
        ensure!(m <= self.max_order, "derivative order {m} exceeds table order {}", self.max_order);
        if m == 0 {
            return Ok(x.tanh());
        }
        let t = x.abs();
        let e = (-2.0 * t).exp();
        let sp1 = 2.0 / (1.0 + e);
        let sm1 = -2.0 * e / (1.0 + e);
        let c = &self.coeffs[m];
        let mut acc = 0.0;
        for k in (1..=m).rev() {
            acc = acc * sm1 + c[k];
        }
        acc *= sm1;
        let mut v = (-2f64).powi(m as i32) * sp1 * acc;
        if x < 0.0 && m.is_multiple_of(2) {
            v = -v;
        }
        Ok(v)
    }

    /// All derivatives of order 0..=k at `x`, in the scalar type of `x`.
    pub fn derivatives<T: Real>(&self, x: &T, k: usize) -> Result<Vec<T>> {
        ensure!(k <= self.max_order, "derivative order {k} exceeds table order {}", self.max_order);
        let mut out = Vec::with_capacity(k + 1);
        out.push(x.tanh());
        if k == 0 {
            return Ok(out);
        }
        let negative = *x < T::lift(0.0, x);
        let t = x.abs();
        let one = T::lift(1.0, x);
        let two = T::lift(2.0, x);
        let e = (-(two.clone() * t)).exp();
        let sp1 = two.clone() / (one.clone() + e.clone());
        let sm1 = -(two.clone() * e.clone()) / (one + e);
        for m in 1..=k {
            let mut acc = T::lift(0.0, x);
            for j in (1..=m).rev() {
                let c = T::lift_i128(self.factorial[j], x)
                    * T::lift_i128(self.stirling[m][j], x)
                    / T::lift(2f64.powi(j as i32), x);
                acc = acc * sm1.clone() + c;
            }
            acc *= sm1.clone();
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let mut v = T::lift(sign * 2f64.powi(m as i32), x) * sp1.clone() * acc;
            if negative && m % 2 == 0 {
                v = -v;
            }
            out.push(v);
        }
        Ok(out)
    }
}

pub fn table() -> &'static DerivativeTable {
    static TABLE: OnceLock<DerivativeTable> = OnceLock::new();
    TABLE.get_or_init(|| DerivativeTable::new(MAX_ORDER).expect("static order is valid"))
}

/// sigma^(m)(x) in double precision.
pub fn tanh_derivative(m: usize, x: f64) -> Result<f64> {
    table().derivative(m, x)
}

/// sigma^(0..=k)(x) in the scalar type of `x`.
pub fn tanh_derivatives<T: Real>(x: &T, k: usize) -> Result<Vec<T>> {
    table().derivatives(x, k)
}

/// Exact integer value of sigma^(m)(0).
pub fn derivative_at_zero(m: usize) -> Result<i128> {
    let v = crate::scalar::with_exact_bits(256, || tanh_derivatives(&Hp::from_f64(0.0), m))?;
    Ok(v[m].to_f64().round() as i128)
}

/// Checks |sigma^(2n-1)(0)| >= 1.
pub fn odd_derivative_at_zero_lower_bound(n: usize) -> Result<bool> {
    ensure!(n >= 1, "n must be at least 1");
    ensure!(2 * n - 1 <= MAX_ORDER, "order {} exceeds {MAX_ORDER}", 2 * n - 1);
    Ok(derivative_at_zero(2 * n - 1)?.abs() >= 1)
}

/// (2m)^(m+1) min(e^{-2x}, e^{2x}); valid for m >= 1.
pub fn derivative_upper_bound(m: usize, x: f64) -> Result<f64> {
    ensure!(m >= 1, "the derivative bound needs m >= 1");
    let m = m as f64;
    Ok((2.0 * m).powf(m + 1.0) * (-2.0 * x.abs()).exp())
}

/// Smallest R past which |sigma^(m)| is non-increasing for all 1 <= m <= k,
/// from a 1e-3 scan of [0, 4+k], plus a 0.1 margin.
pub fn decay_threshold(k: usize) -> Result<f64> {
    ensure!(k >= 1, "decay threshold needs k >= 1");
    ensure!(k <= MAX_ORDER, "order {k} exceeds {MAX_ORDER}");
    let step = 1e-3;
    let n = ((4.0 + k as f64) / step).round() as usize;
    let tab = table();
    let mut first_ok = 0usize;
    for m in 1..=k {
        let mut prev = tab.derivative(m, 0.0)?.abs();
        for i in 1..=n {
            let cur = tab.derivative(m, i as f64 * step)?.abs();
            if cur > prev {
                first_ok = first_ok.max(i);
            }
            prev = cur;
        }
    }
    Ok(first_ok as f64 * step + 0.1)
}
