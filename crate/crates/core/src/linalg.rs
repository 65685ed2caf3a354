//! Dense LU factorization with partial pivoting.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct Lu<T> {
    n: usize,
    lu: Vec<T>,
    perm: Vec<usize>,
}

impl<T: Real> Lu<T> {
    /// Factors the row-major `n x n` matrix `a`.
    pub fn factor(a: &[T], n: usize) -> Result<Self> {
        assert_eq!(a.len(), n * n, "matrix storage does not match n");
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let mut piv = col;
            let mut best = lu[col * n + col].abs();
            for r in col + 1..n {
                let v = lu[r * n + col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best.is_zero() {
                return Err(Error::Conditioning(format!("matrix is singular at column {col}")));
            }
            if piv != col {
                for j in 0..n {
                    lu.swap(col * n + j, piv * n + j);
                }
                perm.swap(col, piv);
            }
            let pivot = lu[col * n + col].clone();
            for r in col + 1..n {
                let f = lu[r * n + col].clone() / pivot.clone();
                if f.is_zero() {
                    lu[r * n + col] = f;
                    continue;
                }
                for j in col + 1..n {
                    let u = lu[col * n + j].clone();
                    lu[r * n + j].add_mul(&-f.clone(), &u);
                }
                lu[r * n + col] = f;
            }
        }
        Ok(Self { n, lu, perm })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut y: Vec<T> = self.perm.iter().map(|&p| b[p].clone()).collect();
        for i in 0..n {
            for j in 0..i {
                let (l, yj) = (self.lu[i * n + j].clone(), y[j].clone());
                y[i].add_mul(&-l, &yj);
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let (u, yj) = (self.lu[i * n + j].clone(), y[j].clone());
                y[i].add_mul(&-u, &yj);
            }
            y[i] = y[i].clone() / self.lu[i * n + i].clone();
        }
        y
    }

    /// Inverse computed column by column through `solve`.
    pub fn inverse(&self) -> Vec<T> {
        let n = self.n;
        let like = self.lu[0].clone();
        let mut inv = vec![T::lift(0.0, &like); n * n];
        for c in 0..n {
            let mut e = vec![T::lift(0.0, &like); n];
            e[c] = T::lift(1.0, &like);
            for (r, v) in self.solve(&e).into_iter().enumerate() {
                inv[r * n + c] = v;
            }
        }
        inv
    }
}

/// Maximum absolute row sum.
pub fn inf_norm<T: Real>(a: &[T], n: usize) -> f64 {
    (0..n)
        .map(|i| a[i * n..(i + 1) * n].iter().map(|v| v.to_f64().abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Row-major `n x n` product.
pub fn matmul<T: Real>(a: &[T], b: &[T], n: usize) -> Vec<T> {
    let like = a[0].clone();
    let mut out = vec![T::lift(0.0, &like); n * n];
    for i in 0..n {
        for m in 0..n {
            let x = &a[i * n + m];
            if x.is_zero() {
                continue;
            }
            for j in 0..n {
                out[i * n + j].add_mul(x, &b[m * n + j]);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_a_pivoting_system() {
        let a = [0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let lu = Lu::factor(&a, 3).unwrap();
        let x = lu.solve(&[3.0, 2.0, 4.0]);
        for (v, e) in x.iter().zip([1.0, 1.0, 1.0]) {
            assert!((v - e).abs() < 1e-14);
        }
        let inv = lu.inverse();
        let id = matmul(&a, &inv, 3);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[i * 3 + j] - e).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        assert!(matches!(Lu::factor(&[1.0, 2.0, 2.0, 4.0], 2), Err(Error::Conditioning(_))));
    }
}
