//! Built-in target functions with analytic derivative oracles.

use num_complex::Complex64;

use crate::assembler::TargetFunction;
use crate::error::{ensure, Error, Result};

/// Constant in Cramer's inequality |H_m(y)| e^{-y^2/2} <= K sqrt(2^m m!).
pub const CRAMER_K: f64 = 1.0865;

pub const LABELS: [&str; 7] = ["sin_a", "cos_a", "exp_a", "poly", "runge", "gaussian", "product_sines"];

/// Parameters shared by the catalog entries; each label reads what it needs.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogParams {
    pub a: f64,
    pub d: usize,
    pub coeffs: Vec<f64>,
}

impl Default for CatalogParams {
    fn default() -> Self {
        Self { a: 1.0, d: 1, coeffs: vec![0.0, 1.0] }
    }
}

fn factorial(m: u32) -> f64 {
    (1..=m).map(f64::from).product()
}

/// i (i-1) ... (i-m+1)
fn falling(i: usize, m: u32) -> f64 {
    ((i + 1 - m as usize)..=i).map(|v| v as f64).product()
}

/// d/dx^m of sin(ax) (or cos when `cosine`).
fn trig_derivative(a: f64, m: u32, x: f64, cosine: bool) -> f64 {
    let phase = (m + if cosine { 1 } else { 0 }) % 4;
    let t = a * x;
    let v = match phase {
        0 => t.sin(),
        1 => t.cos(),
        2 => -t.sin(),
        _ => -t.cos(),
    };
    a.powi(m as i32) * v
}

fn hermite(m: u32, y: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * y);
    if m == 0 {
        return h0;
    }
    for n in 1..m {
        let h2 = 2.0 * y * h1 - 2.0 * n as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

#[derive(Debug, Clone)]
enum Kind {
    Sin,
    Cos,
    Exp,
    Poly(Vec<f64>),
    Runge,
    Gaussian,
    ProductSines,
}

#[derive(Debug, Clone)]
struct Catalogued {
    kind: Kind,
    a: f64,
    d: usize,
}

impl TargetFunction for Catalogued {
    fn dim(&self) -> usize {
        self.d
    }

    fn label(&self) -> String {
        match &self.kind {
            Kind::Sin => format!("sin_a(a={})", self.a),
            Kind::Cos => format!("cos_a(a={})", self.a),
            Kind::Exp => format!("exp_a(a={})", self.a),
            Kind::Poly(c) => format!("poly({c:?})"),
            Kind::Runge => format!("runge(a={})", self.a),
            Kind::Gaussian => format!("gaussian(a={})", self.a),
            Kind::ProductSines => format!("product_sines(d={},a={})", self.d, self.a),
        }
    }

    fn partial(&self, beta: &[u32], x: &[f64]) -> f64 {
        assert_eq!(beta.len(), self.d, "derivative order has wrong dimension");
        assert_eq!(x.len(), self.d, "point has wrong dimension");
        let a = self.a;
        let m = beta[0];
        let x0 = x[0];
        match &self.kind {
            Kind::Sin => trig_derivative(a, m, x0, false),
            Kind::Cos => trig_derivative(a, m, x0, true),
            Kind::Exp => a.powi(m as i32) * (a * x0).exp(),
            Kind::Poly(c) => c
                .iter()
                .enumerate()
                .skip(m as usize)
                .map(|(i, &ci)| ci * falling(i, m) * x0.powi((i - m as usize) as i32))
                .sum(),
            Kind::Runge => {
                let ia = Complex64::new(0.0, a);
                let base = Complex64::new(1.0, a * x0);
                let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
                let v = sign * factorial(m) * ia.powu(m) * base.powi(-(m as i32) - 1);
                v.re
            }
            Kind::Gaussian => {
                let y = a * x0;
                let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
                sign * a.powi(m as i32) * hermite(m, y) * (-y * y).exp()
            }
            Kind::ProductSines => beta.iter().zip(x).map(|(&b, &xi)| trig_derivative(a, b, xi, false)).product(),
        }
    }

    fn seminorm(&self, m: u32) -> f64 {
        let a = self.a.abs();
        let am = a.powi(m as i32);
        match &self.kind {
            Kind::Sin | Kind::Cos | Kind::ProductSines => am,
            Kind::Exp => am * self.a.max(0.0).exp(),
            Kind::Poly(c) => c
                .iter()
                .enumerate()
                .skip(m as usize)
                .map(|(i, &ci)| ci.abs() * falling(i, m))
                .sum(),
            Kind::Runge => factorial(m) * am,
            Kind::Gaussian => CRAMER_K * am * (2f64.powi(m as i32) * factorial(m)).sqrt(),
        }
    }

    fn analytic(&self) -> Option<(f64, f64)> {
        let a = self.a.abs();
        if a == 0.0 {
            return None;
        }
        match &self.kind {
            Kind::Sin | Kind::Cos | Kind::ProductSines | Kind::Runge => Some((1.0, 1.0 / a)),
            Kind::Exp => Some((self.a.max(0.0).exp(), 1.0 / a)),
            Kind::Gaussian => Some((CRAMER_K * 2f64.sqrt(), 1.0 / a)),
            Kind::Poly(_) => None,
        }
    }
}

/// Catalog entry by label. `sin_a`, `cos_a`, `exp_a`, `runge`, `gaussian` and
/// `poly` are one-dimensional; `product_sines` is prod_i sin(a x_i) in `d`
/// dimensions. `runge` is 1/(1 + a^2 x^2), `gaussian` is exp(-(a x)^2).
pub fn make(label: &str, params: &CatalogParams) -> Result<Box<dyn TargetFunction>> {
    ensure!(params.a.is_finite(), "frequency must be finite");
    let one_d = |kind: Kind| -> Box<dyn TargetFunction> { Box::new(Catalogued { kind, a: params.a, d: 1 }) };
    Ok(match label {
        "sin_a" => one_d(Kind::Sin),
        "cos_a" => one_d(Kind::Cos),
        "exp_a" => one_d(Kind::Exp),
        "runge" => one_d(Kind::Runge),
        "gaussian" => one_d(Kind::Gaussian),
        "poly" => {
            ensure!(!params.coeffs.is_empty(), "poly needs at least one coefficient");
            ensure!(params.coeffs.iter().all(|c| c.is_finite()), "poly coefficients must be finite");
            one_d(Kind::Poly(params.coeffs.clone()))
        }
        "product_sines" => {
            ensure!(params.d >= 1, "product_sines needs d >= 1");
            Box::new(Catalogued { kind: Kind::ProductSines, a: params.a, d: params.d })
        }
        other => {
            return Err(Error::Contract(format!(
                "unknown function '{other}' (known: {})",
                LABELS.join(", ")
            )))
        }
    })
}
