//! Python bindings: catalog targets, builders, networks, verification and
//! closed-form bounds.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyTuple};

use tanhforge::assembler::{self, TargetFunction};
use tanhforge::catalog::{self, CatalogParams};
use tanhforge::netgraph::{from_document, to_document, NetworkDocument};
use tanhforge::verifier::{self, ErrorReport, Fault, Grid};
use tanhforge::{bounds, monomial, product, tanh_calculus, HpNetwork, TanhNetwork};

fn err(e: tanhforge::Error) -> PyErr {
    match e {
        tanhforge::Error::Contract(_) | tanhforge::Error::Capacity(_) | tanhforge::Error::Parse { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// A catalog function with exact derivative oracles.
#[pyclass(name = "Target", module = "tanhforge", frozen)]
pub struct PyTarget {
    inner: Box<dyn TargetFunction>,
}

#[pymethods]
impl PyTarget {
    #[new]
    #[pyo3(signature = (label, a=1.0, d=1, coeffs=None))]
    fn new(label: &str, a: f64, d: usize, coeffs: Option<Vec<f64>>) -> PyResult<Self> {
        let coeffs = coeffs.unwrap_or_else(|| CatalogParams::default().coeffs);
        let inner = catalog::make(label, &CatalogParams { a, d, coeffs }).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn evaluate(&self, x: Vec<f64>) -> PyResult<f64> {
        self.check(&x)?;
        Ok(self.inner.evaluate(&x))
    }

    fn partial(&self, beta: Vec<u32>, x: Vec<f64>) -> PyResult<f64> {
        self.check(&x)?;
        if beta.len() != x.len() {
            return Err(PyValueError::new_err("beta and x must have the same length"));
        }
        Ok(self.inner.partial(&beta, &x))
    }

    fn seminorm(&self, m: u32) -> f64 {
        self.inner.seminorm(m)
    }

    /// (Q, R) analyticity parameters, or None.
    fn analytic(&self) -> Option<(f64, f64)> {
        self.inner.analytic()
    }

    fn __repr__(&self) -> String {
        format!("Target({})", self.inner.label())
    }
}

impl PyTarget {
    fn check(&self, x: &[f64]) -> PyResult<()> {
        if x.len() != self.inner.dim() {
            return Err(PyValueError::new_err(format!("expected a point of dimension {}", self.inner.dim())));
        }
        Ok(())
    }
}

/// Tolerance bookkeeping of a two-hidden-layer build.
#[pyclass(name = "BuildPlan", module = "tanhforge", frozen)]
pub struct PyPlan {
    inner: assembler::BuildPlan,
}

#[pymethods]
impl PyPlan {
    #[getter]
    fn d(&self) -> usize {
        self.inner.d
    }
    #[getter]
    fn s(&self) -> u32 {
        self.inner.s
    }
    #[getter]
    fn k(&self) -> u32 {
        self.inner.k
    }
    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }
    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }
    #[getter]
    fn guaranteed(&self) -> f64 {
        self.inner.guaranteed
    }
    #[getter]
    fn widths(&self) -> (usize, usize) {
        self.inner.widths
    }
    #[getter]
    fn eps(&self) -> f64 {
        self.inner.eps
    }
    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta
    }
    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }
    #[getter]
    fn constant(&self) -> f64 {
        self.inner.c_const
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!("BuildPlan(d={}, s={}, k={}, N={}, guaranteed={:e})", p.d, p.s, p.k, p.n, p.guaranteed)
    }
}

#[pyfunction]
#[pyo3(signature = (target, s, k, n, delta=0.5))]
fn plan(target: &PyTarget, s: u32, k: u32, n: usize, delta: f64) -> PyResult<PyPlan> {
    Ok(PyPlan { inner: assembler::plan(target.inner.as_ref(), s, k, n, delta).map_err(err)? })
}

enum Net {
    Double(TanhNetwork),
    High(HpNetwork),
}

macro_rules! with_net {
    ($net:expr, $n:ident => $body:expr) => {
        match $net {
            Net::Double($n) => $body,
            Net::High($n) => $body,
        }
    };
}

/// A tanh network evaluated in double or high precision.
#[pyclass(name = "Network", module = "tanhforge", frozen)]
pub struct PyNetwork {
    net: Net,
}

fn wrap(precision: &str, double: impl FnOnce() -> tanhforge::Result<TanhNetwork>, high: impl FnOnce() -> tanhforge::Result<HpNetwork>) -> PyResult<PyNetwork> {
    let net = match precision {
        "double" => Net::Double(double().map_err(err)?),
        "high" => Net::High(high().map_err(err)?),
        other => return Err(PyValueError::new_err(format!("precision must be 'double' or 'high', got {other:?}"))),
    };
    Ok(PyNetwork { net })
}

#[pymethods]
impl PyNetwork {
    /// Parses a network document; `exact` weights are used in high precision.
    #[staticmethod]
    #[pyo3(signature = (text, precision="high"))]
    fn from_document(text: &str, precision: &str) -> PyResult<Self> {
        wrap(precision, || from_document::<f64>(text), || from_document::<tanhforge::Hp>(text))
    }

    fn to_document(&self) -> String {
        with_net!(&self.net, n => to_document(n))
    }

    #[getter]
    fn precision(&self) -> String {
        match &self.net {
            Net::Double(_) => "double".into(),
            Net::High(n) => format!("high:{}", n.bits()),
        }
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        with_net!(&self.net, n => n.dims())
    }

    #[getter]
    fn hidden_widths(&self) -> Vec<usize> {
        with_net!(&self.net, n => n.hidden_widths())
    }

    #[getter]
    fn sparsity(&self) -> f64 {
        with_net!(&self.net, n => n.sparsity())
    }

    #[getter]
    fn parameter_count(&self) -> usize {
        with_net!(&self.net, n => n.parameter_count())
    }

    /// Build metadata as a JSON string.
    fn meta_json(&self) -> String {
        let meta = with_net!(&self.net, n => &n.meta);
        serde_json::to_string(meta).unwrap_or_default()
    }

    /// The recorded guaranteed error bound, when the builder provides one.
    #[getter]
    fn guaranteed(&self) -> Option<f64> {
        with_net!(&self.net, n => n.meta.tolerances.get("guaranteed").and_then(|v| v.as_f64()))
    }

    fn evaluate(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        with_net!(&self.net, n => n.evaluate_f64(&x).map_err(err))
    }

    /// Partial derivatives up to order k of every output, as a list of
    /// {multi-index: value} dicts.
    fn jet<'py>(&self, py: Python<'py>, x: Vec<f64>, k: u32) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let jets: Vec<Vec<(Vec<u32>, f64)>> = with_net!(&self.net, n => {
            let jets = n.evaluate_jet(&x, k).map_err(err)?;
            jets.iter()
                .map(|j| j.partials().into_iter().map(|(b, v)| (b, tanhforge::Real::to_f64(&v))).collect())
                .collect()
        });
        jets.into_iter()
            .map(|entries| {
                let dict = PyDict::new(py);
                for (beta, v) in entries {
                    dict.set_item(PyTuple::new(py, beta)?, v)?;
                }
                Ok(dict)
            })
            .collect()
    }

    /// W^{k,inf} error of output `output` against `target` on a clustered
    /// grid of about `points` samples (default grid when None).
    #[pyo3(signature = (target, k=0, points=None, output=0))]
    fn verify(&self, target: &PyTarget, k: u32, points: Option<usize>, output: usize) -> PyResult<PyReport> {
        let d = target.inner.dim();
        let grid = match points {
            Some(p) => Grid::clustered(d, p),
            None => Grid::default_for(d),
        }
        .map_err(err)?;
        let report = with_net!(&self.net, n => {
            let grid = match n.meta.parameters.get("N").and_then(|v| v.as_u64()) {
                Some(cells) => grid.with_cell_boundaries(cells as usize).map_err(err)?,
                None => grid,
            };
            verifier::sobolev_error_at(n, output, target.inner.as_ref(), k, &grid).map_err(err)?.with_meta(&n.meta)
        });
        Ok(PyReport { inner: report })
    }

    fn __repr__(&self) -> String {
        format!("Network(dims={:?}, precision={})", self.dims(), self.precision())
    }
}

/// Measured error with the build's guaranteed bound.
#[pyclass(name = "ErrorReport", module = "tanhforge", frozen)]
pub struct PyReport {
    inner: ErrorReport,
}

#[pymethods]
impl PyReport {
    #[getter]
    fn empirical(&self) -> f64 {
        self.inner.empirical()
    }
    #[getter]
    fn seminorms(&self) -> Vec<f64> {
        self.inner.seminorms.clone()
    }
    #[getter]
    fn guaranteed(&self) -> Option<f64> {
        self.inner.guaranteed
    }
    #[getter]
    fn slack(&self) -> Option<f64> {
        self.inner.slack()
    }
    #[getter]
    fn within_bound(&self) -> bool {
        self.inner.within_bound()
    }
    #[getter]
    fn precision(&self) -> String {
        self.inner.precision.clone()
    }
    #[getter]
    fn warning(&self) -> Option<String> {
        self.inner.warning.clone()
    }
    fn to_csv(&self) -> PyResult<String> {
        self.inner.to_csv().map_err(err)
    }
    fn __repr__(&self) -> String {
        let g = self.inner.guaranteed.map_or("None".to_string(), |g| format!("{g:e}"));
        format!("ErrorReport(empirical={:e}, guaranteed={g})", self.inner.empirical())
    }
}

/// Two-hidden-layer network for `target` following `plan`.
#[pyfunction]
#[pyo3(signature = (target, plan, precision="high"))]
fn assemble(target: &PyTarget, plan: &PyPlan, precision: &str) -> PyResult<PyNetwork> {
    let f = target.inner.as_ref();
    wrap(precision, || assembler::assemble(f, &plan.inner), || assembler::assemble(f, &plan.inner))
}

/// One-hidden-layer network from a single Taylor polynomial.
#[pyfunction]
#[pyo3(signature = (target, s, delta=0.5, precision="high"))]
fn assemble_shallow(target: &PyTarget, s: u32, delta: f64, precision: &str) -> PyResult<PyNetwork> {
    let f = target.inner.as_ref();
    wrap(
        precision,
        || assembler::assemble_shallow_analytic(f, s, delta),
        || assembler::assemble_shallow_analytic(f, s, delta),
    )
}

/// Outputs y, y^3, ..., y^s on [-m, m].
#[pyfunction]
#[pyo3(signature = (s, m, k, eps, precision="high"))]
fn odd_monomials(s: u32, m: f64, k: u32, eps: f64, precision: &str) -> PyResult<PyNetwork> {
    wrap(precision, || monomial::build_odd_monomials(s, m, k, eps), || monomial::build_odd_monomials(s, m, k, eps))
}

/// Outputs y, y^2, ..., y^s on [-m, m].
#[pyfunction]
#[pyo3(signature = (s, m, k, eps, precision="high"))]
fn all_monomials(s: u32, m: f64, k: u32, eps: f64, precision: &str) -> PyResult<PyNetwork> {
    wrap(precision, || monomial::build_all_monomials(s, m, k, eps), || monomial::build_all_monomials(s, m, k, eps))
}

/// Product of d inputs on [-m, m]^d; `deep` selects the binary tree.
#[pyfunction]
#[pyo3(signature = (d, m, k, eps, deep=false, precision="high"))]
fn product_network(d: usize, m: f64, k: u32, eps: f64, deep: bool, precision: &str) -> PyResult<PyNetwork> {
    if deep {
        wrap(precision, || product::build_product_deep(d, m, k, eps), || product::build_product_deep(d, m, k, eps))
    } else {
        wrap(precision, || product::build_product_shallow(d, m, k, eps), || product::build_product_shallow(d, m, k, eps))
    }
}

#[pyfunction]
fn catalog_labels() -> Vec<&'static str> {
    catalog::LABELS.to_vec()
}

#[pyfunction]
fn tanh_derivative(m: usize, x: f64) -> PyResult<f64> {
    tanh_calculus::tanh_derivative(m, x).map_err(err)
}

#[pyfunction]
fn theorem_widths(d: usize, s: u32, n: usize) -> PyResult<(u128, u128)> {
    bounds::theorem_widths(d, s, n).map_err(err)
}

type WidthTuple = (f64, f64, &'static str, u32, usize, usize);

/// Rows (a, tolerance, variant, s, N, width) of the minimal-width table.
#[pyfunction]
fn min_width_search(a: f64, tolerances: Vec<f64>) -> PyResult<Vec<WidthTuple>> {
    let rows = bounds::min_width_search(a, &tolerances).map_err(err)?;
    Ok(rows.iter().map(|r| (r.a, r.tolerance, r.variant.name(), r.s, r.n, r.width)).collect())
}

/// (slope, non_algebraic, local_slopes) of a log-log fit over (N, error).
#[pyfunction]
fn rate_fit(points: Vec<(f64, f64)>) -> PyResult<(f64, bool, Vec<f64>)> {
    let fit = verifier::rate_fit(&points).map_err(err)?;
    Ok((fit.slope, fit.non_algebraic, fit.local_slopes))
}

/// Property ledger as CSV; `fault="monomial_weight"` corrupts one construction.
#[pyfunction]
#[pyo3(signature = (fault=None))]
fn lemma_suite(fault: Option<&str>) -> PyResult<String> {
    let fault = match fault {
        None | Some("none") => Fault::None,
        Some("monomial_weight") => Fault::MonomialWeight,
        Some(other) => return Err(PyValueError::new_err(format!("unknown fault {other:?}"))),
    };
    verifier::lemma_suite_with(fault).to_csv().map_err(err)
}

/// Checks that a document parses, returning its layer dimensions.
#[pyfunction]
fn document_dims(text: &str) -> PyResult<Vec<usize>> {
    let doc: NetworkDocument = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(doc.dims)
}

#[pymodule(name = "tanhforge")]
pub fn tanhforge_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTarget>()?;
    m.add_class::<PyPlan>()?;
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(plan, m)?)?;
    m.add_function(wrap_pyfunction!(assemble, m)?)?;
    m.add_function(wrap_pyfunction!(assemble_shallow, m)?)?;
    m.add_function(wrap_pyfunction!(odd_monomials, m)?)?;
    m.add_function(wrap_pyfunction!(all_monomials, m)?)?;
    m.add_function(wrap_pyfunction!(product_network, m)?)?;
    m.add_function(wrap_pyfunction!(catalog_labels, m)?)?;
    m.add_function(wrap_pyfunction!(tanh_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(theorem_widths, m)?)?;
    m.add_function(wrap_pyfunction!(min_width_search, m)?)?;
    m.add_function(wrap_pyfunction!(rate_fit, m)?)?;
    m.add_function(wrap_pyfunction!(lemma_suite, m)?)?;
    m.add_function(wrap_pyfunction!(document_dims, m)?)?;
    Ok(())
}
