use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use kpzlab_core::fredholm::{discretization_for, laplace_transform_value, nystrom_matrix};
use kpzlab_core::kernel::KernelParams;
use kpzlab_core::moments::{self, MomentDecomposition, MomentSettings};
use kpzlab_core::{asymptotics, ldp, specfun, validation, verify, KpzError};

fn err(e: KpzError) -> PyErr {
    fn usage(e: &KpzError) -> bool {
        match e {
            KpzError::Parameter(_) | KpzError::Domain { .. } => true,
            KpzError::Context { source, .. } => usage(source),
            _ => false,
        }
    }
    if usage(&e) {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn settings(nodes: usize) -> MomentSettings {
    MomentSettings {
        nodes,
        ..MomentSettings::default()
    }
}

fn decomposition_dict<'py>(
    py: Python<'py>,
    d: &MomentDecomposition,
) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("p", d.p)?;
    out.set_item("t", d.t)?;
    out.set_item("n", d.n)?;
    out.set_item("alpha", d.alpha)?;
    out.set_item("leading", d.leading)?;
    out.set_item("leading_hat", d.leading_hat)?;
    out.set_item("tail_term", d.tail_term)?;
    out.set_item("higher", d.higher.clone())?;
    out.set_item("total", d.total)?;
    out.set_item("recombined", d.recombined())?;
    Ok(out)
}

/// Laplace-transform derivatives at one `t`, shared across moment orders.
#[pyclass(name = "LaplaceProfile", frozen)]
struct PyLaplaceProfile {
    inner: moments::LaplaceProfile,
}

#[pymethods]
impl PyLaplaceProfile {
    #[new]
    #[pyo3(signature = (t, n_max=2, l_max=0, nodes=300))]
    fn new(py: Python<'_>, t: f64, n_max: usize, l_max: usize, nodes: usize) -> PyResult<Self> {
        let inner = py
            .detach(|| moments::LaplaceProfile::build(t, n_max, l_max, settings(nodes)))
            .map_err(err)?;
        Ok(PyLaplaceProfile { inner })
    }

    #[getter]
    fn t(&self) -> f64 {
        self.inner.t
    }

    fn moment(&self, p: f64) -> PyResult<f64> {
        self.inner.moment(p).map_err(err)
    }

    fn tail_term(&self, p: f64) -> PyResult<f64> {
        self.inner.tail_term(p).map_err(err)
    }

    fn decompose<'py>(&self, py: Python<'py>, p: f64) -> PyResult<Bound<'py, PyDict>> {
        let d = py.detach(|| self.inner.decompose(p)).map_err(err)?;
        decomposition_dict(py, &d)
    }
}

/// `E[exp(-s Z(2t,0) e^{t/12})]` as a Fredholm determinant.
#[pyfunction]
#[pyo3(signature = (s, t, nodes=300))]
fn laplace_transform(py: Python<'_>, s: f64, t: f64, nodes: usize) -> PyResult<f64> {
    py.detach(|| {
        let params = KernelParams::new(s, t, 0)?;
        let disc = discretization_for(t, s.max(1.0), nodes)?;
        laplace_transform_value(params, &disc)
    })
    .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (s, t, order=0))]
fn trace_exact(s: f64, t: f64, order: usize) -> PyResult<f64> {
    kpzlab_core::fredholm::trace_exact(KernelParams::new(s, t, order).map_err(err)?).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (s, t, order=0, nodes=300))]
fn nystrom_trace(py: Python<'_>, s: f64, t: f64, order: usize, nodes: usize) -> PyResult<f64> {
    py.detach(|| {
        let params = KernelParams::new(s, t, order)?;
        let disc = discretization_for(t, s.max(1.0), nodes)?;
        Ok(nystrom_matrix(params, &disc)?.trace())
    })
    .map_err(err)
}

/// `log E[U^p]`.
#[pyfunction]
#[pyo3(signature = (p, t, nodes=300))]
fn log_moment(py: Python<'_>, p: f64, t: f64, nodes: usize) -> PyResult<f64> {
    py.detach(|| moments::moment(p, t, settings(nodes)))
        .map_err(err)
}

/// `log A_p(t)`.
#[pyfunction]
fn log_leading_term(p: f64, t: f64) -> PyResult<f64> {
    Ok(moments::leading_term(p, t).map_err(err)?.log_abs)
}

#[pyfunction]
fn leading_term_hat(py: Python<'_>, p: f64, t: f64) -> PyResult<f64> {
    py.detach(|| moments::leading_term_hat(p, t)).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (p, t, l_max=6, nodes=300))]
fn decompose<'py>(
    py: Python<'py>,
    p: f64,
    t: f64,
    l_max: usize,
    nodes: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let d = py
        .detach(|| moments::decompose(p, t, settings(nodes), l_max))
        .map_err(err)?;
    decomposition_dict(py, &d)
}

#[pyfunction]
fn rate_report<'py>(py: Python<'py>, y: f64) -> PyResult<Bound<'py, PyDict>> {
    let r = ldp::rate_report(y).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("y", r.y)?;
    out.set_item("phi", r.phi)?;
    out.set_item("chernoff", r.chernoff)?;
    out.set_item("crossover", r.crossover)?;
    Ok(out)
}

#[pyfunction]
fn chernoff_rate(y: f64) -> PyResult<f64> {
    ldp::chernoff_rate(y).map_err(err)
}

#[pyfunction]
fn phi_plus(y: f64) -> PyResult<f64> {
    asymptotics::phi_plus(y).map_err(err)
}

/// `(Ai(x), Ai'(x))`.
#[pyfunction]
fn airy(x: f64) -> (f64, f64) {
    specfun::airy(x)
}

#[pyfunction]
fn first_moment_oracle(t: f64) -> PyResult<f64> {
    validation::first_moment_oracle(t).map_err(err)
}

#[pyfunction]
fn second_moment_oracle(t: f64) -> PyResult<f64> {
    validation::second_moment_oracle(t).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (sigma, nodes=120))]
fn airy_kernel_det(sigma: f64, nodes: usize) -> PyResult<f64> {
    validation::airy_kernel_det(sigma, nodes).map_err(err)
}

/// Run one acceptance criterion; returns `(passed, summary line)`.
#[pyfunction]
#[pyo3(signature = (criterion, nodes=300))]
fn verify_criterion(py: Python<'_>, criterion: usize, nodes: usize) -> PyResult<(bool, String)> {
    let r = py
        .detach(|| verify::Suite::new(settings(nodes)).run(criterion))
        .map_err(err)?;
    Ok((r.pass(), r.line()))
}

#[pymodule]
fn kpzlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLaplaceProfile>()?;
    m.add_function(wrap_pyfunction!(laplace_transform, m)?)?;
    m.add_function(wrap_pyfunction!(trace_exact, m)?)?;
    m.add_function(wrap_pyfunction!(nystrom_trace, m)?)?;
    m.add_function(wrap_pyfunction!(log_moment, m)?)?;
    m.add_function(wrap_pyfunction!(log_leading_term, m)?)?;
    m.add_function(wrap_pyfunction!(leading_term_hat, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(rate_report, m)?)?;
    m.add_function(wrap_pyfunction!(chernoff_rate, m)?)?;
    m.add_function(wrap_pyfunction!(phi_plus, m)?)?;
    m.add_function(wrap_pyfunction!(airy, m)?)?;
    m.add_function(wrap_pyfunction!(first_moment_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(second_moment_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(airy_kernel_det, m)?)?;
    m.add_function(wrap_pyfunction!(verify_criterion, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
