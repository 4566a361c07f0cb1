use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use spindirac::cli;
use spindirac::conformal_opt::{self, TorusVerificationSpec};
use spindirac::cpn_harmonic::{self as cpn, Surface, VeroneseTolerances};
use spindirac::dirac_sphere::{self, BarSweepSpec, SphereConformalFactor};
use spindirac::dirac_torus::{self, FourierField};
use spindirac::exact_spectrum::{self, SpectrumReport};
use spindirac::lattice_spin::TorusGeometry;

fn to_py(e: spindirac::Error) -> PyErr {
    if cli::exit_code_for(&e) == cli::EXIT_SOLVER {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn to_object<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn levels(report: &SpectrumReport) -> Vec<(f64, usize, usize)> {
    report
        .entries
        .iter()
        .map(|e| (e.value, e.complex_multiplicity, e.quaternionic_multiplicity))
        .collect()
}

fn jmax2(jmax: f64) -> PyResult<i64> {
    let j2 = (2.0 * jmax).round();
    if (2.0 * jmax - j2).abs() > 1e-9 || j2 < 1.0 || j2 as i64 % 2 == 0 {
        return Err(PyValueError::new_err(format!("jmax must be a positive half-integer, got {jmax}")));
    }
    Ok(j2 as i64)
}

/// Flat spin torus `C / (Z + (a + ib) Z)` with spin character `(chi1, chi2)`.
#[pyclass(name = "Torus", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTorus {
    inner: TorusGeometry,
}

#[pymethods]
impl PyTorus {
    #[new]
    #[pyo3(signature = (a, b, chi1=0, chi2=0))]
    fn new(a: f64, b: f64, chi1: u8, chi2: u8) -> PyResult<Self> {
        Ok(Self { inner: TorusGeometry::from_parts(a, b, chi1, chi2).map_err(to_py)? })
    }

    #[getter]
    fn a(&self) -> f64 {
        self.inner.lattice().a()
    }

    #[getter]
    fn b(&self) -> f64 {
        self.inner.lattice().b()
    }

    #[getter]
    fn area(&self) -> f64 {
        self.inner.area()
    }

    #[getter]
    fn character(&self) -> (u8, u8) {
        let c = self.inner.character();
        (c.chi1(), c.chi2())
    }

    /// `[(value, complex_mult, quaternionic_mult), ...]` covering `count` positive levels.
    fn spectrum(&self, count: usize) -> PyResult<Vec<(f64, usize, usize)>> {
        Ok(levels(&exact_spectrum::torus_spectrum(&self.inner, count).map_err(to_py)?))
    }

    /// Flat normalized first eigenvalue and the `b` threshold of the minimality window.
    fn flat_threshold(&self) -> PyResult<(f64, f64)> {
        conformal_opt::flat_threshold(&self.inner).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        let (c1, c2) = self.character();
        format!("Torus(a={}, b={}, chi1={c1}, chi2={c2})", self.a(), self.b())
    }
}

/// Real trigonometric polynomial on a torus, used as the conformal factor `ω`.
#[pyclass(name = "ConformalFactor", skip_from_py_object)]
#[derive(Clone)]
struct PyConformalFactor {
    inner: FourierField,
}

#[pymethods]
impl PyConformalFactor {
    #[new]
    fn new(torus: &PyTorus) -> Self {
        Self { inner: FourierField::zero(&torus.inner) }
    }

    #[staticmethod]
    fn random(torus: &PyTorus, band: i64, amplitude: f64, seed: u64) -> PyResult<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inner = conformal_opt::random_field(&torus.inner, band, amplitude, &mut rng).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn add_cos(&mut self, m1: i64, m2: i64, amplitude: f64) {
        let mode = FourierField::cos_mode(self.inner.geometry(), (m1, m2), amplitude);
        self.inner = self.inner.axpy(1.0, &mode);
    }

    fn add_sin(&mut self, m1: i64, m2: i64, amplitude: f64) {
        let mode = FourierField::sin_mode(self.inner.geometry(), (m1, m2), amplitude);
        self.inner = self.inner.axpy(1.0, &mode);
    }

    fn shift(&mut self, c: f64) {
        self.inner = self.inner.shifted(c);
    }

    /// Value at lattice coordinates `(s, t)` in `[0, 1)²`.
    fn __call__(&self, s: f64, t: f64) -> f64 {
        self.inner.eval(s, t)
    }

    fn variance(&self) -> f64 {
        self.inner.variance()
    }
}

#[pyfunction]
fn sphere_spectrum(count: usize) -> PyResult<Vec<(f64, usize, usize)>> {
    Ok(levels(&exact_spectrum::sphere_spectrum(count).map_err(to_py)?))
}

/// Plane-wave Galerkin spectrum of `e^{2ω}` times the flat metric.
#[pyfunction]
fn solve_torus(py: Python<'_>, omega: &PyConformalFactor, cutoff: f64) -> PyResult<Py<PyAny>> {
    let s = dirac_torus::solve_conformal(omega.inner.geometry(), &omega.inner, cutoff).map_err(to_py)?;
    let lambda_bar = s.lambda_bar().map_err(to_py)?;
    to_object(
        py,
        &serde_json::json!({
            "eigenvalues": levels(&s.report),
            "lambda_bar_1": lambda_bar,
            "area": s.area,
            "trusted_below": s.trusted_below,
        }),
    )
}

/// Spectrum of `e^{2ω} g_round` with `ω = Σ c Y_lm` given as `[(l, m, c), ...]`.
#[pyfunction]
#[pyo3(signature = (harmonics, jmax=7.5))]
fn solve_sphere(py: Python<'_>, harmonics: Vec<(i64, i64, f64)>, jmax: f64) -> PyResult<Py<PyAny>> {
    let omega = harmonics
        .iter()
        .fold(SphereConformalFactor::zero(), |w, &(l, m, c)| w.add(&SphereConformalFactor::harmonic(l, m, c)));
    let s = dirac_sphere::solve_conformal_sphere(&omega, jmax2(jmax)?).map_err(to_py)?;
    to_object(
        py,
        &serde_json::json!({
            "eigenvalues": levels(&s.report),
            "lambda_bar_1": s.lambda_bar,
            "area": s.area,
        }),
    )
}

#[pyfunction]
#[pyo3(signature = (torus, perturbations=20, seed=1, band=1, amplitude=0.05, cutoff=None, max_steps=200, tol=1e-6))]
#[allow(clippy::too_many_arguments)]
fn verify_torus(
    py: Python<'_>,
    torus: &PyTorus,
    perturbations: usize,
    seed: u64,
    band: i64,
    amplitude: f64,
    cutoff: Option<f64>,
    max_steps: usize,
    tol: f64,
) -> PyResult<Py<PyAny>> {
    let spec = TorusVerificationSpec { perturbations, seed, band, amplitude, cutoff, max_steps, tol };
    let report = py.detach(|| conformal_opt::verify_torus(&torus.inner, &spec)).map_err(to_py)?;
    to_object(py, &report)
}

#[pyfunction]
#[pyo3(signature = (samples=100, band=3, amplitude=0.3, seed=7, jmax=7.5, tolerance=1e-6))]
fn bar_sweep(
    py: Python<'_>,
    samples: usize,
    band: i64,
    amplitude: f64,
    seed: u64,
    jmax: f64,
    tolerance: f64,
) -> PyResult<Py<PyAny>> {
    let spec = BarSweepSpec { count: samples, band, amplitude, seed, jmax2: jmax2(jmax)?, include_round: true, tolerance };
    let report = py.detach(|| dirac_sphere::bar_sweep(&spec)).map_err(to_py)?;
    to_object(py, &report)
}

#[pyfunction]
#[pyo3(signature = (m, n_theta=48, n_phi=64))]
fn veronese_check(py: Python<'_>, m: usize, n_theta: usize, n_phi: usize) -> PyResult<Py<PyAny>> {
    let surface = Surface::sphere(n_theta, n_phi);
    let check = cpn::veronese_check(m, &surface, &VeroneseTolerances::default()).map_err(to_py)?;
    to_object(py, &check)
}

/// Run the command-line tool in-process; returns its exit code.
#[pyfunction]
fn run_cli(args: Vec<String>) -> i32 {
    cli::run(std::iter::once("spindirac".to_string()).chain(args))
}

#[pymodule]
#[pyo3(name = "spindirac")]
fn spindirac_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTorus>()?;
    m.add_class::<PyConformalFactor>()?;
    m.add_function(wrap_pyfunction!(sphere_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(solve_torus, m)?)?;
    m.add_function(wrap_pyfunction!(solve_sphere, m)?)?;
    m.add_function(wrap_pyfunction!(verify_torus, m)?)?;
    m.add_function(wrap_pyfunction!(bar_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(veronese_check, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
