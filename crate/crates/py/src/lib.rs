//! Python bindings for `pathcalc`: grid paths, catalog functionals and
//! directions, flows, difference-quotient derivatives, pathwise Itô sums and
//! the Feynman–Kac benchmarks.

use pyo3::exceptions::{PyArithmeticError, PyIOError, PyValueError};
use pyo3::prelude::*;

use pathcalc_core::deriv::{self, DerivativeSource, LadderConfig, SpaceQuotient};
use pathcalc_core::error::ErrorCategory;
use pathcalc_core::flow::{self, FlowConfig};
use pathcalc_core::functional::{builtin, direction, DirectionField, FunctionalWithDerivatives, VectorFunctional};
use pathcalc_core::ito::{self, PartitionSequence};
use pathcalc_core::{fk, pathology, rng, Error, GridPath, InterpMode};

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e.category() {
        ErrorCategory::Validation => PyValueError::new_err(msg),
        ErrorCategory::Numerical => PyArithmeticError::new_err(msg),
        ErrorCategory::Io => PyIOError::new_err(msg),
    }
}

fn parse_mode(mode: &str) -> PyResult<InterpMode> {
    mode.parse().map_err(to_py)
}

/// A sampled path on `[0, T]`.
#[pyclass(name = "Path", module = "pathcalc", frozen)]
pub struct PyPath {
    inner: GridPath,
}

#[pymethods]
impl PyPath {
    /// `values` holds one row of `d` components per grid time.
    #[new]
    #[pyo3(signature = (times, values, mode = "linear"))]
    fn new(times: Vec<f64>, values: Vec<Vec<f64>>, mode: &str) -> PyResult<Self> {
        let inner = GridPath::from_rows(times, &values, parse_mode(mode)?).map_err(to_py)?;
        Ok(PyPath { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (seed, n_steps, horizon = 1.0, x0 = vec![0.0], substream = 0))]
    fn brownian(seed: u64, n_steps: usize, horizon: f64, x0: Vec<f64>, substream: u64) -> Self {
        PyPath { inner: rng::brownian_path(seed, substream, n_steps, horizon, &x0) }
    }

    #[staticmethod]
    #[pyo3(signature = (slope, cells = 1024, horizon = 1.0, start = 0.0))]
    fn linear(slope: f64, cells: usize, horizon: f64, start: f64) -> PyResult<Self> {
        let times = pathcalc_core::path::uniform_grid(cells, horizon);
        let inner = GridPath::from_fn(times, 1, InterpMode::Linear, |s| vec![start + slope * s]).map_err(to_py)?;
        Ok(PyPath { inner })
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times().to_vec()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn horizon(&self) -> f64 {
        self.inner.horizon()
    }

    fn values(&self) -> Vec<Vec<f64>> {
        (0..self.inner.len()).map(|i| self.inner.value(i).to_vec()).collect()
    }

    fn eval(&self, t: f64) -> Vec<f64> {
        self.inner.eval(t)
    }

    fn left_limit(&self, t: f64) -> Vec<f64> {
        self.inner.left_limit(t)
    }

    #[pyo3(signature = (t, k = 0))]
    fn integral(&self, t: f64, k: usize) -> f64 {
        self.inner.integral_comp(t, k)
    }

    fn stop(&self, t: f64) -> PyResult<Self> {
        Ok(PyPath { inner: self.inner.stop(t).map_err(to_py)?.into_path() })
    }

    /// `x^h_{∧t}`: the path stopped at `t` with `h` added from `t` on.
    fn bump(&self, t: f64, h: Vec<f64>) -> PyResult<Self> {
        let stopped = self.inner.stop(t).map_err(to_py)?;
        Ok(PyPath { inner: stopped.bump(&h).map_err(to_py)?.into_path() })
    }

    fn concat(&self, s: f64, tail: &PyPath) -> PyResult<Self> {
        Ok(PyPath { inner: self.inner.concat(s, &tail.inner).map_err(to_py)? })
    }

    fn to_csv(&self) -> String {
        pathcalc_core::cli::path_csv(&self.inner)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Path(len={}, dim={}, horizon={})", self.inner.len(), self.inner.dim(), self.inner.horizon())
    }
}

/// A catalog functional, with whatever derivatives the catalog codes for it.
#[pyclass(name = "Functional", module = "pathcalc", frozen)]
pub struct PyFunctional {
    inner: FunctionalWithDerivatives,
}

#[pymethods]
impl PyFunctional {
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        Ok(PyFunctional { inner: builtin(name).map_err(to_py)? })
    }

    #[staticmethod]
    fn counterexample() -> Self {
        PyFunctional { inner: FunctionalWithDerivatives::new(pathology::counterexample(), 1) }
    }

    #[staticmethod]
    fn catalog() -> Vec<(String, usize)> {
        pathcalc_core::functional::CATALOG.iter().map(|(n, d)| (n.to_string(), *d)).collect()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label().to_string()
    }

    fn __call__(&self, t: f64, x: &PyPath) -> f64 {
        self.inner.eval(t, &x.inner)
    }
}

/// A Lipschitz direction field `γ(t, x_{∧t})`.
#[pyclass(name = "Direction", module = "pathcalc", frozen)]
pub struct PyDirection {
    inner: DirectionField,
}

#[pymethods]
impl PyDirection {
    /// Catalog name (`zero`, `one`, `eval`, `running_avg`, ...) or `const:a,b`.
    #[new]
    #[pyo3(signature = (name, dim = 1))]
    fn new(name: &str, dim: usize) -> PyResult<Self> {
        Ok(PyDirection { inner: direction(name, dim).map_err(to_py)? })
    }

    #[staticmethod]
    fn constant(c: Vec<f64>) -> Self {
        PyDirection { inner: DirectionField::constant(c) }
    }

    #[getter]
    fn lipschitz(&self) -> f64 {
        self.inner.lipschitz()
    }

    fn __call__(&self, t: f64, x: &PyPath) -> Vec<f64> {
        self.inner.eval(t, &x.inner)
    }
}

/// Difference quotients over a geometric ladder with a convergence verdict.
#[pyclass(name = "DerivativeReport", module = "pathcalc", frozen, get_all)]
pub struct PyReport {
    verdict: String,
    estimate: f64,
    spread_tail: f64,
    etas: Vec<f64>,
    quotients: Vec<f64>,
}

impl From<deriv::DerivativeReport> for PyReport {
    fn from(r: deriv::DerivativeReport) -> Self {
        PyReport {
            verdict: r.verdict.to_string(),
            estimate: r.estimate,
            spread_tail: r.spread_tail,
            etas: r.ladder.etas,
            quotients: r.ladder.quotients,
        }
    }
}

#[pymethods]
impl PyReport {
    fn __repr__(&self) -> String {
        format!("DerivativeReport(verdict={}, estimate={})", self.verdict, self.estimate)
    }
}

fn ladder(eta0: f64) -> LadderConfig {
    LadderConfig::default().with_eta0(eta0)
}

#[pyfunction]
#[pyo3(signature = (w, s, gamma, until, substep = None, tol = 1e-10))]
fn solve_flow(w: &PyPath, s: f64, gamma: &PyDirection, until: f64, substep: Option<f64>, tol: f64) -> PyResult<PyPath> {
    let cfg = FlowConfig { substep, ..FlowConfig::default() }.with_tol(tol);
    let sol = flow::solve_flow(&w.inner, s, &gamma.inner, until, &cfg).map_err(to_py)?;
    Ok(PyPath { inner: sol.path })
}

#[pyfunction]
#[pyo3(signature = (f, gamma, t, x, eta0 = 1e-2))]
fn d_gamma(f: &PyFunctional, gamma: &PyDirection, t: f64, x: &PyPath, eta0: f64) -> PyResult<PyReport> {
    Ok(deriv::d_gamma(&f.inner.base, &gamma.inner, t, &x.inner, &ladder(eta0)).map_err(to_py)?.into())
}

#[pyfunction]
#[pyo3(signature = (f, t, x, eta0 = 1e-2))]
fn d_horizontal(f: &PyFunctional, t: f64, x: &PyPath, eta0: f64) -> PyResult<PyReport> {
    Ok(deriv::d_horizontal(&f.inner.base, t, &x.inner, &ladder(eta0)).map_err(to_py)?.into())
}

#[pyfunction]
#[pyo3(signature = (f, axis, t, x, central = true, eta0 = 1e-2))]
fn d_space(f: &PyFunctional, axis: usize, t: f64, x: &PyPath, central: bool, eta0: f64) -> PyResult<PyReport> {
    let mode = if central { SpaceQuotient::Central } else { SpaceQuotient::Forward };
    Ok(deriv::d_space(&f.inner.base, axis, t, &x.inner, &ladder(eta0), mode).map_err(to_py)?.into())
}

/// `D^γF − DF − ⟨∇F, γ⟩`; `source` is `numerical` or `coded`.
#[pyfunction]
#[pyo3(signature = (f, gamma, t, x, source = "numerical"))]
fn relation_residual(f: &PyFunctional, gamma: &PyDirection, t: f64, x: &PyPath, source: &str) -> PyResult<f64> {
    let source = match source {
        "numerical" => DerivativeSource::Numerical,
        "coded" => DerivativeSource::Coded,
        other => return Err(PyValueError::new_err(format!("unknown derivative source `{other}`"))),
    };
    deriv::relation_residual(&f.inner, source, &gamma.inner, t, &x.inner, &LadderConfig::default()).map_err(to_py)
}

#[pyfunction]
fn recover_gradient(f: &PyFunctional, gammas: Vec<PyRef<'_, PyDirection>>, t: f64, x: &PyPath) -> PyResult<Vec<f64>> {
    let fields: Vec<DirectionField> = gammas.iter().map(|g| g.inner.clone()).collect();
    deriv::recover_gradient(&f.inner.base, &fields, t, &x.inner, &LadderConfig::default()).map_err(to_py)
}

fn partition(kind: &str, horizon: f64) -> PyResult<PartitionSequence> {
    match kind {
        "dyadic" => Ok(PartitionSequence::dyadic(horizon)),
        "uniform" => Ok(PartitionSequence::uniform(horizon)),
        other => Err(PyValueError::new_err(format!("unknown partition family `{other}`"))),
    }
}

/// Terminal `[x]_π(T)` as a row-major `d×d` list.
#[pyfunction]
#[pyo3(signature = (x, level, partition_kind = "dyadic"))]
fn quadratic_variation(x: &PyPath, level: usize, partition_kind: &str) -> PyResult<Vec<f64>> {
    let pi = partition(partition_kind, x.inner.horizon())?;
    let qv = ito::quadratic_covariation(&x.inner, &pi, level).map_err(to_py)?;
    Ok(qv.terminal().to_vec())
}

#[pyfunction]
#[pyo3(signature = (f, x, level, partition_kind = "dyadic"))]
fn ito_residual(f: &PyFunctional, x: &PyPath, level: usize, partition_kind: &str) -> PyResult<f64> {
    let pi = partition(partition_kind, x.inner.horizon())?;
    ito::ito_residual(&f.inner, &x.inner, &pi, level).map_err(to_py)
}

/// `(ito, stratonovich, covariation)` sums of `G = ∇F` against a one-dimensional `x`.
#[pyfunction]
#[pyo3(signature = (f, x, level, partition_kind = "dyadic"))]
fn partition_sums(f: &PyFunctional, x: &PyPath, level: usize, partition_kind: &str) -> PyResult<(f64, f64, f64)> {
    let pi = partition(partition_kind, x.inner.horizon())?;
    let g: VectorFunctional = f.inner.grad_field().map_err(to_py)?;
    let s = ito::partition_sums(&g, &x.inner, &pi, level).map_err(to_py)?;
    Ok((s.ito, s.stratonovich, s.covariation))
}

/// Monte Carlo `(mean, stderr)` of a named benchmark at `(t, x)`.
#[pyfunction]
#[pyo3(signature = (benchmark, t, x, n_paths = 10_000, step = 1e-2, seed = 42))]
fn fk_estimate(benchmark: &str, t: f64, x: &PyPath, n_paths: usize, step: f64, seed: u64) -> PyResult<(f64, f64)> {
    let b = fk::benchmark(benchmark).map_err(to_py)?;
    let e = fk::estimate_f(&b.spec, t, &x.inner, n_paths, step, seed).map_err(to_py)?;
    Ok((e.mean, e.stderr))
}

/// `(closed form, residual with coded derivatives)` of a named benchmark.
#[pyfunction]
fn fk_exact(benchmark: &str, t: f64, x: &PyPath) -> PyResult<(f64, f64)> {
    let b = fk::benchmark(benchmark).map_err(to_py)?;
    let stopped = x.inner.stop(t).map_err(to_py)?;
    let exact = b.solution.eval(t, stopped.path());
    let residual = fk::fk_residual(&b.solution, &b.spec, t, &x.inner).map_err(to_py)?;
    Ok((exact, residual))
}

#[pymodule]
fn pathcalc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPath>()?;
    m.add_class::<PyFunctional>()?;
    m.add_class::<PyDirection>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(solve_flow, m)?)?;
    m.add_function(wrap_pyfunction!(d_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(d_horizontal, m)?)?;
    m.add_function(wrap_pyfunction!(d_space, m)?)?;
    m.add_function(wrap_pyfunction!(relation_residual, m)?)?;
    m.add_function(wrap_pyfunction!(recover_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(quadratic_variation, m)?)?;
    m.add_function(wrap_pyfunction!(ito_residual, m)?)?;
    m.add_function(wrap_pyfunction!(partition_sums, m)?)?;
    m.add_function(wrap_pyfunction!(fk_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(fk_exact, m)?)?;
    Ok(())
}
