//! Python bindings: `import pyrwfbm`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rwfbm::fbm::{exact_second_moment as second_moment, FbmPlan};
use rwfbm::verify::check_exact_identities;
use rwfbm::{Error, Side};
use rwfbm_cli::{run_verify, CliError, Format, RunConfig, Suite, VerifyOptions};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter { .. } | Error::Domain(_) | Error::OutOfHorizon { .. } | Error::InsufficientData(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn cli_to_py(e: CliError) -> PyErr {
    match e {
        CliError::Library(e) => to_py(e),
        CliError::Config { .. } => PyValueError::new_err(e.to_string()),
        CliError::Io(_) => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Fractional kernel for a Hurst index in (0, 1).
#[pyclass(module = "pyrwfbm", frozen)]
struct Kernel {
    inner: rwfbm::Kernel,
}

#[pymethods]
impl Kernel {
    #[new]
    fn new(hurst: f64) -> PyResult<Self> {
        Ok(Self {
            inner: rwfbm::Kernel::new(hurst).map_err(to_py)?,
        })
    }

    #[getter]
    fn hurst(&self) -> f64 {
        self.inner.hurst()
    }

    /// `1 / Γ(H + 1/2)`.
    #[getter]
    fn normalization(&self) -> f64 {
        self.inner.normalization()
    }

    /// Moving-average kernel `h(s, t)`.
    fn h(&self, s: f64, t: f64) -> PyResult<f64> {
        self.inner.h(s, t).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Kernel(hurst={})", self.inner.hurst())
    }
}

/// Tail truncation of the moving average; `lookback=None` removes the ceiling.
#[pyclass(module = "pyrwfbm", frozen)]
struct TruncationPolicy {
    inner: rwfbm::TruncationPolicy,
}

#[pymethods]
impl TruncationPolicy {
    #[new]
    #[pyo3(signature = (epsilon = 1e-6, lookback = Some(4.0)))]
    fn new(epsilon: f64, lookback: Option<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: rwfbm::TruncationPolicy::new(epsilon, lookback).map_err(to_py)?,
        })
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    #[getter]
    fn lookback(&self) -> Option<f64> {
        self.inner.max_lookback
    }

    fn __repr__(&self) -> String {
        format!("TruncationPolicy(epsilon={}, lookback={:?})", self.inner.epsilon, self.inner.max_lookback)
    }
}

/// Coupled two-sided random-walk hierarchy, extended lazily.
#[pyclass(module = "pyrwfbm")]
struct TwoSidedBm {
    inner: rwfbm::TwoSidedBm,
}

#[pymethods]
impl TwoSidedBm {
    #[new]
    fn new(seed: u64) -> Self {
        Self {
            inner: rwfbm::TwoSidedBm::new(seed),
        }
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.master_seed()
    }

    /// Generates every level `j <= m` on `[-K, K]`.
    fn extend(&mut self, m: u32, horizon: f64) -> PyResult<()> {
        self.inner.extend_two_sided(m, horizon).map_err(to_py)
    }

    /// `B_m(t)` for `t >= 0`, linear between grid points.
    fn bm(&mut self, m: u32, t: f64) -> PyResult<f64> {
        if t >= 0.0 && t.is_finite() {
            self.inner.extend_two_sided(m, t.max(f64::MIN_POSITIVE)).map_err(to_py)?;
        }
        self.inner.eval(m, t).map_err(to_py)
    }

    /// `B_m` on the grid `0, 4^-m, ..., K`.
    fn bm_grid(&mut self, m: u32, horizon: f64) -> PyResult<Vec<f64>> {
        self.inner.extend_two_sided(m, horizon).map_err(to_py)?;
        let n = rwfbm::walk::grid_count(horizon, m);
        self.inner.side(Side::Right).bm(m).and_then(|b| b.grid_values(n)).map_err(to_py)
    }

    /// Twisted step `X_m(r + 1)` under the two-sided convention.
    fn step(&self, m: u32, r: i64) -> PyResult<i8> {
        self.inner.step(m, r).map_err(to_py)
    }

    /// `B_m^H` on the level-m grid of `[0, K]`, as `(values, tail_cutoff_used)`.
    #[pyo3(signature = (m, kernel, horizon = 1.0, policy = None))]
    fn fbm_grid(
        &mut self,
        m: u32,
        kernel: &Kernel,
        horizon: f64,
        policy: Option<&TruncationPolicy>,
    ) -> PyResult<(Vec<f64>, u64)> {
        let policy = policy.map_or_else(rwfbm::TruncationPolicy::default, |p| p.inner);
        let plan = FbmPlan::new(kernel.inner, m, horizon, policy).map_err(to_py)?;
        let path = plan.run(&mut self.inner).map_err(to_py)?;
        let cut = path.tail_cutoff_used;
        Ok((path.into_values(), cut))
    }

    /// Direct `O(k + V)` sum for one grid point.
    fn brute_force(&mut self, m: u32, hurst: f64, k: usize, cutoff: u64) -> PyResult<f64> {
        self.inner.ensure_steps(m, k, cutoff as usize).map_err(to_py)?;
        rwfbm::brute_force_recompute(&self.inner, m, hurst, k, cutoff).map_err(to_py)
    }

    /// Scans both sides for violations of the refinement identities up to level `m_max`.
    #[pyo3(signature = (m_max, horizon = 1.0))]
    fn check_identities<'py>(&mut self, py: Python<'py>, m_max: u32, horizon: f64) -> PyResult<Bound<'py, PyAny>> {
        let r = check_exact_identities(&mut self.inner, m_max, horizon).map_err(to_py)?;
        json_loads(py, &r.to_json_line())
    }
}

fn json_loads<'py>(py: Python<'py>, s: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (s,))
}

/// One path: dict with `t`, `bm`, `fbm` lists and the look-back used.
#[pyfunction]
#[pyo3(signature = (hurst, level, horizon = 1.0, seed = 1, epsilon = 1e-6, lookback = Some(4.0)))]
fn generate<'py>(
    py: Python<'py>,
    hurst: f64,
    level: u32,
    horizon: f64,
    seed: u64,
    epsilon: f64,
    lookback: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let kernel = rwfbm::Kernel::new(hurst).map_err(to_py)?;
    let policy = rwfbm::TruncationPolicy::new(epsilon, lookback).map_err(to_py)?;
    let plan = FbmPlan::new(kernel, level, horizon, policy).map_err(to_py)?;
    let mut bm = rwfbm::TwoSidedBm::new(seed);
    let path = plan.run(&mut bm).map_err(to_py)?;
    let n = plan.grid_count();
    let b = bm.side(Side::Right).bm(level).and_then(|b| b.grid_values(n)).map_err(to_py)?;
    let dt = path.dt();
    let d = PyDict::new(py);
    d.set_item("t", (0..=n).map(|k| k as f64 * dt).collect::<Vec<_>>())?;
    d.set_item("bm", b)?;
    d.set_item("tail_cutoff_used", path.tail_cutoff_used)?;
    d.set_item("tail_sd_ratio", path.tail_sd_ratio)?;
    d.set_item("fbm", path.into_values())?;
    Ok(d)
}

/// `Cov(B^H(s), B^H(t))` of the limit process.
#[pyfunction]
fn fbm_covariance(s: f64, t: f64, hurst: f64) -> PyResult<f64> {
    rwfbm::fbm_covariance(s, t, hurst).map_err(to_py)
}

/// `Var B^H(1)` of the limit process, by quadrature.
#[pyfunction]
fn variance_constant(hurst: f64) -> PyResult<f64> {
    rwfbm::variance_constant(hurst).map(|v| v.value).map_err(to_py)
}

/// `E[B_m^H(t_k)^2]` under the given truncation.
#[pyfunction]
#[pyo3(signature = (k, m, hurst, policy = None))]
fn exact_second_moment(k: usize, m: u32, hurst: f64, policy: Option<&TruncationPolicy>) -> PyResult<f64> {
    let kernel = rwfbm::Kernel::new(hurst).map_err(to_py)?;
    let policy = policy.map_or_else(rwfbm::TruncationPolicy::default, |p| p.inner);
    Ok(second_moment(k, m, &kernel, &policy))
}

/// Variogram estimate of `H` from values on a uniform grid; `nan` for a flat path.
#[pyfunction]
fn estimate_hurst(values: Vec<f64>) -> PyResult<f64> {
    rwfbm::estimate_hurst(&values).map(|e| e.hurst).map_err(to_py)
}

fn parse_suite(s: &str) -> PyResult<Suite> {
    s.parse().map_err(PyValueError::new_err)
}

/// Runs a verification suite; returns the list of report dicts.
#[pyfunction]
#[pyo3(signature = (suite, hurst = 0.75, level = 8, horizon = 1.0, seed = 1, replicas = 200,
                    epsilon = 1e-6, lookback = Some(4.0), c = 3.0, delta = 0.01))]
#[allow(clippy::too_many_arguments)]
fn verify<'py>(
    py: Python<'py>,
    suite: &str,
    hurst: f64,
    level: u32,
    horizon: f64,
    seed: u64,
    replicas: usize,
    epsilon: f64,
    lookback: Option<f64>,
    c: f64,
    delta: f64,
) -> PyResult<Vec<Bound<'py, PyAny>>> {
    let cfg = RunConfig {
        hurst,
        level,
        horizon,
        seed,
        epsilon,
        lookback,
        replicas,
        format: Format::Ndjson,
    };
    let opts = VerifyOptions {
        suite: parse_suite(suite)?,
        c,
        delta,
        inject_fault: false,
    };
    let mut buf = Vec::new();
    py.detach(|| run_verify(&cfg, &opts, &mut buf)).map_err(cli_to_py)?;
    let text = String::from_utf8(buf).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    text.lines().map(|l| json_loads(py, l)).collect()
}

#[pymodule]
fn pyrwfbm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Kernel>()?;
    m.add_class::<TruncationPolicy>()?;
    m.add_class::<TwoSidedBm>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(fbm_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(variance_constant, m)?)?;
    m.add_function(wrap_pyfunction!(exact_second_moment, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_hurst, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
