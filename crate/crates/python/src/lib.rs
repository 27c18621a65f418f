//! Python module `mecbo`: kernels, GP surrogate, EXP3, the MEC simulator
//! and the experiment runner.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mecbo::bandit;
use mecbo::gp::{self, FitOptions};
use mecbo::harness::{self, ExperimentConfig, Method};
use mecbo::kernels;
use mecbo::mec_env;

fn err(e: mecbo::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "KernelConfig", from_py_object)]
#[derive(Clone)]
struct PyKernelConfig {
    inner: kernels::KernelConfig,
}

#[pymethods]
impl PyKernelConfig {
    #[new]
    #[pyo3(signature = (l_x=0.5, omega=1.0, lam=0.5, rho=0.0, l_s=0.2, sigma_o2=0.01, contextual=false, learn_l_s=false))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        l_x: f64,
        omega: f64,
        lam: f64,
        rho: f64,
        l_s: f64,
        sigma_o2: f64,
        contextual: bool,
        learn_l_s: bool,
    ) -> PyResult<Self> {
        let inner = kernels::KernelConfig {
            l_x,
            omega,
            lambda: lam,
            rho,
            l_s,
            sigma_o2,
            contextual,
            learn_l_s,
        };
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn l_x(&self) -> f64 {
        self.inner.l_x
    }
    #[getter]
    fn omega(&self) -> f64 {
        self.inner.omega
    }
    #[getter]
    fn lam(&self) -> f64 {
        self.inner.lambda
    }
    #[getter]
    fn rho(&self) -> f64 {
        self.inner.rho
    }
    #[getter]
    fn l_s(&self) -> f64 {
        self.inner.l_s
    }
    #[getter]
    fn sigma_o2(&self) -> f64 {
        self.inner.sigma_o2
    }
    #[getter]
    fn contextual(&self) -> bool {
        self.inner.contextual
    }

    fn prior_variance(&self) -> f64 {
        self.inner.prior_variance()
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

#[pyclass(name = "MixedPoint", from_py_object)]
#[derive(Clone)]
struct PyMixedPoint {
    inner: kernels::MixedPoint,
}

#[pymethods]
impl PyMixedPoint {
    #[new]
    #[pyo3(signature = (c, x, t, s=None))]
    fn new(c: Vec<usize>, x: Vec<f64>, t: u32, s: Option<Vec<f64>>) -> PyResult<Self> {
        Ok(Self {
            inner: kernels::MixedPoint::new(c, x, t, s).map_err(err)?,
        })
    }

    #[getter]
    fn c(&self) -> Vec<usize> {
        self.inner.c.clone()
    }
    #[getter]
    fn x(&self) -> Vec<f64> {
        self.inner.x.clone()
    }
    #[getter]
    fn t(&self) -> u32 {
        self.inner.t
    }
    #[getter]
    fn s(&self) -> Option<Vec<f64>> {
        self.inner.s.clone()
    }
}

#[pyfunction]
fn matern_52(x: Vec<f64>, x2: Vec<f64>, l_x: f64) -> PyResult<f64> {
    kernels::matern_52(&x, &x2, l_x).map_err(err)
}

#[pyfunction]
fn categorical_kernel(c: Vec<usize>, c2: Vec<usize>, omega: f64) -> PyResult<f64> {
    kernels::categorical_kernel(&c, &c2, omega).map_err(err)
}

#[pyfunction]
fn temporal_kernel(t: u32, t2: u32, rho: f64) -> PyResult<f64> {
    kernels::temporal_kernel(t, t2, rho).map_err(err)
}

#[pyfunction]
fn full_kernel(z: &PyMixedPoint, z2: &PyMixedPoint, cfg: &PyKernelConfig) -> PyResult<f64> {
    kernels::full_kernel(&z.inner, &z2.inner, &cfg.inner).map_err(err)
}

/// Row-major Gram matrix as a list of rows.
#[pyfunction]
fn gram(points: Vec<PyMixedPoint>, cfg: &PyKernelConfig) -> PyResult<Vec<Vec<f64>>> {
    let pts: Vec<_> = points.into_iter().map(|p| p.inner).collect();
    let k = kernels::gram(&pts, &cfg.inner).map_err(err)?;
    Ok(k.data.chunks(k.n.max(1)).map(<[f64]>::to_vec).collect())
}

#[pyclass(name = "GpModel")]
struct PyGpModel {
    inner: gp::GpModel,
}

#[pymethods]
impl PyGpModel {
    #[new]
    #[pyo3(signature = (cfg, normalize_y=false))]
    fn new(cfg: &PyKernelConfig, normalize_y: bool) -> PyResult<Self> {
        Ok(Self {
            inner: gp::GpModel::new(cfg.inner)
                .map_err(err)?
                .with_output_normalization(normalize_y),
        })
    }

    fn add_observation(&mut self, z: &PyMixedPoint, y: f64) -> PyResult<()> {
        self.inner.add_observation(z.inner.clone(), y).map_err(err)
    }

    /// `(mean, variance)` at `z`.
    fn posterior(&self, z: &PyMixedPoint) -> PyResult<(f64, f64)> {
        self.inner.posterior(&z.inner).map_err(err)
    }

    fn log_marginal_likelihood(&self) -> PyResult<f64> {
        self.inner.log_marginal_likelihood().map_err(err)
    }

    fn lml_gradient(&self) -> PyResult<Vec<f64>> {
        self.inner.lml_gradient().map_err(err)
    }

    /// Refit the hyperparameters; returns the new log marginal likelihood.
    #[pyo3(signature = (restarts=5, seed=0))]
    fn fit_hyperparameters(&mut self, restarts: usize, seed: u64) -> PyResult<f64> {
        let opts = FitOptions {
            restarts,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(self.inner.fit_hyperparameters(&opts, &mut rng).map_err(err)?.lml)
    }

    #[getter]
    fn config(&self) -> PyKernelConfig {
        PyKernelConfig {
            inner: *self.inner.config(),
        }
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(name = "Exp3Bank")]
struct PyExp3Bank {
    inner: bandit::Exp3Bank,
    rng: ChaCha8Rng,
}

#[pymethods]
impl PyExp3Bank {
    #[new]
    #[pyo3(signature = (agents, arms, gamma=0.1, seed=0))]
    fn new(agents: usize, arms: usize, gamma: f64, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: bandit::Exp3Bank::new(agents, arms, gamma).map_err(err)?,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    fn action_probabilities(&self, m: usize) -> PyResult<Vec<f64>> {
        if m >= self.inner.agents() {
            return Err(PyValueError::new_err(format!("agent {m} out of range")));
        }
        Ok(self.inner.action_probabilities(m))
    }

    fn sample_actions(&mut self) -> Vec<usize> {
        self.inner.sample_actions(&mut self.rng)
    }

    /// Update from a raw reward; returns its normalized value.
    fn update(&mut self, actions: Vec<usize>, y: f64) -> PyResult<f64> {
        self.inner.update(&actions, y).map_err(err)
    }

    fn log_weights(&self, m: usize) -> PyResult<Vec<f64>> {
        if m >= self.inner.agents() {
            return Err(PyValueError::new_err(format!("agent {m} out of range")));
        }
        Ok(self.inner.log_weights(m).to_vec())
    }
}

/// The MEC simulator with its own environment stream.
#[pyclass(name = "MecEnv")]
struct PyMecEnv {
    cfg: mec_env::MecConfig,
    state: mec_env::MecState,
    rng: ChaCha8Rng,
    slot: u32,
}

fn load_config(path: Option<&str>) -> PyResult<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p).map_err(err),
        None => Ok(ExperimentConfig::default()),
    }
}

#[pymethods]
impl PyMecEnv {
    /// Environment of a TOML experiment file, or preset A defaults.
    #[new]
    #[pyo3(signature = (config=None, seed=0))]
    fn new(config: Option<&str>, seed: u64) -> PyResult<Self> {
        let cfg = load_config(config)?.env;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = mec_env::init_state(&cfg, &mut rng);
        Ok(Self {
            cfg,
            state,
            rng,
            slot: 1,
        })
    }

    #[getter]
    fn slot(&self) -> u32 {
        self.slot
    }
    #[getter]
    fn m(&self) -> usize {
        self.cfg.m
    }
    #[getter]
    fn n(&self) -> usize {
        self.cfg.n
    }

    fn step(&mut self) {
        self.state = mec_env::advance(&self.cfg, &self.state, &mut self.rng);
        self.slot += 1;
    }

    /// `(I¹…I^M, L¹…L^M)` in bits and cycles.
    fn context(&self) -> Vec<f64> {
        self.state.context()
    }

    /// Total energy-delay cost of `(c, p, f)` in the current slot.
    fn edc(&self, c: Vec<usize>, p: Vec<f64>, f: Vec<f64>) -> PyResult<f64> {
        let d = mec_env::Decision { c, p, f };
        Ok(mec_env::edc(&self.cfg, &self.state, &d).map_err(err)?.total)
    }

    /// `(c, p, f, reward)` of the per-slot optimum.
    fn oracle(&self) -> PyResult<(Vec<usize>, Vec<f64>, Vec<f64>, f64)> {
        let o = mec_env::oracle_optimum(&self.cfg, &self.state).map_err(err)?;
        Ok((o.decision.c, o.decision.p, o.decision.f, o.value))
    }
}

/// Run one method and return the per-slot records as a dict of columns.
#[pyfunction]
#[pyo3(signature = (method, config=None, slots=None, reps=None, seed=None))]
fn run_experiment<'py>(
    py: Python<'py>,
    method: &str,
    config: Option<&str>,
    slots: Option<u32>,
    reps: Option<u32>,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyDict>> {
    let m: Method = method.parse().map_err(err)?;
    let cfg = load_config(config)?;
    let mut spec = cfg.spec(m);
    if let Some(v) = slots {
        spec.slots = v;
    }
    if let Some(v) = reps {
        spec.reps = v;
    }
    if let Some(v) = seed {
        spec.seed = v;
    }
    let records = py
        .detach(|| harness::run_experiment(&spec))
        .map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("rep", records.iter().map(|r| r.rep).collect::<Vec<_>>())?;
    out.set_item("slot", records.iter().map(|r| r.slot).collect::<Vec<_>>())?;
    out.set_item("y", records.iter().map(|r| r.y).collect::<Vec<_>>())?;
    out.set_item("oracle_value", records.iter().map(|r| r.oracle_value).collect::<Vec<_>>())?;
    out.set_item("regret", records.iter().map(|r| r.regret).collect::<Vec<_>>())?;
    out.set_item("cum_regret", records.iter().map(|r| r.cum_regret).collect::<Vec<_>>())?;
    out.set_item("avg_regret", records.iter().map(|r| r.avg_regret).collect::<Vec<_>>())?;
    out.set_item("edc_total", records.iter().map(|r| r.edc_total).collect::<Vec<_>>())?;
    Ok(out)
}

#[pymodule]
#[pyo3(name = "mecbo")]
fn mecbo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKernelConfig>()?;
    m.add_class::<PyMixedPoint>()?;
    m.add_class::<PyGpModel>()?;
    m.add_class::<PyExp3Bank>()?;
    m.add_class::<PyMecEnv>()?;
    m.add_function(wrap_pyfunction!(matern_52, m)?)?;
    m.add_function(wrap_pyfunction!(categorical_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(temporal_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(full_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(gram, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
