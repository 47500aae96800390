//! Python bindings: networks, parameters, and the main analyses. Results come
//! back as plain dicts.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use scir_core::gillespie::{run_ensemble, RunConfig, Seeding};
use scir_core::harness::{builtin_names, run_scenario as run_core_scenario, Scenario};
use scir_core::meanfield::{integrate_homogeneous, integrate_network, HomoMfState, MfState};
use scir_core::netgen::{gen_barabasi_albert, gen_erdos_renyi, gen_random_regular, load_two_layer_edge_list, Layer, LayeredNetwork};
use scir_core::ode::OdeOptions;
use scir_core::params::{ActivityRates, EpidemicParams, HomogeneousParams, ModelParams};
use scir_core::qmatrix::{build_q, lambda1, PowerOptions};
use scir_core::sgp::{allocate_by_centrality, sgp_optimize, Centrality, SgpConfig};
use scir_core::threshold::classify_stability;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Converts any serializable result into Python objects through JSON.
fn to_py<'py>(py: Python<'py>, v: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(runtime_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn layer(spec: &str, n: usize, param: f64, seed: u64) -> PyResult<Layer> {
    match spec {
        "empty" => Ok(Layer::empty(n)),
        "random_regular" => gen_random_regular(n, param as usize, seed).map_err(value_err),
        "erdos_renyi" => gen_erdos_renyi(n, param, seed).map_err(value_err),
        _ => Err(PyValueError::new_err(format!("unknown layer model {spec:?}"))),
    }
}

/// Two-layer network: a static layer and a temporal layer with link probabilities.
#[pyclass(frozen)]
struct Network {
    inner: LayeredNetwork,
    hubs: Vec<usize>,
}

#[pymethods]
impl Network {
    /// Static and temporal layers from the named models ("empty",
    /// "random_regular" with a degree, "erdos_renyi" with a probability)
    /// and a uniform temporal link probability `p`.
    #[staticmethod]
    #[pyo3(signature = (n, static_model, static_param, temporal_model, temporal_param, p, seed=0))]
    fn generate(
        n: usize,
        static_model: &str,
        static_param: f64,
        temporal_model: &str,
        temporal_param: f64,
        p: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let a = layer(static_model, n, static_param, seed)?;
        let b = layer(temporal_model, n, temporal_param, seed.wrapping_add(1))?;
        let inner = LayeredNetwork::with_uniform_p(a, &b, p).map_err(value_err)?;
        Ok(Self { inner, hubs: Vec::new() })
    }

    /// Random-regular static layer and a Barabasi-Albert temporal layer.
    #[staticmethod]
    #[pyo3(signature = (n, degree, seed_size, attach, p, seed=0))]
    fn barabasi_albert(n: usize, degree: usize, seed_size: usize, attach: usize, p: f64, seed: u64) -> PyResult<Self> {
        let a = gen_random_regular(n, degree, seed).map_err(value_err)?;
        let (b, hubs) = gen_barabasi_albert(n, seed_size, attach, seed.wrapping_add(1)).map_err(value_err)?;
        let inner = LayeredNetwork::with_uniform_p(a, &b, p).map_err(value_err)?;
        Ok(Self { inner, hubs })
    }

    /// Reads a two-layer edge list file.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: load_two_layer_edge_list(path).map_err(value_err)?, hubs: Vec::new() })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    /// Seed nodes of a Barabasi-Albert temporal layer.
    #[getter]
    fn hubs(&self) -> Vec<usize> {
        self.hubs.clone()
    }

    /// Static degree plus expected temporal degree of `node`.
    fn average_degree(&self, node: usize) -> PyResult<f64> {
        self.inner.average_degree(node).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("Network(n={})", self.inner.n())
    }
}

/// Transmission and recovery rates.
#[pyclass(frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct Epidemic {
    beta_c: f64,
    beta_i: f64,
    kappa: f64,
    eta: f64,
    eta_prime: f64,
    delta: f64,
}

impl Epidemic {
    fn params(&self) -> PyResult<EpidemicParams> {
        let e = EpidemicParams {
            beta_c: self.beta_c,
            beta_i: self.beta_i,
            kappa: self.kappa,
            eta: self.eta,
            eta_prime: self.eta_prime,
            delta: self.delta,
        };
        e.validate().map_err(value_err)?;
        Ok(e)
    }
}

#[pymethods]
impl Epidemic {
    /// Unspecified rates take the reference values.
    #[new]
    #[pyo3(signature = (beta_c=None, beta_i=None, kappa=None, eta=None, eta_prime=None, delta=None))]
    fn new(
        beta_c: Option<f64>,
        beta_i: Option<f64>,
        kappa: Option<f64>,
        eta: Option<f64>,
        eta_prime: Option<f64>,
        delta: Option<f64>,
    ) -> PyResult<Self> {
        let d = EpidemicParams::standard();
        let e = Self {
            beta_c: beta_c.unwrap_or(d.beta_c),
            beta_i: beta_i.unwrap_or(d.beta_i),
            kappa: kappa.unwrap_or(d.kappa),
            eta: eta.unwrap_or(d.eta),
            eta_prime: eta_prime.unwrap_or(d.eta_prime),
            delta: delta.unwrap_or(d.delta),
        };
        e.params()?;
        Ok(e)
    }

    fn __repr__(&self) -> String {
        format!(
            "Epidemic(beta_c={}, beta_i={}, kappa={}, eta={}, eta_prime={}, delta={})",
            self.beta_c, self.beta_i, self.kappa, self.eta, self.eta_prime, self.delta
        )
    }
}

/// Activity rates shared by every node.
#[pyclass(frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct Rates {
    gamma1: f64,
    gamma2: f64,
    gamma1_i: f64,
    gamma2_i: f64,
}

impl Rates {
    fn for_nodes(&self, n: usize) -> ActivityRates {
        ActivityRates::uniform(n, self.gamma1, self.gamma2, self.gamma1_i, self.gamma2_i)
    }
}

#[pymethods]
impl Rates {
    #[new]
    #[pyo3(signature = (gamma1=0.2, gamma2=0.2, gamma1_i=0.0, gamma2_i=1.0))]
    fn new(gamma1: f64, gamma2: f64, gamma1_i: f64, gamma2_i: f64) -> Self {
        Self { gamma1, gamma2, gamma1_i, gamma2_i }
    }

    /// Rates giving stationary activity probability `s2` with deactivation rate `gamma2`.
    #[staticmethod]
    #[pyo3(signature = (s2, gamma2=0.2, gamma1_i=0.0, gamma2_i=1.0))]
    fn from_s2(s2: f64, gamma2: f64, gamma1_i: f64, gamma2_i: f64) -> PyResult<Self> {
        if !(s2 > 0.0 && s2 < 1.0) {
            return Err(PyValueError::new_err(format!("s2 must lie in (0, 1), got {s2}")));
        }
        Ok(Self { gamma1: gamma2 * s2 / (1.0 - s2), gamma2, gamma1_i, gamma2_i })
    }

    fn __repr__(&self) -> String {
        format!("Rates(gamma1={}, gamma2={}, gamma1_i={}, gamma2_i={})", self.gamma1, self.gamma2, self.gamma1_i, self.gamma2_i)
    }
}

fn model(net: &Network, epi: &Epidemic, rates: &Rates) -> PyResult<ModelParams> {
    let params = ModelParams { epi: epi.params()?, rates: rates.for_nodes(net.inner.n()) };
    params.rates.validate().map_err(value_err)?;
    Ok(params)
}

fn homogeneous(d1: f64, d2: f64, p: f64, epi: &Epidemic, rates: &Rates) -> PyResult<HomogeneousParams> {
    let hp = HomogeneousParams {
        d1,
        d2,
        p,
        gamma1: rates.gamma1,
        gamma2: rates.gamma2,
        gamma1_i: rates.gamma1_i,
        gamma2_i: rates.gamma2_i,
        epi: epi.params()?,
    };
    hp.validate().map_err(value_err)?;
    Ok(hp)
}

/// Reproduction numbers and stability case of the homogeneous model with
/// static degree `d1` and temporal degree `d2`.
#[pyfunction]
fn threshold<'py>(py: Python<'py>, d1: f64, d2: f64, p: f64, epidemic: &Epidemic, rates: &Rates) -> PyResult<Bound<'py, PyAny>> {
    let report = classify_stability(&homogeneous(d1, d2, p, epidemic, rates)?).map_err(value_err)?;
    to_py(py, &report)
}

/// Steady state of the homogeneous mean-field model from a seeded start.
#[pyfunction]
#[pyo3(signature = (d1, d2, p, epidemic, rates, seed_fraction=0.01))]
fn meanfield_homogeneous<'py>(
    py: Python<'py>,
    d1: f64,
    d2: f64,
    p: f64,
    epidemic: &Epidemic,
    rates: &Rates,
    seed_fraction: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let hp = homogeneous(d1, d2, p, epidemic, rates)?;
    let sol = integrate_homogeneous(&HomoMfState::seeded(&hp, seed_fraction), &hp, &OdeOptions::default()).map_err(runtime_err)?;
    summary(py, sol.prevalence, sol.converged, sol.final_time)
}

fn summary<'py>(py: Python<'py>, prevalence: f64, converged: bool, t: f64) -> PyResult<Bound<'py, PyAny>> {
    let d = PyDict::new(py);
    d.set_item("prevalence", prevalence)?;
    d.set_item("converged", converged)?;
    d.set_item("final_time", t)?;
    Ok(d.into_any())
}

/// Steady state of the network mean-field model from a seeded start.
#[pyfunction]
#[pyo3(signature = (network, epidemic, rates, seed_fraction=0.01))]
fn meanfield<'py>(py: Python<'py>, network: &Network, epidemic: &Epidemic, rates: &Rates, seed_fraction: f64) -> PyResult<Bound<'py, PyAny>> {
    let params = model(network, epidemic, rates)?;
    let init = MfState::seeded(&params.rates, seed_fraction).map_err(value_err)?;
    let sol = py
        .detach(|| integrate_network(&init, &network.inner, &params, &OdeOptions::default()))
        .map_err(runtime_err)?;
    summary(py, sol.prevalence, sol.converged, sol.final_time)
}

/// Monte Carlo final prevalence over `runs` exact simulations.
#[pyfunction]
#[pyo3(signature = (network, epidemic, rates, runs=100, seed_nodes=1, seed=0))]
fn simulate<'py>(
    py: Python<'py>,
    network: &Network,
    epidemic: &Epidemic,
    rates: &Rates,
    runs: usize,
    seed_nodes: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let params = model(network, epidemic, rates)?;
    let cfg = RunConfig { seeding: Seeding::Random(seed_nodes), ..RunConfig::default() };
    let res = py.detach(|| run_ensemble(&network.inner, &params, &cfg, runs, seed)).map_err(runtime_err)?;
    to_py(py, &res)
}

/// Spectral abscissa of the infection Jacobian at the disease-free state.
#[pyfunction]
fn spectral_abscissa(network: &Network, epidemic: &Epidemic, rates: &Rates) -> PyResult<f64> {
    let params = model(network, epidemic, rates)?;
    let q = build_q(&network.inner, &params.epi, &params.rates, None).map_err(value_err)?;
    Ok(lambda1(&q, &network.inner, &PowerOptions::default()).map_err(runtime_err)?.value)
}

/// Per-node activation rates under a total budget of `sum 1/gamma1`.
/// `policy` is "sgp", "degree" or "closeness".
#[pyfunction]
#[pyo3(signature = (network, epidemic, rates, budget, lower=0.08, upper=0.3, policy="sgp"))]
fn optimize<'py>(
    py: Python<'py>,
    network: &Network,
    epidemic: &Epidemic,
    rates: &Rates,
    budget: f64,
    lower: f64,
    upper: f64,
    policy: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let params = model(network, epidemic, rates)?;
    let n = network.inner.n();
    let cfg = SgpConfig::uniform(n, budget, lower, upper);
    let net = &network.inner;
    let gamma = match policy {
        "sgp" => {
            let res = py.detach(|| sgp_optimize(net, &params.epi, &params.rates, &cfg)).map_err(runtime_err)?;
            return to_py(py, &res);
        }
        "degree" => allocate_by_centrality(net, &cfg, Centrality::Degree),
        "closeness" => allocate_by_centrality(net, &cfg, Centrality::Closeness),
        _ => return Err(PyValueError::new_err(format!("unknown policy {policy:?}"))),
    }
    .map_err(value_err)?;
    let q = build_q(net, &params.epi, &params.rates.with_gamma1(&gamma), None).map_err(value_err)?;
    let value = lambda1(&q, net, &PowerOptions::default()).map_err(runtime_err)?.value;
    let d = PyDict::new(py);
    d.set_item("gamma1", gamma)?;
    d.set_item("lambda1", value)?;
    Ok(d.into_any())
}

/// Names of the built-in scenarios.
#[pyfunction]
fn scenarios() -> Vec<&'static str> {
    builtin_names()
}

/// Runs a built-in scenario or a scenario file, writing its outputs to
/// `out_dir`; returns the run summary.
#[pyfunction]
#[pyo3(signature = (name, out_dir, paper_scale=false))]
fn run_scenario<'py>(py: Python<'py>, name: &str, out_dir: PathBuf, paper_scale: bool) -> PyResult<Bound<'py, PyAny>> {
    let scenario = if builtin_names().contains(&name) {
        Scenario::builtin(name, paper_scale).map_err(value_err)?
    } else {
        let text = std::fs::read_to_string(name).map_err(value_err)?;
        Scenario::parse(&text, paper_scale).map_err(value_err)?
    };
    let report = py.detach(|| run_core_scenario(&scenario, &out_dir)).map_err(runtime_err)?;
    to_py(py, &report.summary)
}

#[pymodule]
pub fn pyscir(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Network>()?;
    m.add_class::<Epidemic>()?;
    m.add_class::<Rates>()?;
    m.add_function(wrap_pyfunction!(threshold, m)?)?;
    m.add_function(wrap_pyfunction!(meanfield_homogeneous, m)?)?;
    m.add_function(wrap_pyfunction!(meanfield, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_abscissa, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
