//! Python bindings for the clustered DP federated learning simulator.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyIOError, PyValueError};
use pyo3::prelude::*;

use rdpcfl_core::clustering;
use rdpcfl_core::datagen::{self, DataSpec};
use rdpcfl_core::federation::{self, Algorithm, FederationConfig};
use rdpcfl_core::mathcore;
use rdpcfl_core::privacy::{self, RdpCurve, TrainingPrivacyPlan};
use rdpcfl_core::Error;

create_exception!(rdpcfl, PrivacyInfeasibleError, PyException);
create_exception!(rdpcfl, ValidationError, PyException);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Calibration(_) => PrivacyInfeasibleError::new_err(e.to_string()),
        Error::Validation(_) => ValidationError::new_err(e.to_string()),
        Error::Io(_) | Error::Csv(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn from_json<T: serde::de::DeserializeOwned + Default>(json: Option<&str>) -> PyResult<T> {
    match json {
        None => Ok(T::default()),
        Some(s) => serde_json::from_str(s).map_err(|e| PyValueError::new_err(e.to_string())),
    }
}

/// Client data for a federation, one train/test split per client.
#[pyclass(name = "FederatedDataset", module = "rdpcfl", frozen)]
pub struct PyFederatedDataset {
    inner: datagen::FederatedDataset,
}

#[pymethods]
impl PyFederatedDataset {
    /// Generates data from a JSON data spec (defaults when omitted).
    #[staticmethod]
    #[pyo3(signature = (seed, spec_json=None))]
    fn generate(py: Python<'_>, seed: u64, spec_json: Option<&str>) -> PyResult<Self> {
        let spec: DataSpec = from_json(spec_json)?;
        let inner = py.detach(|| datagen::generate_federated(&spec, seed)).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        let inner = datagen::load_federated(&dir).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Writes client CSVs and a manifest; returns the manifest as JSON.
    fn write(&self, dir: PathBuf) -> PyResult<String> {
        let manifest = datagen::write_federated(&self.inner, &dir).map_err(to_py)?;
        serde_json::to_string(&manifest).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn num_clients(&self) -> usize {
        self.inner.clients.len()
    }

    #[getter]
    fn num_clusters(&self) -> usize {
        self.inner.num_clusters()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    #[getter]
    fn classes(&self) -> usize {
        self.inner.classes
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn true_assignments(&self) -> Vec<usize> {
        self.inner.true_assignments()
    }

    /// `(features, labels)` of one client's train (default) or test split.
    #[pyo3(signature = (client, test=false))]
    fn client_data(&self, client: usize, test: bool) -> PyResult<(Vec<Vec<f64>>, Vec<usize>)> {
        let c = self
            .inner
            .clients
            .get(client)
            .ok_or_else(|| PyValueError::new_err(format!("no client {client}")))?;
        let ds = if test { &c.test } else { &c.train };
        Ok((ds.iter().map(|(x, _)| x.to_vec()).collect(), ds.labels().to_vec()))
    }

    fn __len__(&self) -> usize {
        self.inner.clients.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "FederatedDataset(clients={}, clusters={:?}, dim={}, classes={})",
            self.inner.clients.len(),
            self.inner.cluster_sizes,
            self.inner.dim,
            self.inner.classes
        )
    }
}

/// Outcome of one federated training run.
#[pyclass(name = "RunResult", module = "rdpcfl", frozen)]
pub struct PyRunResult {
    inner: federation::RunResult,
}

#[pymethods]
impl PyRunResult {
    #[getter]
    fn algorithm(&self) -> &'static str {
        self.inner.algorithm.name()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    #[getter]
    fn num_clusters(&self) -> usize {
        self.inner.num_clusters
    }

    #[getter]
    fn noise_multipliers(&self) -> Vec<f64> {
        self.inner.noise_multipliers.clone()
    }

    #[getter]
    fn final_mean_accuracy(&self) -> f64 {
        self.inner.final_mean_accuracy()
    }

    #[getter]
    fn final_minority_accuracy(&self) -> f64 {
        self.inner.final_minority_accuracy()
    }

    #[getter]
    fn final_assignments(&self) -> Vec<usize> {
        self.inner.final_assignments().to_vec()
    }

    #[getter]
    fn clustering_correct(&self) -> bool {
        self.inner.clustering_correct()
    }

    #[getter]
    fn privacy_spent(&self) -> f64 {
        self.inner.max_privacy_spent()
    }

    /// Mean test accuracy per round.
    #[getter]
    fn accuracy_curve(&self) -> Vec<f64> {
        self.inner.records.iter().map(|r| r.mean_accuracy).collect()
    }

    /// First-round clustering report (`None` for algorithms without one).
    #[getter]
    fn first_round_json(&self) -> PyResult<Option<String>> {
        self.inner
            .first_round
            .as_ref()
            .map(|f| serde_json::to_string(f).map_err(|e| PyValueError::new_err(e.to_string())))
            .transpose()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "RunResult(algorithm={}, seed={}, epsilon={}, accuracy={:.4})",
            self.inner.algorithm,
            self.inner.seed,
            self.inner.epsilon,
            self.inner.final_mean_accuracy()
        )
    }
}

/// Runs one algorithm. `config_json` is a training config; `algorithm`
/// overrides its algorithm field.
#[pyfunction]
#[pyo3(signature = (data, seed, config_json=None, algorithm=None))]
fn run(
    py: Python<'_>,
    data: &PyFederatedDataset,
    seed: u64,
    config_json: Option<&str>,
    algorithm: Option<&str>,
) -> PyResult<PyRunResult> {
    let mut cfg: FederationConfig = from_json(config_json)?;
    if let Some(a) = algorithm {
        cfg.algorithm = a.parse::<Algorithm>().map_err(to_py)?;
    }
    let inner = py
        .detach(|| federation::run_algorithm(&cfg, &data.inner, seed))
        .map_err(to_py)?;
    Ok(PyRunResult { inner })
}

/// Per-client noise multipliers for a training config on a dataset.
#[pyfunction]
#[pyo3(signature = (data, config_json=None))]
fn calibrate_clients(data: &PyFederatedDataset, config_json: Option<&str>) -> PyResult<Vec<f64>> {
    let cfg: FederationConfig = from_json(config_json)?;
    let cal = federation::calibrate_clients(&cfg, &data.inner).map_err(to_py)?;
    Ok(cal.noise_multipliers)
}

fn plan(
    epsilon: f64,
    delta: f64,
    dataset_size: usize,
    first_batch: usize,
    batch_size: usize,
    epochs: usize,
    rounds: usize,
    selection_rounds: usize,
) -> TrainingPrivacyPlan {
    TrainingPrivacyPlan::new(epsilon, delta, dataset_size, first_batch, batch_size, epochs, rounds)
        .with_selection_rounds(selection_rounds)
}

/// Smallest noise multiplier whose total spend stays within `epsilon`.
#[pyfunction]
#[pyo3(signature = (epsilon, delta, dataset_size, first_batch, batch_size, epochs, rounds, selection_rounds=0))]
#[allow(clippy::too_many_arguments)]
fn calibrate_noise(
    epsilon: f64,
    delta: f64,
    dataset_size: usize,
    first_batch: usize,
    batch_size: usize,
    epochs: usize,
    rounds: usize,
    selection_rounds: usize,
) -> PyResult<f64> {
    let p = plan(epsilon, delta, dataset_size, first_batch, batch_size, epochs, rounds, selection_rounds);
    privacy::calibrate_noise_scale(&p).map_err(to_py)
}

/// Total `(ε, δ)` spend of a training schedule at noise multiplier `z`.
/// `epsilon_select` is required when `selection_rounds > 0`.
#[pyfunction]
#[pyo3(signature = (z, delta, dataset_size, first_batch, batch_size, epochs, rounds, selection_rounds=0, epsilon_select=None))]
#[allow(clippy::too_many_arguments)]
fn account(
    z: f64,
    delta: f64,
    dataset_size: usize,
    first_batch: usize,
    batch_size: usize,
    epochs: usize,
    rounds: usize,
    selection_rounds: usize,
    epsilon_select: Option<f64>,
) -> PyResult<f64> {
    let epsilon_select = match (selection_rounds, epsilon_select) {
        (0, e) => e.unwrap_or(0.0),
        (_, Some(e)) => e,
        (_, None) => return Err(PyValueError::new_err("selection_rounds > 0 needs epsilon_select")),
    };
    let p = plan(1.0, delta, dataset_size, first_batch, batch_size, epochs, rounds, selection_rounds)
        .with_epsilon_select(epsilon_select);
    privacy::account_training(&p, z).map_err(to_py)
}

fn orders_or_default(orders: Option<Vec<f64>>) -> Vec<f64> {
    orders.unwrap_or_else(privacy::default_orders)
}

/// RDP of the Poisson-subsampled Gaussian at each order.
#[pyfunction]
#[pyo3(signature = (q, z, orders=None))]
fn rdp_subsampled_gaussian(q: f64, z: f64, orders: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
    let c = privacy::rdp_subsampled_gaussian(q, z, &orders_or_default(orders)).map_err(to_py)?;
    Ok(c.epsilons().to_vec())
}

/// RDP of the Gaussian mechanism at each order.
#[pyfunction]
#[pyo3(signature = (sensitivity, sigma, orders=None))]
fn rdp_gaussian(sensitivity: f64, sigma: f64, orders: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
    let c = privacy::rdp_gaussian(sensitivity, sigma, &orders_or_default(orders)).map_err(to_py)?;
    Ok(c.epsilons().to_vec())
}

/// Converts an RDP curve to `ε` at `delta`.
#[pyfunction]
fn rdp_to_dp(orders: Vec<f64>, epsilons: Vec<f64>, delta: f64) -> PyResult<f64> {
    let c = RdpCurve::new(orders, epsilons).map_err(to_py)?;
    privacy::rdp_to_dp(&c, delta).map_err(to_py)
}

#[pyfunction]
fn default_orders() -> Vec<f64> {
    privacy::default_orders()
}

/// Overlap of two spherical Gaussians with mean gap `delta` and total
/// variance `sigma²` spread over `p` coordinates.
#[pyfunction]
fn theoretical_overlap(delta: f64, sigma: f64, p: usize) -> PyResult<f64> {
    clustering::theoretical_overlap(delta, sigma, p).map_err(to_py)
}

#[pyfunction]
fn switch_round(mpo: f64, total_rounds: usize) -> usize {
    clustering::switch_round(mpo, total_rounds)
}

#[pyfunction]
fn adjusted_rand_index(a: Vec<usize>, b: Vec<usize>) -> PyResult<f64> {
    if a.len() != b.len() {
        return Err(PyValueError::new_err("partitions differ in length"));
    }
    Ok(clustering::adjusted_rand_index(&a, &b))
}

/// Standard normal upper tail probability.
#[pyfunction]
fn q_function(x: f64) -> f64 {
    mathcore::q_function(x)
}

#[pymodule]
fn rdpcfl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("PrivacyInfeasibleError", m.py().get_type::<PrivacyInfeasibleError>())?;
    m.add("ValidationError", m.py().get_type::<ValidationError>())?;
    m.add_class::<PyFederatedDataset>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_clients, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_noise, m)?)?;
    m.add_function(wrap_pyfunction!(account, m)?)?;
    m.add_function(wrap_pyfunction!(rdp_subsampled_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(rdp_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(rdp_to_dp, m)?)?;
    m.add_function(wrap_pyfunction!(default_orders, m)?)?;
    m.add_function(wrap_pyfunction!(theoretical_overlap, m)?)?;
    m.add_function(wrap_pyfunction!(switch_round, m)?)?;
    m.add_function(wrap_pyfunction!(adjusted_rand_index, m)?)?;
    m.add_function(wrap_pyfunction!(q_function, m)?)?;
    Ok(())
}
