//! Python bindings. Structured results cross the boundary as plain dicts.

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use twinfield::formats::TallyFile;
use twinfield::netplan::{self, MuInventory, MuSpec, NetworkSetup, PortMode};
use twinfield::photon::{self, Mode, SimulationConfig};
use twinfield::sns::{self, AnalysisOptions};
use twinfield::{paramopt, Error};

create_exception!(twinfield_py, InfeasibleError, PyRuntimeError);
create_exception!(twinfield_py, ConstraintError, PyRuntimeError);

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::ConstraintViolation { .. } => ConstraintError::new_err(e.to_string()),
        e if e.is_infeasible() => InfeasibleError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn to_dict<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_obj<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn mode(name: &str) -> PyResult<Mode> {
    name.parse().map_err(to_py_err)
}

#[pyclass(name = "ProtocolParams", module = "twinfield_py", skip_from_py_object)]
#[derive(Clone)]
struct PyProtocolParams {
    inner: sns::ProtocolParams,
}

#[pymethods]
impl PyProtocolParams {
    #[new]
    #[pyo3(signature = (mu_o, mu_x, mu_y, p_x, p_y, eps_send))]
    fn new(mu_o: f64, mu_x: f64, mu_y: f64, p_x: f64, p_y: f64, eps_send: f64) -> PyResult<Self> {
        let inner = sns::ProtocolParams::new(mu_o, mu_x, mu_y, p_x, p_y, eps_send).map_err(to_py_err)?;
        Ok(PyProtocolParams { inner })
    }

    #[staticmethod]
    fn operating_point_20db() -> Self {
        PyProtocolParams {
            inner: sns::ProtocolParams::operating_point_20db(),
        }
    }

    #[staticmethod]
    fn operating_point_30db() -> Self {
        PyProtocolParams {
            inner: sns::ProtocolParams::operating_point_30db(),
        }
    }

    #[staticmethod]
    fn from_dict(d: &Bound<'_, PyAny>) -> PyResult<Self> {
        let inner: sns::ProtocolParams = from_obj(d)?;
        inner.validate().map_err(to_py_err)?;
        Ok(PyProtocolParams { inner })
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_dict(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

#[pyclass(name = "SecurityParams", module = "twinfield_py", skip_from_py_object)]
#[derive(Clone)]
struct PySecurityParams {
    inner: sns::SecurityParams,
}

#[pymethods]
impl PySecurityParams {
    #[new]
    #[pyo3(signature = (eps_cor=1e-10, eps_pa=1e-10, eps_hat=1e-10, eps_chernoff=1e-10, f_ec=1.1))]
    fn new(eps_cor: f64, eps_pa: f64, eps_hat: f64, eps_chernoff: f64, f_ec: f64) -> PyResult<Self> {
        let inner = sns::SecurityParams {
            eps_cor,
            eps_pa,
            eps_hat,
            eps_chernoff,
            f_ec,
        };
        inner.validate().map_err(to_py_err)?;
        Ok(PySecurityParams { inner })
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_dict(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

#[pyclass(name = "ChannelSpec", module = "twinfield_py", skip_from_py_object)]
#[derive(Clone)]
struct PyChannelSpec {
    inner: photon::ChannelSpec,
}

#[pymethods]
impl PyChannelSpec {
    /// Total loss in dB split evenly over both arms.
    #[staticmethod]
    fn symmetric(total_loss_db: f64) -> PyResult<Self> {
        let inner = photon::ChannelSpec::symmetric(total_loss_db);
        inner.validate().map_err(to_py_err)?;
        Ok(PyChannelSpec { inner })
    }

    #[staticmethod]
    fn symmetric_km(total_km: f64) -> PyResult<Self> {
        let inner = photon::ChannelSpec::symmetric_km(total_km);
        inner.validate().map_err(to_py_err)?;
        Ok(PyChannelSpec { inner })
    }

    #[staticmethod]
    fn from_dict(d: &Bound<'_, PyAny>) -> PyResult<Self> {
        let inner: photon::ChannelSpec = from_obj(d)?;
        inner.validate().map_err(to_py_err)?;
        Ok(PyChannelSpec { inner })
    }

    #[getter]
    fn total_loss_db(&self) -> f64 {
        self.inner.total_loss_db()
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_dict(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

fn security(sec: Option<PyRef<'_, PySecurityParams>>) -> sns::SecurityParams {
    sec.map(|s| s.inner).unwrap_or_default()
}

/// `(lower, upper)` Chernoff bounds on the expectation behind an observed
/// count `x`.
#[pyfunction]
fn chernoff_expected_bounds(x: f64, eps: f64) -> PyResult<(f64, f64)> {
    Ok((
        sns::chernoff_expected_lower(x, eps).map_err(to_py_err)?,
        sns::chernoff_expected_upper(x, eps).map_err(to_py_err)?,
    ))
}

#[pyfunction]
fn bits_per_second(rate_per_pulse: f64, clock_hz: f64, signal_duty: f64) -> PyResult<f64> {
    sns::bits_per_second(rate_per_pulse, clock_hz, signal_duty).map_err(to_py_err)
}

/// Secure key rate of one pair; returns the full report as a dict.
#[pyfunction]
#[pyo3(signature = (params, channel, pulses, security=None, mode="expected", seed=0))]
fn simulate_keyrate(
    py: Python<'_>,
    params: PyRef<'_, PyProtocolParams>,
    channel: PyRef<'_, PyChannelSpec>,
    pulses: f64,
    security: Option<PyRef<'_, PySecurityParams>>,
    mode: &str,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let cfg = SimulationConfig {
        mode: self::mode(mode)?,
        seed,
        ..Default::default()
    };
    let sec = self::security(security);
    let (p, ch) = (params.inner, channel.inner);
    let report = py
        .detach(|| photon::simulate_keyrate(&p, &ch, pulses, &sec, &cfg))
        .map_err(to_py_err)?;
    to_dict(py, &report)
}

/// Expected detection tally as a tally-file dict.
#[pyfunction]
fn expected_tally(
    py: Python<'_>,
    params: PyRef<'_, PyProtocolParams>,
    channel: PyRef<'_, PyChannelSpec>,
    pulses: f64,
) -> PyResult<Py<PyAny>> {
    let tally = photon::expected_tally(&params.inner, &channel.inner, &photon::PhaseFilter::default(), pulses)
        .map_err(to_py_err)?;
    let file = TallyFile::from_tally(
        &tally,
        twinfield::formats::TallyMetadata {
            pulses,
            loss_db: Some(channel.inner.total_loss_db()),
            pair: None,
        },
    );
    to_dict(py, &file)
}

/// Key rate from a tally-file dict (the `data` part of a tally document).
#[pyfunction]
#[pyo3(signature = (tally, params, security=None, seed=0))]
fn keyrate_from_tally(
    py: Python<'_>,
    tally: &Bound<'_, PyAny>,
    params: PyRef<'_, PyProtocolParams>,
    security: Option<PyRef<'_, PySecurityParams>>,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let file: TallyFile = from_obj(tally)?;
    let sec = self::security(security);
    let filter = photon::PhaseFilter::default();
    let t = file.to_tally(&params.inner, &filter).map_err(to_py_err)?;
    let measured = if t.raw_key_length() > 0.0 {
        file.aopp_measurement(&t, u64::MAX, seed).map_err(to_py_err)?
    } else {
        sns::AoppMeasurement::default()
    };
    let report =
        sns::analyze(&t, &params.inner, &sec, &measured, &AnalysisOptions::default()).map_err(to_py_err)?;
    to_dict(py, &report)
}

#[pyfunction]
#[pyo3(signature = (channel, pulses, security=None, seed=0, bounds=None))]
fn optimize_params(
    py: Python<'_>,
    channel: PyRef<'_, PyChannelSpec>,
    pulses: f64,
    security: Option<PyRef<'_, PySecurityParams>>,
    seed: u64,
    bounds: Option<&Bound<'_, PyAny>>,
) -> PyResult<Py<PyAny>> {
    let b: paramopt::ParamBounds = match bounds {
        Some(d) => from_obj(d)?,
        None => Default::default(),
    };
    let sec = self::security(security);
    let ch = channel.inner;
    let result = py
        .detach(|| paramopt::optimize_params(&ch, pulses, &sec, &b, seed))
        .map_err(to_py_err)?;
    to_dict(py, &result)
}

#[pyfunction]
fn mu_capacity(n_users: u32, ports_per_user: u32) -> PyResult<u64> {
    let mu = MuSpec::new(n_users, ports_per_user).map_err(to_py_err)?;
    netplan::mu_capacity(&mu).map_err(to_py_err)
}

#[pyfunction]
fn max_pairs_bruteforce(n_users: u32, ports_per_user: u32) -> PyResult<u64> {
    let mu = MuSpec::new(n_users, ports_per_user).map_err(to_py_err)?;
    netplan::max_pairs_bruteforce(&mu).map_err(to_py_err)
}

fn inventory(d: Option<&Bound<'_, PyAny>>) -> PyResult<MuInventory> {
    match d {
        Some(d) => from_obj(d),
        None => Ok(MuInventory::example_32_port()),
    }
}

fn ports(strict: bool) -> PortMode {
    if strict {
        PortMode::Strict
    } else {
        PortMode::Inclusive
    }
}

/// Capacity report of an inventory dict; the 32-port example by default.
#[pyfunction]
#[pyo3(signature = (inventory=None, strict_ports=false))]
fn inventory_capacity(py: Python<'_>, inventory: Option<&Bound<'_, PyAny>>, strict_ports: bool) -> PyResult<Py<PyAny>> {
    let inv = self::inventory(inventory)?;
    let report = inv.total_capacity(ports(strict_ports)).map_err(to_py_err)?;
    to_dict(py, &report)
}

#[pyfunction]
#[pyo3(signature = (active_users, requests, inventory=None, strict_ports=false))]
fn schedule_pairs(
    py: Python<'_>,
    active_users: Vec<u32>,
    requests: Vec<(u32, u32)>,
    inventory: Option<&Bound<'_, PyAny>>,
    strict_ports: bool,
) -> PyResult<Py<PyAny>> {
    let inv = self::inventory(inventory)?;
    let plan = netplan::schedule(&inv, &active_users, &requests, ports(strict_ports)).map_err(to_py_err)?;
    netplan::validate_plan(&plan, &requests).map_err(to_py_err)?;
    to_dict(py, &plan)
}

/// Every inventory user requesting keys pairwise over `distance_km`.
#[pyfunction]
#[pyo3(signature = (distance_km, pulses=1e11, inventory=None, seed=0))]
fn network_rate(
    py: Python<'_>,
    distance_km: f64,
    pulses: f64,
    inventory: Option<&Bound<'_, PyAny>>,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let inv = self::inventory(inventory)?;
    let setup = NetworkSetup {
        pulses,
        sim: SimulationConfig {
            seed,
            ..Default::default()
        },
        ..Default::default()
    };
    let (_, report) = py
        .detach(|| netplan::symmetric_network(&inv, distance_km, &setup, PortMode::Inclusive))
        .map_err(to_py_err)?;
    to_dict(py, &report)
}

#[pymodule]
fn twinfield_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProtocolParams>()?;
    m.add_class::<PySecurityParams>()?;
    m.add_class::<PyChannelSpec>()?;
    m.add("InfeasibleError", m.py().get_type::<InfeasibleError>())?;
    m.add("ConstraintError", m.py().get_type::<ConstraintError>())?;
    m.add_function(wrap_pyfunction!(chernoff_expected_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(bits_per_second, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_keyrate, m)?)?;
    m.add_function(wrap_pyfunction!(expected_tally, m)?)?;
    m.add_function(wrap_pyfunction!(keyrate_from_tally, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_params, m)?)?;
    m.add_function(wrap_pyfunction!(mu_capacity, m)?)?;
    m.add_function(wrap_pyfunction!(max_pairs_bruteforce, m)?)?;
    m.add_function(wrap_pyfunction!(inventory_capacity, m)?)?;
    m.add_function(wrap_pyfunction!(schedule_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(network_rate, m)?)?;
    Ok(())
}
