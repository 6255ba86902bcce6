//! Python bindings for the F-RAN slice simulator.
//!
//! Exposes the configuration loader, the experiment runners (run, sweep,
//! compare, oracle) and a handful of pure operations that are handy from
//! notebooks (pathloss, action codes, QoS thresholds, softmax).

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use fogsim::harness::{self, RunAggregate, SimConfig};
use fogsim::{netmodel, qlearn, queueing, topology, SimError};

fn to_py_err(e: SimError) -> PyErr {
    match e {
        SimError::Config(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Experiment configuration (wraps the TOML config of the CLI).
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: SimConfig,
}

#[pymethods]
impl PyConfig {
    /// Parse a TOML string; omitted fields take the documented defaults.
    #[new]
    #[pyo3(signature = (toml_text = "", overrides = None))]
    fn new(toml_text: &str, overrides: Option<Vec<(String, String)>>) -> PyResult<Self> {
        let ov = overrides.unwrap_or_default();
        let inner = SimConfig::from_toml_with_overrides(toml_text, &ov).map_err(to_py_err)?;
        Ok(Self { inner })
    }

    /// The fully resolved configuration as TOML.
    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    /// Apply one dotted-path override and return the new config.
    fn with_override(&self, key: &str, value: &str) -> PyResult<Self> {
        let text = self.inner.to_toml_string();
        let inner = SimConfig::from_toml_with_overrides(&text, &[(key.into(), value.into())])
            .map_err(to_py_err)?;
        Ok(Self { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(policy={}, strategy={:?}, horizon={}, seeds={:?})",
            self.inner.sim.policy, self.inner.sim.strategy, self.inner.sim.horizon, self.inner.sim.seeds
        )
    }
}

fn aggregate_dict<'py>(py: Python<'py>, a: &RunAggregate) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("seed", a.seed)?;
    d.set_item("horizon", a.horizon)?;
    d.set_item("p_bar_w", a.p_bar)?;
    d.set_item("q_bar_bits", a.q_bar)?;
    d.set_item("pmr_mean", a.pmr_mean)?;
    d.set_item("reward_mean", a.reward_mean)?;
    d.set_item("stability", a.stability.clone())?;
    d.set_item("violations_total", a.violations_total)?;
    d.set_item("cran_connections_mean", a.cran_mean)?;
    d.set_item("fap_connections_mean", a.fap_mean)?;
    d.set_item("d2d_connections_mean", a.d2d_mean)?;
    Ok(d)
}

/// Run the configured experiment (all seeds). Returns a dict with the
/// cross-seed mean, per-seed aggregates, and per-slot column arrays.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, config: &PyConfig) -> PyResult<Bound<'py, PyDict>> {
    let result = harness::run_experiment(&config.inner).map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("mean", aggregate_dict(py, &result.mean)?)?;
    let seeds = PyList::empty(py);
    for run in &result.runs {
        let d = aggregate_dict(py, &run.aggregate)?;
        d.set_item("wall_clock_s", run.wall_clock_s)?;
        seeds.append(d)?;
    }
    out.set_item("per_seed", seeds)?;

    let slots = PyDict::new(py);
    let all_rows: Vec<_> = result.runs.iter().flat_map(|r| r.rows.iter()).collect();
    slots.set_item("seed", all_rows.iter().map(|r| r.seed).collect::<Vec<_>>())?;
    slots.set_item("slot", all_rows.iter().map(|r| r.slot).collect::<Vec<_>>())?;
    slots.set_item("power_w", all_rows.iter().map(|r| r.power_w).collect::<Vec<_>>())?;
    slots.set_item("pmr", all_rows.iter().map(|r| r.pmr).collect::<Vec<_>>())?;
    slots.set_item("reward_sum", all_rows.iter().map(|r| r.reward_sum).collect::<Vec<_>>())?;
    slots.set_item(
        "queue_total",
        all_rows
            .iter()
            .map(|r| r.backlogs.iter().sum::<f64>())
            .collect::<Vec<_>>(),
    )?;
    out.set_item("slots", slots)?;
    Ok(out)
}

/// Sweep the configured dimension; returns a list of (label, mean dict).
#[pyfunction]
fn sweep<'py>(py: Python<'py>, config: &PyConfig) -> PyResult<Bound<'py, PyList>> {
    let points = harness::sweep(&config.inner).map_err(to_py_err)?;
    let list = PyList::empty(py);
    for p in points {
        let d = aggregate_dict(py, &p.result.mean)?;
        list.append((p.label, d))?;
    }
    Ok(list)
}

/// Compare the configured policies; returns a list of (policy, mean dict,
/// wall_clock_s).
#[pyfunction]
fn compare<'py>(py: Python<'py>, config: &PyConfig) -> PyResult<Bound<'py, PyList>> {
    let rows = harness::compare(&config.inner).map_err(to_py_err)?;
    let list = PyList::empty(py);
    for r in rows {
        let d = aggregate_dict(py, &r.result.mean)?;
        list.append((r.policy, d, r.result.wall_clock_s))?;
    }
    Ok(list)
}

/// Exhaustive search of the first slot; returns the optimum report.
#[pyfunction]
fn oracle<'py>(py: Python<'py>, config: &PyConfig) -> PyResult<Bound<'py, PyDict>> {
    let tmp = std::env::temp_dir().join(format!("fogsim-oracle-{}", std::process::id()));
    let body = harness::oracle_to_files(&config.inner, &tmp).map_err(to_py_err)?;
    let _ = std::fs::remove_dir_all(&tmp);
    let d = PyDict::new(py);
    for line in body.lines() {
        if let Some((key, value)) = line.split_once(' ') {
            if !key.is_empty() && key != "ue" {
                d.set_item(key, value.trim().to_string())?;
            }
        }
    }
    d.set_item("report", body)?;
    Ok(d)
}

/// Node and UE positions of the generated layout.
#[pyfunction]
fn generate_topology<'py>(py: Python<'py>, config: &PyConfig, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let t = topology::generate_topology(&config.inner.topology, seed).map_err(to_py_err)?;
    let d = PyDict::new(py);
    let pts = |v: &[topology::Point]| v.iter().map(|p| (p.x, p.y)).collect::<Vec<_>>();
    d.set_item("rrh", pts(&t.rrh_positions))?;
    d.set_item("fap", pts(&t.fap_positions))?;
    d.set_item("tue", pts(&t.tue_positions))?;
    d.set_item("fue", pts(&t.fue_positions))?;
    d.set_item("fap_antennas", t.fap_antennas)?;
    d.set_item("subchannels", t.subchannels)?;
    Ok(d)
}

/// Distance pathloss in dB (`127 + 25 log10(d_km)`).
#[pyfunction]
fn pathloss_db(distance_km: f64) -> PyResult<f64> {
    topology::pathloss_db(distance_km).map_err(to_py_err)
}

/// Noise power in watts from a PSD in dBm/Hz and a bandwidth in Hz.
#[pyfunction]
fn noise_power_from_psd(psd_dbm_hz: f64, bandwidth_hz: f64) -> f64 {
    topology::noise_power_from_psd(psd_dbm_hz, bandwidth_hz)
}

/// Decode an action code `a = n + m*N` into `(m, n)` (n is 1-based).
#[pyfunction]
fn decode_action(a: usize, subchannels: usize) -> PyResult<(usize, usize)> {
    qlearn::decode_action(a, subchannels).map_err(to_py_err)
}

/// Inverse of `decode_action`.
#[pyfunction]
fn encode_action(m: usize, n: usize, subchannels: usize) -> usize {
    qlearn::encode_action(m, n, subchannels)
}

/// SINR threshold achieving `required_rate` bits/slot over `w0_hz` and
/// `slot_seconds`.
#[pyfunction]
fn qos_sinr_threshold(required_rate: f64, w0_hz: f64, slot_seconds: f64) -> f64 {
    let params = netmodel::RateParams {
        w0_hz,
        slot_seconds,
        ..netmodel::RateParams::default()
    };
    netmodel::qos_sinr_threshold(required_rate, &params)
}

/// Lyapunov congestion metric `1/2 sum q_i^2`.
#[pyfunction]
fn lyapunov(backlogs: Vec<f64>) -> f64 {
    0.5 * backlogs.iter().map(|q| q * q).sum::<f64>()
}

/// Poisson arrivals for the given means, deterministic per (seed, slot).
#[pyfunction]
fn draw_arrivals(lambdas: Vec<f64>, seed: u64, slot: u64) -> PyResult<Vec<f64>> {
    let mut state = queueing::QueueState::new(lambdas, 64).map_err(to_py_err)?;
    state.slot = slot;
    Ok(queueing::draw_arrivals(&state, seed))
}

/// Softmax probabilities of the given values at temperature `tau`.
#[pyfunction]
fn softmax_probabilities(values: Vec<f64>, tau: f64) -> PyResult<Vec<f64>> {
    if values.is_empty() || tau <= 0.0 {
        return Err(PyValueError::new_err("need non-empty values and tau > 0"));
    }
    Ok(qlearn::softmax_probabilities(&values, tau))
}

#[pymodule]
fn fogsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(generate_topology, m)?)?;
    m.add_function(wrap_pyfunction!(pathloss_db, m)?)?;
    m.add_function(wrap_pyfunction!(noise_power_from_psd, m)?)?;
    m.add_function(wrap_pyfunction!(decode_action, m)?)?;
    m.add_function(wrap_pyfunction!(encode_action, m)?)?;
    m.add_function(wrap_pyfunction!(qos_sinr_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(lyapunov, m)?)?;
    m.add_function(wrap_pyfunction!(draw_arrivals, m)?)?;
    m.add_function(wrap_pyfunction!(softmax_probabilities, m)?)?;
    Ok(())
}
