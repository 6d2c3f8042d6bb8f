//! Python bindings: `import pyraqm`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use raqm::controller::{emit_sequence, generate_sequence, parse_sequence, validate_sequence};
use raqm::dlcz::{self, SourceParams};
use raqm::encoding::{CalibrationQuality, CalibrationSet};
use raqm::memarray::{ArrayGeometry, CellIndex, MemoryArray, PhysicsParams, ReadOutcome, WriteOutcome};
use raqm::qstate::{self, DensityMatrix, PolLabel};
use raqm::scenario::{run_scenario as core_run, Scenario, ScenarioConfig, ScenarioKind};
use raqm::{rng_from_seed, Error, SimRng};

fn err(e: Error) -> PyErr {
    match e {
        Error::Protocol(_) | Error::InvalidSequence(_) | Error::Capacity { .. } | Error::HeraldTimeout(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn cell(i: usize) -> PyResult<CellIndex> {
    CellIndex::new(i).map_err(err)
}

fn matrix(rho: &DensityMatrix) -> Vec<Vec<Complex64>> {
    let n = rho.dim();
    (0..n).map(|i| (0..n).map(|j| rho.get(i, j)).collect()).collect()
}

/// A polarization qubit on the Bloch sphere.
#[pyclass(frozen, from_py_object)]
#[derive(Clone, Copy)]
struct Polarization(qstate::Polarization);

#[pymethods]
impl Polarization {
    #[new]
    fn new(theta: f64, phi: f64) -> PyResult<Self> {
        qstate::Polarization::new(theta, phi).map(Self).map_err(err)
    }

    /// One of "H", "V", "+", "L".
    #[staticmethod]
    fn from_label(label: &str) -> PyResult<Self> {
        PolLabel::from_symbol(label)
            .map(|l| Self(l.polarization()))
            .ok_or_else(|| PyValueError::new_err(format!("unknown polarization label {label:?}")))
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.0.theta()
    }

    #[getter]
    fn phi(&self) -> f64 {
        self.0.phi()
    }

    fn ket(&self) -> Vec<Complex64> {
        self.0.ket().to_vec()
    }

    fn __repr__(&self) -> String {
        match self.0.label() {
            Some(l) => format!("Polarization({})", l.symbol()),
            None => format!("Polarization(theta={}, phi={})", self.0.theta(), self.0.phi()),
        }
    }
}

/// The 72-cell array with its own random stream.
#[pyclass(module = "pyraqm")]
struct Memory {
    array: MemoryArray,
    rng: SimRng,
}

#[pymethods]
impl Memory {
    #[new]
    #[pyo3(signature = (seed=0, noiseless=false))]
    fn new(seed: u64, noiseless: bool) -> PyResult<Self> {
        let params = if noiseless { PhysicsParams::noiseless() } else { PhysicsParams::default() };
        let array = MemoryArray::new(ArrayGeometry::default(), params).map_err(err)?;
        Ok(Self { array, rng: rng_from_seed(seed) })
    }

    #[getter]
    fn filling(&self) -> usize {
        self.array.filling()
    }

    fn occupied(&self, c: usize) -> PyResult<bool> {
        Ok(self.array.cell(cell(c)?).occupied())
    }

    fn eta_write(&self, c: usize) -> PyResult<f64> {
        Ok(self.array.eta_write(cell(c)?))
    }

    fn eta_read(&self, c: usize) -> PyResult<f64> {
        Ok(self.array.eta_read(cell(c)?))
    }

    fn tau_fidelity(&self, c: usize) -> PyResult<f64> {
        Ok(self.array.tau_fidelity(cell(c)?))
    }

    /// Stores `pol` at time `t_us`. Returns False when the excitation is lost.
    #[pyo3(signature = (c, pol, t_us, postselect=true))]
    fn write(&mut self, c: usize, pol: Polarization, t_us: f64, postselect: bool) -> PyResult<bool> {
        let c = cell(c)?;
        let rho = qstate::polarization_to_density(pol.0);
        if postselect {
            self.array.write_postselected(c, rho, t_us).map_err(err)?;
            return Ok(true);
        }
        Ok(self.array.write(c, rho, t_us, &mut self.rng).map_err(err)? == WriteOutcome::Stored)
    }

    /// Retrieves the qubit as a 2x2 density matrix, or None when the read photon is lost.
    #[pyo3(signature = (c, t_us, postselect=true))]
    fn read(&mut self, c: usize, t_us: f64, postselect: bool) -> PyResult<Option<Vec<Vec<Complex64>>>> {
        let c = cell(c)?;
        if postselect {
            return self.array.read_postselected(c, t_us).map(|r| Some(matrix(&r))).map_err(err);
        }
        Ok(match self.array.read(c, t_us, &mut self.rng).map_err(err)? {
            ReadOutcome::Retrieved(r) => Some(matrix(&r)),
            ReadOutcome::Lost => None,
        })
    }

    /// Drives cell `c` without storing anything, as crosstalk on its neighbours.
    fn access(&mut self, c: usize) -> PyResult<()> {
        self.array.access_cell(cell(c)?);
        Ok(())
    }
}

/// Fidelity of a density matrix (nested lists) to a polarization.
#[pyfunction]
fn fidelity(rho: Vec<Vec<Complex64>>, pol: Polarization) -> PyResult<f64> {
    let n = rho.len();
    if rho.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("density matrix must be square"));
    }
    let m = DensityMatrix::new(DMatrix::from_fn(n, n, |i, j| rho[i][j])).map_err(err)?;
    qstate::fidelity_to_pure(&m, &pol.0.ket()).map_err(err)
}

/// Checks a sequence in text form. Returns violation messages, empty when valid.
#[pyfunction]
#[pyo3(signature = (text, window_us=None))]
fn validate(text: &str, window_us: Option<u32>) -> PyResult<Vec<String>> {
    let seq = parse_sequence(text).map_err(err)?;
    Ok(match validate_sequence(&seq, window_us) {
        Ok(()) => Vec::new(),
        Err(v) => v.iter().map(|x| x.to_string()).collect(),
    })
}

/// Random write/read sequence in text form.
#[pyfunction]
#[pyo3(signature = (n_ops, seed, window_us=Some(500)))]
fn generate(n_ops: usize, seed: u64, window_us: Option<u32>) -> PyResult<String> {
    let seq = generate_sequence(n_ops, window_us, &mut rng_from_seed(seed)).map_err(err)?;
    Ok(emit_sequence(&seq))
}

/// Runs a named scenario. Returns `(trace, report)` as Python dicts.
#[pyfunction]
#[pyo3(signature = (kind, seed, config=None))]
fn run_scenario<'py>(py: Python<'py>, kind: &str, seed: u64, config: Option<&str>) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyAny>)> {
    let kind: ScenarioKind = kind.parse().map_err(err)?;
    let config = match config {
        Some(c) => ScenarioConfig::from_json(c).map_err(err)?,
        None => ScenarioConfig::default(),
    };
    let s = Scenario { kind, seed, config };
    let out = py.detach(|| core_run(&s)).map_err(err)?;
    let trace = serde_json::to_string(&out.trace).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let report = out.report.to_json().map_err(err)?;
    Ok((json_to_py(py, &trace)?, json_to_py(py, &report)?))
}

fn source_params(p_exc: Option<f64>, dead_time_us: Option<f64>) -> SourceParams {
    let mut p = SourceParams::default();
    if let Some(x) = p_exc {
        p.p_exc = x;
    }
    if let Some(d) = dead_time_us {
        p.catch_dead_time_us = d;
    }
    p
}

/// Probability that `k` heralds all complete within `t_us`.
#[pyfunction]
#[pyo3(signature = (t_us, k, p_exc=None, dead_time_us=None))]
fn prob_k_pairs_within(t_us: f64, k: u32, p_exc: Option<f64>, dead_time_us: Option<f64>) -> PyResult<f64> {
    dlcz::prob_k_pairs_within(t_us, k, &source_params(p_exc, dead_time_us)).map_err(err)
}

/// Catches idlers, then releases them in `order`. One dict per pair.
#[pyfunction]
#[pyo3(signature = (order, seed, careful=true))]
fn epr_reshuffle<'py>(py: Python<'py>, order: Vec<usize>, seed: u64, careful: bool) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut rng = rng_from_seed(seed);
    let q = if careful { CalibrationQuality::Careful } else { CalibrationQuality::Fast };
    let cal = CalibrationSet::for_quality(q, &mut rng);
    let mut array = MemoryArray::new(ArrayGeometry::default(), PhysicsParams::default()).map_err(err)?;
    let records = dlcz::catch_freeze_reshuffle_release(&order, &SourceParams::default(), &mut array, &cal, &mut rng).map_err(err)?;
    records
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("pair_id", r.pair_id)?;
            d.set_item("cell", r.cell.get())?;
            d.set_item("herald_time_us", r.herald_time_us)?;
            d.set_item("trials", r.trials)?;
            d.set_item("catch_slot", r.catch_slot)?;
            d.set_item("release_slot", r.release_slot)?;
            d.set_item("storage_us", r.storage_us)?;
            d.set_item("fidelity", r.fidelity)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn pyraqm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CLOCK_US", raqm::CLOCK_US)?;
    m.add("SCENARIOS", ScenarioKind::ALL.iter().map(|k| k.name()).collect::<Vec<_>>())?;
    m.add_class::<Polarization>()?;
    m.add_class::<Memory>()?;
    m.add_function(wrap_pyfunction!(fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(prob_k_pairs_within, m)?)?;
    m.add_function(wrap_pyfunction!(epr_reshuffle, m)?)?;
    Ok(())
}
