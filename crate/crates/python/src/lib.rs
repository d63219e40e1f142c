//! Python bindings for `pulseforge`.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use pulseforge::analysis::{self, SweepResult, SynthesisReport};
use pulseforge::model::{self, LevelSystem, TargetDecomposition};
use pulseforge::numkernel::{self, StateVector};
use pulseforge::simulator;
use pulseforge::synthesis::{self, DriveBudget, LadderWeights, SynthesisOptions};

create_exception!(pulseforge_py, PulseforgeError, PyValueError);

fn err(e: pulseforge::Error) -> PyErr {
    PulseforgeError::new_err(format!("{}: {e}", e.kind()))
}

fn json_err(e: serde_json::Error) -> PyErr {
    PulseforgeError::new_err(format!("InvalidInput: {e}"))
}

fn target(amplitudes: Vec<Complex64>) -> PyResult<TargetDecomposition> {
    model::validate_target(&amplitudes).map_err(err)
}

/// Spectrum `H_0 = diag(E_1, ..., E_N)` with strictly increasing energies.
#[pyclass(name = "LevelSystem", module = "pulseforge_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyLevelSystem {
    inner: LevelSystem,
}

#[pymethods]
impl PyLevelSystem {
    #[new]
    fn new(energies: Vec<f64>) -> PyResult<Self> {
        Ok(PyLevelSystem {
            inner: LevelSystem::new(energies).map_err(err)?,
        })
    }

    #[getter]
    fn energies(&self) -> Vec<f64> {
        self.inner.energies().to_vec()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn gaps(&self) -> Vec<f64> {
        self.inner.gaps()
    }

    /// Gap class name: `SystemI`, `SystemII`, `SystemIII`, `AllDistinct` or `Other`.
    fn classify(&self) -> String {
        self.inner.classify().tag.to_string()
    }

    fn __repr__(&self) -> String {
        format!("LevelSystem({:?})", self.inner.energies())
    }
}

/// Cycle list driving a `LevelSystem` from `|initial>`.
#[pyclass(name = "Protocol", module = "pulseforge_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyProtocol {
    inner: model::Protocol,
}

#[pymethods]
impl PyProtocol {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: model::Protocol = serde_json::from_str(text).map_err(json_err)?;
        inner.validate().map_err(err)?;
        Ok(PyProtocol { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(json_err)
    }

    #[getter]
    fn system(&self) -> PyLevelSystem {
        PyLevelSystem {
            inner: self.inner.system.clone(),
        }
    }

    #[getter]
    fn num_cycles(&self) -> usize {
        self.inner.cycles.len()
    }

    #[getter]
    fn total_duration(&self) -> f64 {
        self.inner.total_duration()
    }

    /// Exact final state; starts from the protocol's initial level by default.
    #[pyo3(signature = (initial=None))]
    fn evolve(&self, initial: Option<Vec<Complex64>>) -> PyResult<Vec<Complex64>> {
        let psi = match initial {
            Some(a) => StateVector::new(a),
            None => self.inner.initial_state(),
        };
        Ok(simulator::evolve(&self.inner, &psi).map_err(err)?.amplitudes().to_vec())
    }

    /// `(times, states)` at `samples` evenly spaced times.
    #[pyo3(signature = (samples=201))]
    fn trajectory(&self, samples: usize) -> PyResult<(Vec<f64>, Vec<Vec<Complex64>>)> {
        let traj = simulator::run(&self.inner, &self.inner.initial_state(), Some(samples)).map_err(err)?;
        let states = traj.states.iter().map(|s| s.amplitudes().to_vec()).collect();
        Ok((traj.times, states))
    }

    /// Idealised strong-field final state.
    fn strongfield(&self) -> PyResult<Vec<Complex64>> {
        let out = pulseforge::propagator::strongfield_forward(&self.inner, &self.inner.initial_state())
            .map_err(err)?;
        Ok(out.amplitudes().to_vec())
    }

    fn __repr__(&self) -> String {
        format!(
            "Protocol(energies={:?}, cycles={})",
            self.inner.system.energies(),
            self.inner.cycles.len()
        )
    }
}

/// Strong-field and exact check of a protocol against a target.
#[pyclass(name = "Report", module = "pulseforge_py", frozen)]
struct PyReport {
    inner: SynthesisReport,
}

#[pymethods]
impl PyReport {
    #[getter]
    fn gap_class(&self) -> String {
        self.inner.class.to_string()
    }

    #[getter]
    fn analytic_fidelity(&self) -> f64 {
        self.inner.analytic_fidelity
    }

    #[getter]
    fn exact_fidelity(&self) -> f64 {
        self.inner.exact_fidelity
    }

    #[getter]
    fn total_duration(&self) -> f64 {
        self.inner.total_duration
    }

    #[getter]
    fn protocol(&self) -> PyProtocol {
        PyProtocol {
            inner: self.inner.protocol.clone(),
        }
    }

    #[getter]
    fn predicted(&self) -> Vec<Complex64> {
        self.inner.predicted.amplitudes().to_vec()
    }

    #[getter]
    fn exact(&self) -> Vec<Complex64> {
        self.inner.exact.amplitudes().to_vec()
    }

    /// Rotation angle `Omega l Delta` of each cycle.
    #[getter]
    fn angles(&self) -> Vec<f64> {
        self.inner.cycles.iter().map(|c| c.angle).collect()
    }

    #[getter]
    fn waits(&self) -> Vec<f64> {
        self.inner.cycles.iter().map(|c| c.wait).collect()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(json_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Report(class={}, analytic_fidelity={}, exact_fidelity={})",
            self.inner.class, self.inner.analytic_fidelity, self.inner.exact_fidelity
        )
    }
}

fn options(ratio: f64, l_max: u64, duty: f64, ladder: (f64, f64)) -> SynthesisOptions {
    SynthesisOptions {
        budget: DriveBudget { ratio, l_max, duty },
        ladder: LadderWeights {
            d1: ladder.0,
            d2: ladder.1,
        },
    }
}

/// Gap class name of the spectrum `energies`.
#[pyfunction]
fn classify(energies: Vec<f64>) -> PyResult<String> {
    Ok(PyLevelSystem::new(energies)?.classify())
}

/// Protocol steering `|1>` to `target`.
#[pyfunction]
#[pyo3(signature = (system, target, ratio=100.0, l_max=1_000_000, duty=0.9, ladder=(1.0, 1.0)))]
fn synthesize(
    system: &PyLevelSystem,
    target: Vec<Complex64>,
    ratio: f64,
    l_max: u64,
    duty: f64,
    ladder: (f64, f64),
) -> PyResult<PyProtocol> {
    let t = self::target(target)?;
    let s = synthesis::synthesize(&t, &system.inner, &options(ratio, l_max, duty, ladder)).map_err(err)?;
    Ok(PyProtocol { inner: s.protocol })
}

/// `synthesize` followed by `verify`.
#[pyfunction]
#[pyo3(signature = (system, target, ratio=100.0, l_max=1_000_000, duty=0.9, ladder=(1.0, 1.0)))]
fn synth(
    system: &PyLevelSystem,
    target: Vec<Complex64>,
    ratio: f64,
    l_max: u64,
    duty: f64,
    ladder: (f64, f64),
) -> PyResult<PyReport> {
    let t = self::target(target)?;
    let inner = synthesis::synth(&t, &system.inner, &options(ratio, l_max, duty, ladder)).map_err(err)?;
    Ok(PyReport { inner })
}

#[pyfunction]
fn verify(protocol: &PyProtocol, target: Vec<Complex64>) -> PyResult<PyReport> {
    let t = self::target(target)?;
    Ok(PyReport {
        inner: analysis::verify(&protocol.inner, &t).map_err(err)?,
    })
}

/// Exact final state of `protocol` from `initial` (default: its initial level).
#[pyfunction]
#[pyo3(signature = (protocol, initial=None))]
fn simulate(protocol: &PyProtocol, initial: Option<Vec<Complex64>>) -> PyResult<Vec<Complex64>> {
    protocol.evolve(initial)
}

/// `|<a|b>|^2` of normalized states.
#[pyfunction]
fn fidelity(a: Vec<Complex64>, b: Vec<Complex64>) -> PyResult<f64> {
    numkernel::fidelity(&StateVector::new(a), &StateVector::new(b)).map_err(err)
}

type SweepTuple = (Vec<f64>, Vec<Option<f64>>, Option<f64>);

/// Exact infidelity against `d / omega`: returns `(ratios, infidelities, slope)`,
/// with `None` for points that failed and for a missing fit.
#[pyfunction]
#[pyo3(signature = (system, target, ratios, l_max=1_000_000, duty=0.9, ladder=(1.0, 1.0)))]
fn sweep(
    system: &PyLevelSystem,
    target: Vec<Complex64>,
    ratios: Vec<f64>,
    l_max: u64,
    duty: f64,
    ladder: (f64, f64),
) -> PyResult<SweepTuple> {
    let t = self::target(target)?;
    let opts = options(ratios.first().copied().unwrap_or(1.0), l_max, duty, ladder);
    let SweepResult { points, fit } =
        analysis::sweep_ratio(&t, &system.inner, &ratios, &opts).map_err(err)?;
    Ok((
        points.iter().map(|p| p.ratio).collect(),
        points.iter().map(|p| p.infidelity).collect(),
        fit.map(|f| f.slope),
    ))
}

#[pymodule]
fn pulseforge_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PulseforgeError", m.py().get_type::<PulseforgeError>())?;
    m.add_class::<PyLevelSystem>()?;
    m.add_class::<PyProtocol>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn options_carry_budget_and_ladder() {
        let o = options(250.0, 10, 0.5, (1.0, 2.0));
        assert_eq!(o.budget, DriveBudget { ratio: 250.0, l_max: 10, duty: 0.5 });
        assert_eq!(o.ladder, LadderWeights { d1: 1.0, d2: 2.0 });
        assert!(o.budget.validate().is_ok());
    }

    #[test]
    fn targets_are_validated() {
        assert!(target(vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]).is_ok());
        assert!(model::validate_target(&[Complex64::new(2.0, 0.0)]).is_err());
    }
}
