//! Python bindings: instances, the statistics helpers, the sign test,
//! best-arm identification and the seeded trial runner.

use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use pure_explore::best_arm::{self, BestArmConfig, BestArmResult};
use pure_explore::harness::{self, Algorithm, InstanceSource, SeqSpec, TrialConfig};
use pure_explore::instances::{self, LowerBoundFamilySpec};
use pure_explore::meta::{sim_parallel, ReplayRun, SimConfig};
use pure_explore::model::{derive_seed, BanditEnv, Family};
use pure_explore::sign::{self, TestSignMachine};
use pure_explore::{stats, Error};

fn to_py(e: Error) -> PyErr {
    match e.exit_code() {
        3 => PyIOError::new_err(e.to_string()),
        2 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn family(name: &str) -> PyResult<Family> {
    name.parse().map_err(to_py)
}

fn seq(name: &str) -> PyResult<SeqSpec> {
    name.parse().map_err(to_py)
}

#[pyclass(name = "Instance", module = "pure_explore_py", frozen, skip_from_py_object)]
struct PyInstance {
    inner: pure_explore::Instance,
}

#[pymethods]
impl PyInstance {
    #[new]
    #[pyo3(signature = (means, family="gaussian", sigma=1.0, xi=None))]
    fn new(means: Vec<f64>, family: &str, sigma: f64, xi: Option<f64>) -> PyResult<Self> {
        let inner = pure_explore::make_instance(&means, self::family(family)?, sigma, xi).map_err(to_py)?;
        Ok(PyInstance { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let inner = pure_explore::Instance::load(path.as_ref()).map_err(to_py)?;
        Ok(PyInstance { inner })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path.as_ref()).map_err(to_py)
    }

    #[getter]
    fn means(&self) -> Vec<f64> {
        self.inner.means()
    }

    #[getter]
    fn xi(&self) -> Option<f64> {
        self.inner.xi()
    }

    #[getter]
    fn family(&self) -> String {
        match self.inner.family() {
            Family::Gaussian => "gaussian".into(),
            Family::Bernoulli => "bernoulli".into(),
        }
    }

    #[getter]
    fn best_arm(&self) -> Option<usize> {
        self.inner.best_arm()
    }

    fn gap_profile<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let p = stats::gap_profile(&self.inner).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("best", p.best)?;
        d.set_item("entropy", p.entropy)?;
        d.set_item("hardness", p.hardness)?;
        d.set_item("groups", p.groups.clone())?;
        d.set_item("weights", p.weights.clone())?;
        d.set_item("gaps", p.gaps.clone())?;
        Ok(d)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Instance(n={}, family={}, best={:?})", self.inner.len(), self.family(), self.inner.best_arm())
    }
}

#[pyfunction]
fn hoeffding_pulls(epsilon: f64, delta: f64) -> PyResult<u64> {
    stats::hoeffding_pulls(epsilon, delta).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (mu1, mu2, sigma=1.0))]
fn kl_gaussian(mu1: f64, mu2: f64, sigma: f64) -> PyResult<f64> {
    stats::kl_gaussian(mu1, mu2, sigma).map_err(to_py)
}

#[pyfunction]
fn kl_bernoulli(p: f64, q: f64) -> PyResult<f64> {
    stats::kl_bernoulli(p, q).map_err(to_py)
}

#[pyfunction]
fn benchmark_f(gap: f64) -> PyResult<f64> {
    stats::benchmark_f(gap).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (n, gap, best_mean=0.7, family="gaussian"))]
fn clustered_instance(n: usize, gap: f64, best_mean: f64, family: &str) -> PyResult<PyInstance> {
    let inner = instances::clustered_instance(n, gap, best_mean, self::family(family)?).map_err(to_py)?;
    Ok(PyInstance { inner })
}

#[pyfunction]
#[pyo3(signature = (m, n, xi=0.0, levels=Vec::new()))]
fn lower_bound_instance(m: u32, n: usize, xi: f64, levels: Vec<u32>) -> PyResult<PyInstance> {
    let inner = LowerBoundFamilySpec::new(m, n, xi).with_levels(levels).build().map_err(to_py)?;
    Ok(PyInstance { inner })
}

#[pyfunction]
#[pyo3(signature = (seq, gap))]
fn kappa(seq: &str, gap: f64) -> PyResult<usize> {
    let s = self::seq(seq)?.build().map_err(to_py)?;
    sign::kappa(&s, gap).map_err(to_py)
}

/// Runs the sign test once on an arm with the given mean.
#[pyfunction]
#[pyo3(signature = (mean, xi=0.0, delta=0.05, seq="geom:e", seed=0, family="gaussian", sim_wrap=false, max_rounds=60))]
#[allow(clippy::too_many_arguments)]
fn test_sign<'py>(
    py: Python<'py>,
    mean: f64,
    xi: f64,
    delta: f64,
    seq: &str,
    seed: u64,
    family: &str,
    sim_wrap: bool,
    max_rounds: u32,
) -> PyResult<Bound<'py, PyDict>> {
    let s = self::seq(seq)?.build().map_err(to_py)?;
    let inst = pure_explore::make_instance(&[mean], self::family(family)?, 1.0, Some(xi)).map_err(to_py)?;
    let (verdict, rounds, total) = if sim_wrap {
        let factory = |i: u32, d: f64| {
            TestSignMachine::new(BanditEnv::new(&inst, derive_seed(seed, i as u64)), 0, xi, d, s.clone(), max_rounds)
        };
        let out = sim_parallel(factory, SimConfig::new(delta)).map_err(to_py)?;
        (out.answer.verdict, out.answer.rounds_used, out.ledger.total())
    } else {
        let mut env = BanditEnv::new(&inst, seed);
        let r = sign::test_sign(&mut env, 0, xi, delta, &s, max_rounds).map_err(to_py)?;
        (r.verdict, r.rounds_used, r.ledger.total())
    };
    let d = PyDict::new(py);
    d.set_item("verdict", verdict.to_string())?;
    d.set_item("rounds_used", rounds)?;
    d.set_item("total_pulls", total)?;
    Ok(d)
}

fn best_arm_dict<'py>(py: Python<'py>, r: &BestArmResult, total: u64, per_arm: Vec<u64>) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("chosen", r.chosen)?;
    d.set_item("rounds_used", r.rounds_used)?;
    d.set_item("eliminations", r.eliminations_performed)?;
    d.set_item("total_pulls", total)?;
    d.set_item("per_arm_pulls", per_arm)?;
    Ok(d)
}

/// Identifies the best arm once; with `epsilon` set, returns an
/// epsilon-optimal arm instead.
#[pyfunction]
#[pyo3(name = "best_arm", signature = (instance, delta=0.1, seed=0, epsilon=None, sim_wrap=false))]
fn identify_best<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    delta: f64,
    seed: u64,
    epsilon: Option<f64>,
    sim_wrap: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let run = move |env: &mut BanditEnv, d: f64| match epsilon {
        Some(e) => best_arm::pac_best_arm(env, e, &BestArmConfig::new(d)),
        None => best_arm::distr_based_elim(env, &BestArmConfig::new(d)),
    };
    if sim_wrap {
        let shared = Arc::new(instance.inner.clone());
        let factory = |i: u32, d: f64| Ok(ReplayRun::new(shared.clone(), derive_seed(seed, i as u64), move |env| run(env, d)));
        let out = sim_parallel(factory, SimConfig::new(delta)).map_err(to_py)?;
        best_arm_dict(py, &out.answer, out.ledger.total(), out.ledger.per_arm().to_vec())
    } else {
        let mut env = BanditEnv::new(&instance.inner, seed);
        let r = run(&mut env, delta).map_err(to_py)?;
        best_arm_dict(py, &r, r.ledger.total(), r.ledger.per_arm().to_vec())
    }
}

/// Seeded sign-test trials; returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (gap, delta=0.05, trials=100, seed=0, xi=0.0, seq="geom:e", sim_wrap=false))]
fn sign_trials(gap: f64, delta: f64, trials: u32, seed: u64, xi: f64, seq: &str, sim_wrap: bool) -> PyResult<String> {
    let cfg = TrialConfig::sign(xi, gap, delta, self::seq(seq)?, trials, seed).with_sim(sim_wrap);
    harness::run_trials(&cfg).and_then(|r| r.to_json()).map_err(to_py)
}

/// Seeded best-arm trials on `instance`; returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (instance, delta=0.1, trials=100, seed=0, epsilon=None, sim_wrap=false))]
fn best_arm_trials(
    instance: &PyInstance,
    delta: f64,
    trials: u32,
    seed: u64,
    epsilon: Option<f64>,
    sim_wrap: bool,
) -> PyResult<String> {
    let algorithm = match epsilon {
        Some(epsilon) => Algorithm::Pac { epsilon },
        None => Algorithm::DistrBasedElim,
    };
    let cfg = TrialConfig::new(algorithm, InstanceSource::Given(instance.inner.clone()), delta, trials, seed).with_sim(sim_wrap);
    harness::run_trials(&cfg).and_then(|r| r.to_json()).map_err(to_py)
}

#[pymodule]
fn pure_explore_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_function(wrap_pyfunction!(hoeffding_pulls, m)?)?;
    m.add_function(wrap_pyfunction!(kl_gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(kl_bernoulli, m)?)?;
    m.add_function(wrap_pyfunction!(benchmark_f, m)?)?;
    m.add_function(wrap_pyfunction!(clustered_instance, m)?)?;
    m.add_function(wrap_pyfunction!(lower_bound_instance, m)?)?;
    m.add_function(wrap_pyfunction!(kappa, m)?)?;
    m.add_function(wrap_pyfunction!(test_sign, m)?)?;
    m.add_function(wrap_pyfunction!(identify_best, m)?)?;
    m.add_function(wrap_pyfunction!(sign_trials, m)?)?;
    m.add_function(wrap_pyfunction!(best_arm_trials, m)?)?;
    Ok(())
}
