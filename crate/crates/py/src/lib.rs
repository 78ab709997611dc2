//! Python bindings. Positions cross the boundary as `[x, y, z]` lists and
//! distributions as plain lists of floats.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use particle_integrity as core;
use particle_integrity::camera::{ExpertDistribution, MapMatchResult};
use particle_integrity::config::ScenarioConfig;
use particle_integrity::estimator::OdometrySample;
use particle_integrity::fusion::GnssDistribution;
use particle_integrity::gnss::{GnssEpoch, PseudorangeMeasurement};
use particle_integrity::Vector3;

type Xyz = [f64; 3];

fn to_py(e: core::Error) -> PyErr {
    use core::Error as E;
    match e {
        E::InvalidInput(_) | E::InvalidConfig(_) | E::LengthMismatch { .. } | E::DegenerateSet(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn v(x: Xyz) -> Vector3<f64> {
    Vector3::from(x)
}

fn xyz(x: &Vector3<f64>) -> Xyz {
    [x[0], x[1], x[2]]
}

/// Weighted particle cloud with natural-log weights.
#[pyclass(name = "ParticleSet", frozen, from_py_object)]
#[derive(Clone)]
struct PyParticleSet {
    inner: core::estimator::ParticleSet,
}

#[pymethods]
impl PyParticleSet {
    /// `log_weights` defaults to uniform.
    #[new]
    #[pyo3(signature = (positions, log_weights=None, epoch_time=0.0))]
    fn new(positions: Vec<Xyz>, log_weights: Option<Vec<f64>>, epoch_time: f64) -> PyResult<Self> {
        let pos: Vec<Vector3<f64>> = positions.into_iter().map(v).collect();
        let inner = match log_weights {
            Some(lw) => core::estimator::ParticleSet::from_parts(&pos, &lw, epoch_time),
            None => core::estimator::ParticleSet::uniform(pos, epoch_time),
        }
        .map_err(to_py)?;
        Ok(Self { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn positions(&self) -> Vec<Xyz> {
        self.inner.positions().iter().map(xyz).collect()
    }

    #[getter]
    fn log_weights(&self) -> Vec<f64> {
        self.inner.log_weights()
    }

    #[getter]
    fn epoch_time(&self) -> f64 {
        self.inner.epoch_time
    }

    fn weights(&self) -> Vec<f64> {
        self.inner.weights()
    }

    fn normalize(&self) -> PyResult<Self> {
        Ok(Self { inner: core::estimator::normalize(&self.inner).map_err(to_py)? })
    }

    fn point_estimate(&self) -> Xyz {
        xyz(&core::estimator::point_estimate(&self.inner))
    }

    /// Returns `(mean, covariance)` with the covariance as a 3x3 nested list.
    fn fit_gaussian(&self) -> PyResult<(Xyz, [Xyz; 3])> {
        let g = core::estimator::fit_gaussian(&self.inner).map_err(to_py)?;
        let c = g.covariance;
        Ok((xyz(&g.mean), [0, 1, 2].map(|i| [c[(i, 0)], c[(i, 1)], c[(i, 2)]])))
    }

    #[pyo3(signature = (velocity, acceleration, dt, prop_var, seed))]
    fn propagate(&self, velocity: Xyz, acceleration: Xyz, dt: f64, prop_var: f64, seed: u64) -> PyResult<Self> {
        let odo = OdometrySample::new(v(velocity), v(acceleration), dt);
        Ok(Self { inner: core::estimator::propagate(&self.inner, &odo, prop_var, seed).map_err(to_py)? })
    }

    fn resample(&self, seed: u64) -> PyResult<Self> {
        Ok(Self { inner: core::estimator::resample_sir(&self.inner, seed).map_err(to_py)? })
    }

    fn __repr__(&self) -> String {
        format!("ParticleSet(len={}, epoch_time={})", self.inner.len(), self.inner.epoch_time)
    }
}

/// Reweights the cloud by the fault-tolerant GNSS mixture likelihood.
/// Returns `(posterior, gamma)`.
#[pyfunction]
fn gnss_update(
    particles: &PyParticleSet,
    sat_positions: Vec<Xyz>,
    pseudoranges: Vec<f64>,
    sigmas: Vec<f64>,
) -> PyResult<(PyParticleSet, Vec<f64>)> {
    if sat_positions.len() != pseudoranges.len() || sigmas.len() != pseudoranges.len() {
        return Err(PyValueError::new_err("satellite, range and sigma lists must have equal length"));
    }
    let measurements = sat_positions
        .into_iter()
        .zip(pseudoranges)
        .zip(sigmas)
        .map(|((s, pseudorange), sigma)| PseudorangeMeasurement { sat_position: v(s), pseudorange, sigma })
        .collect();
    let epoch = GnssEpoch { time: particles.inner.epoch_time, measurements };
    let (post, gamma) = core::gnss::update_weights_gnss(&particles.inner, &epoch).map_err(to_py)?;
    Ok((PyParticleSet { inner: post }, gamma.gamma))
}

/// Camera expert distribution over the particles for one map match carried
/// forward by `(velocity, acceleration, dt)`.
#[pyfunction]
#[pyo3(signature = (extracted_state, particles, velocity=[0.0; 3], acceleration=[0.0; 3], dt=0.0, tau=core::camera::DEFAULT_TAU))]
fn camera_expert(
    extracted_state: Xyz,
    particles: &PyParticleSet,
    velocity: Xyz,
    acceleration: Xyz,
    dt: f64,
    tau: f64,
) -> PyResult<Vec<f64>> {
    let mm = MapMatchResult { extracted_state: v(extracted_state), match_time: particles.inner.epoch_time - dt, quality: 1.0 };
    let odo = OdometrySample::new(v(velocity), v(acceleration), dt);
    Ok(core::camera::camera_expert(&mm, &odo, &particles.inner, tau).map_err(to_py)?.probs)
}

#[pyfunction]
fn softmax(scores: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(core::camera::softmax_distribution(&scores).map_err(to_py)?.probs)
}

#[pyfunction]
fn kl_divergence(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    core::fusion::kl_divergence(&p, &q).map_err(to_py)
}

#[pyfunction]
fn optimal_alpha(q: Vec<f64>, p: Vec<f64>) -> PyResult<f64> {
    let q = ExpertDistribution::new(q).map_err(to_py)?;
    let p = GnssDistribution::new(p).map_err(to_py)?;
    core::fusion::optimal_alpha(&q, &p).map_err(to_py)
}

/// Weights the experts against `p` and mixes them. Returns
/// `(normalized_alphas, mixture)`.
#[pyfunction]
fn fuse_experts(experts: Vec<Vec<f64>>, p: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let experts = experts.into_iter().map(ExpertDistribution::new).collect::<core::Result<Vec<_>>>().map_err(to_py)?;
    let p = GnssDistribution::new(p).map_err(to_py)?;
    let moe = core::fusion::fuse_experts(&experts, &p).map_err(to_py)?;
    Ok((moe.alphas, moe.mixture.probs))
}

#[pyfunction]
fn inverse_bernoulli(q: f64, eps: f64) -> f64 {
    core::integrity::inverse_bernoulli(q, eps)
}

#[pyfunction]
#[pyo3(signature = (kl, m, delta=core::integrity::DEFAULT_DELTA))]
fn epsilon_from_kl(kl: f64, m: usize, delta: f64) -> f64 {
    core::integrity::epsilon_from_kl(kl, m, delta)
}

/// Integrity report for one alert limit from an ensemble of perturbed
/// posteriors. Returns a dict with the risk terms.
#[pyfunction]
#[pyo3(signature = (posteriors, previous_mean, alert_limit, delta=core::integrity::DEFAULT_DELTA, truth=None))]
fn risk_bound<'py>(
    py: Python<'py>,
    posteriors: Vec<PyParticleSet>,
    previous_mean: &PyParticleSet,
    alert_limit: f64,
    delta: f64,
    truth: Option<Xyz>,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let ens = core::integrity::PerturbationEnsemble::new(posteriors.into_iter().map(|p| p.inner).collect())
        .map_err(to_py)?;
    let truth = truth.map(v);
    let cur = ens.mean_posterior.clone();
    let rep = core::integrity::risk_bound(&ens, &cur, &previous_mean.inner, alert_limit, delta, truth.as_ref())
        .map_err(to_py)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("empirical_risk", rep.empirical_risk)?;
    d.set_item("epsilon", rep.epsilon)?;
    d.set_item("divergence_term", rep.divergence_term)?;
    d.set_item("bound", rep.bound)?;
    d.set_item("reference_risk", rep.reference_risk)?;
    d.set_item("alert_limit", rep.alert_limit)?;
    Ok(d)
}

/// Per-epoch output of a scenario run.
#[pyclass(name = "EpochRecord", frozen, get_all)]
struct PyEpochRecord {
    time: f64,
    truth: Xyz,
    estimate: Xyz,
    error: f64,
    alert_limits: Vec<f64>,
    bounds: Vec<f64>,
    reference_risks: Vec<f64>,
    gamma: Vec<f64>,
    alphas: Vec<f64>,
}

/// Validates a TOML scenario config and returns it with every default filled in.
#[pyfunction]
fn load_config(toml: &str) -> PyResult<String> {
    Ok(ScenarioConfig::from_toml_str(toml).map_err(to_py)?.to_toml_string())
}

/// Runs an emulated scenario described by a TOML config string.
#[pyfunction]
#[pyo3(signature = (toml="", seed=None))]
fn run_scenario(py: Python<'_>, toml: &str, seed: Option<u64>) -> PyResult<Vec<PyEpochRecord>> {
    let mut cfg = ScenarioConfig::from_toml_str(toml).map_err(to_py)?;
    if let Some(s) = seed {
        cfg.scenario.seed = s;
    }
    let records = py.detach(|| core::sim::run_scenario(&cfg)).map_err(to_py)?;
    Ok(records
        .into_iter()
        .map(|r| PyEpochRecord {
            time: r.time,
            truth: xyz(&r.truth),
            estimate: xyz(&r.estimate),
            error: r.error(),
            alert_limits: r.risks.iter().map(|a| a.alert_limit).collect(),
            bounds: r.risks.iter().map(|a| a.bound).collect(),
            reference_risks: r.risks.iter().map(|a| a.reference_risk).collect(),
            gamma: r.gamma,
            alphas: r.alphas,
        })
        .collect())
}

#[pymodule]
#[pyo3(name = "particle_integrity")]
fn particle_integrity_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParticleSet>()?;
    m.add_class::<PyEpochRecord>()?;
    m.add_function(wrap_pyfunction!(gnss_update, m)?)?;
    m.add_function(wrap_pyfunction!(camera_expert, m)?)?;
    m.add_function(wrap_pyfunction!(softmax, m)?)?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(fuse_experts, m)?)?;
    m.add_function(wrap_pyfunction!(inverse_bernoulli, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon_from_kl, m)?)?;
    m.add_function(wrap_pyfunction!(risk_bound, m)?)?;
    m.add_function(wrap_pyfunction!(load_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
