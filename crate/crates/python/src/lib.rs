//! Python bindings: codec, squashing, running statistics, environments,
//! the tabular equivalence check, and deep-agent training runs.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use spectral_rl::agents::AgentKind;
use spectral_rl::codec::{self, CodecConfig, SpectralVector};
use spectral_rl::config::ExperimentConfig;
use spectral_rl::env::{generate_tabular_mdp, EnvConfig, EnvKind, Environment, StepResult};
use spectral_rl::experiment::run_seed;
use spectral_rl::tabular_rl::{self, LearnerParams};
use spectral_rl::transforms::{self, SquashConfig};
use spectral_rl::verify::{self, Suite};

fn py_err(e: spectral_rl::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn codec_config(base: f64, max_frequency: usize) -> PyResult<CodecConfig> {
    CodecConfig::new(base, max_frequency).map_err(py_err)
}

/// Spectral components of `r`; raises ValueError when `|r|` is too large.
#[pyfunction]
#[pyo3(signature = (r, base = 2.0, max_frequency = 20))]
fn decompose(r: f64, base: f64, max_frequency: usize) -> PyResult<Vec<f64>> {
    let cfg = codec_config(base, max_frequency)?;
    codec::decompose(r, &cfg).map(SpectralVector::into_inner).map_err(py_err)
}

/// `sum_i base^i * components[i]`.
#[pyfunction]
#[pyo3(signature = (components, base = 2.0))]
fn reconstruct(components: Vec<f64>, base: f64) -> PyResult<f64> {
    let n = components.len().saturating_sub(1);
    let cfg = codec_config(base, n)?;
    Ok(codec::reconstruct_slice(&components, &cfg))
}

#[pyfunction]
#[pyo3(signature = (base = 2.0, max_frequency = 20))]
fn max_representable(base: f64, max_frequency: usize) -> PyResult<f64> {
    Ok(codec_config(base, max_frequency)?.max_representable())
}

#[pyfunction]
#[pyo3(signature = (x, epsilon = 0.01))]
fn squash(x: f64, epsilon: f64) -> PyResult<f64> {
    Ok(transforms::squash(x, &SquashConfig::new(epsilon).map_err(py_err)?))
}

#[pyfunction]
#[pyo3(signature = (y, epsilon = 0.01))]
fn unsquash(y: f64, epsilon: f64) -> PyResult<f64> {
    Ok(transforms::unsquash(y, &SquashConfig::new(epsilon).map_err(py_err)?))
}

/// Exponentially weighted mean / standard deviation tracker.
#[pyclass]
struct RunningStats {
    inner: transforms::RunningStats,
}

#[pymethods]
impl RunningStats {
    #[new]
    #[pyo3(signature = (beta = 1e-3, sigma_min = 1e-4))]
    fn new(beta: f64, sigma_min: f64) -> PyResult<Self> {
        Ok(Self {
            inner: transforms::RunningStats::new(beta, sigma_min).map_err(py_err)?,
        })
    }

    fn update(&mut self, observations: Vec<f64>) {
        self.inner.update(&observations);
    }

    #[getter]
    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma()
    }

    fn normalize(&self, x: f64) -> f64 {
        self.inner.normalize(x)
    }

    fn denormalize(&self, z: f64) -> f64 {
        self.inner.denormalize(z)
    }
}

/// One of the named environments (`exp_catch`, `two_phase`, ...).
#[pyclass(unsendable)]
struct Env {
    inner: Box<dyn Environment>,
}

fn step_tuple<'py>(py: Python<'py>, s: StepResult) -> PyResult<(Vec<f64>, f64, bool, Bound<'py, PyDict>)> {
    let info = PyDict::new(py);
    info.set_item("player_score", s.info.player_score)?;
    info.set_item("opponent_score", s.info.opponent_score)?;
    info.set_item("phase", s.info.phase.index())?;
    info.set_item("unexponentiated_delta", s.info.unexponentiated_delta)?;
    info.set_item("phase_b_catches", s.info.phase_b_catches)?;
    Ok((s.observation.0, s.reward, s.terminal, info))
}

#[pymethods]
impl Env {
    #[new]
    #[pyo3(signature = (name, score_cap = None))]
    fn new(name: &str, score_cap: Option<u32>) -> PyResult<Self> {
        let kind: EnvKind = name.parse().map_err(py_err)?;
        let mut cfg = EnvConfig::new(kind);
        if let Some(cap) = score_cap {
            cfg.score_cap = cap;
        }
        Ok(Self {
            inner: cfg.build().map_err(py_err)?,
        })
    }

    #[getter]
    fn num_actions(&self) -> usize {
        self.inner.num_actions()
    }

    #[getter]
    fn observation_dim(&self) -> usize {
        self.inner.observation_dim()
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.inner.reset(seed).0
    }

    /// Returns `(observation, reward, terminal, info)`.
    fn step<'py>(&mut self, py: Python<'py>, action: usize) -> PyResult<(Vec<f64>, f64, bool, Bound<'py, PyDict>)> {
        let s = self.inner.step(action).map_err(py_err)?;
        step_tuple(py, s)
    }
}

/// Runs standard and spectral Q-learning side by side on a random MDP.
#[pyfunction]
#[pyo3(signature = (num_states, num_actions, reward_bound, seed, steps = 10_000, max_frequency = 3))]
fn check_equivalence<'py>(
    py: Python<'py>,
    num_states: usize,
    num_actions: usize,
    reward_bound: f64,
    seed: u64,
    steps: usize,
    max_frequency: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let mdp = generate_tabular_mdp(num_states, num_actions, reward_bound, seed).map_err(py_err)?;
    let cfg = codec_config(2.0, max_frequency)?;
    let report = tabular_rl::check_equivalence(&mdp, steps, seed, &cfg, LearnerParams::default());
    let out = PyDict::new(py);
    out.set_item("holds", report.holds(1e-8))?;
    out.set_item("steps", report.steps)?;
    out.set_item("max_deviation", report.max_deviation)?;
    out.set_item("actions_identical", report.actions_identical)?;
    Ok(out)
}

/// Trains one agent for one seed; `overrides` is a JSON object of config fields.
#[pyfunction]
#[pyo3(signature = (env, agent, frames, seed = 0, preset = "desk", overrides = None))]
fn run_training<'py>(
    py: Python<'py>,
    env: &str,
    agent: &str,
    frames: u64,
    seed: u64,
    preset: &str,
    overrides: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let kind: AgentKind = agent.parse().map_err(py_err)?;
    let env_kind: EnvKind = env.parse().map_err(py_err)?;
    let mut cfg = ExperimentConfig::preset(preset, kind, env_kind).map_err(py_err)?;
    if let Some(text) = overrides {
        let patch: serde_json::Value =
            serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        cfg = cfg.overlay(&patch).map_err(py_err)?;
    }
    cfg.frames = frames;
    let (record, _) = py.detach(|| run_seed(&cfg, seed)).map_err(py_err)?;
    let out = PyDict::new(py);
    let returns: Vec<f64> = record.episodes.iter().map(|e| e.raw_return).collect();
    let unexp: Vec<f64> = record.episodes.iter().map(|e| e.unexponentiated_return).collect();
    let ends: Vec<u64> = record.episodes.iter().map(|e| e.frame).collect();
    out.set_item("episode_frames", ends)?;
    out.set_item("returns", returns)?;
    out.set_item("unexponentiated_returns", unexp)?;
    let td: Vec<(u64, u32, f64)> = record.td_errors.iter().map(|t| (t.frame, t.bucket, t.value)).collect();
    out.set_item("td_errors", td)?;
    Ok(out)
}

/// Runs a named oracle suite; returns `(name, passed, detail)` tuples.
#[pyfunction]
fn run_verify(suite: &str) -> PyResult<Vec<(String, bool, String)>> {
    let suite = match suite {
        "codec" => Suite::Codec,
        "prop1" => Suite::Prop1,
        "gradients" => Suite::Gradients,
        "popart" => Suite::Popart,
        "squash" => Suite::Squash,
        "all" => Suite::All,
        other => return Err(PyValueError::new_err(format!("unknown suite `{other}`"))),
    };
    Ok(verify::run_suite(suite)
        .into_iter()
        .map(|c| (format!("{}/{}", c.suite, c.name), c.passed, c.detail))
        .collect())
}

#[pymodule]
fn spectral_rl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(max_representable, m)?)?;
    m.add_function(wrap_pyfunction!(squash, m)?)?;
    m.add_function(wrap_pyfunction!(unsquash, m)?)?;
    m.add_function(wrap_pyfunction!(check_equivalence, m)?)?;
    m.add_function(wrap_pyfunction!(run_training, m)?)?;
    m.add_function(wrap_pyfunction!(run_verify, m)?)?;
    m.add_class::<RunningStats>()?;
    m.add_class::<Env>()?;
    Ok(())
}
