//! Python bindings for the marlx core.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use marlx::envs::{self, Environment};
use marlx::harness::{self, ExperimentConfig};
use marlx::intrinsic;
use marlx::learner;
use marlx::numkit::{self, Activation, Matrix};

fn to_py(e: marlx::Error) -> PyErr {
    match e {
        marlx::Error::Shape { .. }
        | marlx::Error::Domain(_)
        | marlx::Error::Config(_)
        | marlx::Error::Alignment(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    Matrix::from_rows(&rows).map_err(to_py)
}

fn nested(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

#[pyclass(module = "marlx_py")]
struct SeededRng {
    inner: numkit::SeededRng,
}

#[pymethods]
impl SeededRng {
    #[new]
    fn new(seed: u64) -> Self {
        Self {
            inner: numkit::SeededRng::new(seed),
        }
    }

    fn split(&self, name: &str) -> Self {
        Self {
            inner: self.inner.split(name),
        }
    }

    fn uniform(&mut self) -> f64 {
        self.inner.uniform()
    }

    fn below(&mut self, n: usize) -> PyResult<usize> {
        if n == 0 {
            return Err(PyValueError::new_err("n must be positive"));
        }
        Ok(self.inner.below(n))
    }
}

#[pyclass(module = "marlx_py")]
struct Mlp {
    inner: numkit::Mlp,
}

#[pymethods]
impl Mlp {
    #[new]
    fn new(sizes: Vec<usize>, seed: u64) -> PyResult<Self> {
        let mut rng = numkit::SeededRng::new(seed);
        let inner = numkit::Mlp::new(&sizes, Activation::Relu, Activation::Identity, &mut rng).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn sizes(&self) -> Vec<usize> {
        self.inner.sizes().to_vec()
    }

    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    fn forward(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.predict(&x).map_err(to_py)
    }

    /// Gradients of `grad_output · f(x)`: (per-layer weight grads, per-layer bias grads, input grad).
    fn backward(&self, x: Vec<f64>, grad_output: Vec<f64>) -> PyResult<(Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>, Vec<f64>)> {
        let (_, cache) = self.inner.forward(&x).map_err(to_py)?;
        let (g, dx) = self.inner.backward(&cache, &grad_output).map_err(to_py)?;
        Ok((g.weights.iter().map(nested).collect(), g.biases.clone(), dx))
    }

    fn copy_from(&mut self, other: &Mlp) -> PyResult<()> {
        numkit::copy_params(&other.inner, &mut self.inner).map_err(to_py)
    }
}

#[pyfunction]
fn sherman_morrison_update(c_inv: Vec<Vec<f64>>, v: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    let m = numkit::sherman_morrison_update(&matrix(c_inv)?, &v).map_err(to_py)?;
    Ok(nested(&m))
}

fn step_dict<'py>(py: Python<'py>, s: &envs::DecPomdpStep) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("joint_observation", s.joint_observation.clone())?;
    d.set_item("global_state", s.global_state.clone())?;
    d.set_item("reward", s.reward)?;
    d.set_item("done", s.done)?;
    d.set_item("terminated", s.terminated)?;
    d.set_item("step_index", s.step_index)?;
    Ok(d)
}

/// Any of the three environments, built from its id.
#[pyclass(module = "marlx_py", unsendable)]
struct Env {
    inner: Box<dyn Environment>,
    rng: numkit::SeededRng,
}

#[pymethods]
impl Env {
    /// `env_id` is `rel_overgen`, `box_push` or `placement`; extra settings use the
    /// config-file keys without the `env.` prefix, e.g. `size="20"`.
    #[new]
    #[pyo3(signature = (env_id, seed=0, **settings))]
    fn new(env_id: &str, seed: u64, settings: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut text = format!("env.id = {env_id}\n");
        if let Some(s) = settings {
            for (k, v) in s.iter() {
                text.push_str(&format!("env.{} = {}\n", k.str()?, v.str()?));
            }
        }
        let cfg = ExperimentConfig::from_text(&text).map_err(to_py)?;
        Ok(Self {
            inner: cfg.env.build().map_err(to_py)?,
            rng: numkit::SeededRng::new(seed).split("env"),
        })
    }

    #[getter]
    fn n_agents(&self) -> usize {
        self.inner.n_agents()
    }

    #[getter]
    fn n_actions(&self) -> usize {
        self.inner.n_actions()
    }

    #[getter]
    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }

    #[getter]
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }

    fn reset<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = self.inner.reset(&mut self.rng);
        step_dict(py, &s)
    }

    fn step<'py>(&mut self, py: Python<'py>, joint_action: Vec<usize>) -> PyResult<Bound<'py, PyDict>> {
        let s = self.inner.step(&joint_action).map_err(to_py)?;
        step_dict(py, &s)
    }

    fn raw_state(&self) -> Vec<f64> {
        self.inner.raw_state()
    }
}

#[pyfunction]
#[pyo3(signature = (positions, size, delta, r_plus=12.0, r_minus=0.0))]
fn rel_overgen_reward(positions: Vec<usize>, size: usize, delta: f64, r_plus: f64, r_minus: f64) -> PyResult<f64> {
    let mut cfg = envs::RelOvergenConfig::new(positions.len(), size, delta);
    cfg.r_plus = r_plus;
    cfg.r_minus = r_minus;
    envs::rel_overgen_reward(&positions, &cfg).map_err(to_py)
}

#[pyclass(module = "marlx_py")]
struct EllipseState {
    inner: intrinsic::EllipseState,
}

#[pymethods]
impl EllipseState {
    #[new]
    #[pyo3(signature = (dim, lam=0.1))]
    fn new(dim: usize, lam: f64) -> PyResult<Self> {
        Ok(Self {
            inner: intrinsic::EllipseState::new(dim, lam).map_err(to_py)?,
        })
    }

    fn bonus(&self, embedding: Vec<f64>) -> PyResult<f64> {
        self.inner.bonus(&embedding).map_err(to_py)
    }

    fn eec(&self, embedding: Vec<f64>) -> PyResult<f64> {
        self.inner.eec(&embedding).map_err(to_py)
    }

    fn update(&mut self, embedding: Vec<f64>) -> PyResult<()> {
        self.inner.update(&embedding).map_err(to_py)
    }

    fn reset(&mut self) {
        self.inner.reset()
    }

    fn c_inv(&self) -> Vec<Vec<f64>> {
        nested(self.inner.c_inv())
    }
}

#[pyclass(module = "marlx_py")]
struct RndModule {
    inner: intrinsic::RndModule,
}

#[pymethods]
impl RndModule {
    #[new]
    #[pyo3(signature = (input_dim, hidden_dim=128, encoding_dim=64, lr=1e-4, seed=0))]
    fn new(input_dim: usize, hidden_dim: usize, encoding_dim: usize, lr: f64, seed: u64) -> PyResult<Self> {
        let mut rng = numkit::SeededRng::new(seed);
        Ok(Self {
            inner: intrinsic::RndModule::new(input_dim, hidden_dim, encoding_dim, lr, &mut rng).map_err(to_py)?,
        })
    }

    fn novelty(&self, obs: Vec<f64>) -> PyResult<f64> {
        self.inner.novelty(&obs).map_err(to_py)
    }

    fn train(&mut self, batch: Vec<Vec<f64>>) -> PyResult<f64> {
        self.inner.train(&matrix(batch)?).map_err(to_py)
    }

    fn llec(&self, obs: Vec<f64>, next_obs: Vec<f64>, alpha: f64) -> PyResult<f64> {
        intrinsic::llec(&self.inner, &obs, &next_obs, alpha).map_err(to_py)
    }
}

#[pyfunction]
fn llec_from_novelty(rnd_cur: f64, rnd_next: f64, alpha: f64) -> f64 {
    intrinsic::llec_from_novelty(rnd_cur, rnd_next, alpha)
}

#[pyfunction]
fn eec_from_bonus(b: f64) -> f64 {
    intrinsic::eec_from_bonus(b)
}

#[pyfunction]
fn jim_product(llec: f64, eec: f64) -> f64 {
    intrinsic::jim_product(llec, eec)
}

#[pyfunction]
fn lim_combine(per_agent: Vec<f64>) -> f64 {
    intrinsic::lim_combine(&per_agent)
}

#[pyfunction]
fn combine_reward(r_ext: f64, r_int: f64, beta: f64) -> f64 {
    intrinsic::combine_reward(r_ext, r_int, beta)
}

#[pyclass(module = "marlx_py")]
struct MixerNet {
    inner: learner::MixerNet,
}

#[pymethods]
impl MixerNet {
    #[new]
    #[pyo3(signature = (n_agents, state_dim, embed_dim=32, hypernet_hidden=64, seed=0, unit_weights=false))]
    fn new(
        n_agents: usize,
        state_dim: usize,
        embed_dim: usize,
        hypernet_hidden: usize,
        seed: u64,
        unit_weights: bool,
    ) -> PyResult<Self> {
        let mut rng = numkit::SeededRng::new(seed);
        let mut inner =
            learner::MixerNet::new(n_agents, state_dim, embed_dim, hypernet_hidden, &mut rng).map_err(to_py)?;
        if unit_weights {
            inner = inner.with_unit_weights();
        }
        Ok(Self { inner })
    }

    fn mix(&self, q: Vec<f64>, state: Vec<f64>) -> PyResult<f64> {
        self.inner.mix(&q, &state).map_err(to_py)
    }
}

#[pyclass(module = "marlx_py")]
struct ReplayBuffer {
    inner: learner::ReplayBuffer,
    rng: numkit::SeededRng,
}

#[pymethods]
impl ReplayBuffer {
    /// Priority bookkeeping only: every stored item is a one-step placeholder episode.
    #[new]
    #[pyo3(signature = (capacity, alpha=0.6, beta=0.4, seed=0))]
    fn new(capacity: usize, alpha: f64, beta: f64, seed: u64) -> PyResult<Self> {
        let cfg = learner::ReplayConfig {
            capacity,
            alpha,
            beta_start: beta,
            ..learner::ReplayConfig::default()
        };
        Ok(Self {
            inner: learner::ReplayBuffer::new(cfg).map_err(to_py)?,
            rng: numkit::SeededRng::new(seed).split("replay"),
        })
    }

    fn add(&mut self, priority: f64) -> PyResult<usize> {
        let mut e = learner::Episode::new(1, 1, 1);
        e.push_observation(&[vec![0.0]], &[0.0]).map_err(to_py)?;
        e.push_transition(&[0], 0.0, false).map_err(to_py)?;
        e.push_observation(&[vec![0.0]], &[0.0]).map_err(to_py)?;
        let slot = self.inner.add(e).map_err(to_py)?;
        self.inner.update_priorities(&[slot], &[priority]).map_err(to_py)?;
        Ok(slot)
    }

    fn probability(&self, slot: usize) -> PyResult<f64> {
        if slot >= self.inner.len() {
            return Err(PyValueError::new_err(format!("slot {slot} is empty")));
        }
        Ok(self.inner.probability(slot))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// `(slots, importance weights)`.
    fn sample(&mut self, batch_size: usize) -> PyResult<(Vec<usize>, Vec<f64>)> {
        let b = self.inner.sample(batch_size, &mut self.rng).map_err(to_py)?;
        Ok((b.indices, b.weights))
    }
}

/// Trains one seed from config text, writing under `out_dir/<name>/seed_<seed>`
/// when given. Returns the eval records as dicts.
#[pyfunction]
#[pyo3(signature = (config_text, seed, out_dir=None))]
fn run_training<'py>(
    py: Python<'py>,
    config_text: &str,
    seed: u64,
    out_dir: Option<PathBuf>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = ExperimentConfig::from_text(config_text).map_err(to_py)?;
    let dir = out_dir.map(|root| harness::run_dir(&root, &cfg, seed));
    let res = py
        .detach(|| harness::run_training(&cfg, seed, dir.as_deref()))
        .map_err(to_py)?;
    res.log
        .records
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("env_steps", r.env_steps)?;
            d.set_item("eval_mean", r.eval_mean)?;
            d.set_item("eval_std", r.eval_std)?;
            d.set_item("intrinsic_mean", r.intrinsic_mean)?;
            d.set_item("wall_clock", r.wall_clock)?;
            Ok(d)
        })
        .collect()
}

#[pyfunction]
#[pyo3(signature = (path, episodes=10, seed=0))]
fn evaluate_checkpoint(path: PathBuf, episodes: usize, seed: u64) -> PyResult<(f64, f64)> {
    let ckpt = learner::load_checkpoint(&path).map_err(to_py)?;
    harness::evaluate_checkpoint(&ckpt, episodes, seed).map_err(to_py)
}

/// `(suite, passed, total)` for each built-in oracle suite.
#[pyfunction]
fn selftest() -> PyResult<Vec<(String, usize, usize)>> {
    Ok(harness::selftest::run_all()
        .map_err(to_py)?
        .into_iter()
        .map(|s| (s.name.to_string(), s.passed, s.total))
        .collect())
}

#[pymodule]
fn marlx_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<SeededRng>()?;
    m.add_class::<Mlp>()?;
    m.add_class::<Env>()?;
    m.add_class::<EllipseState>()?;
    m.add_class::<RndModule>()?;
    m.add_class::<MixerNet>()?;
    m.add_class::<ReplayBuffer>()?;
    m.add_function(wrap_pyfunction!(sherman_morrison_update, m)?)?;
    m.add_function(wrap_pyfunction!(rel_overgen_reward, m)?)?;
    m.add_function(wrap_pyfunction!(llec_from_novelty, m)?)?;
    m.add_function(wrap_pyfunction!(eec_from_bonus, m)?)?;
    m.add_function(wrap_pyfunction!(jim_product, m)?)?;
    m.add_function(wrap_pyfunction!(lim_combine, m)?)?;
    m.add_function(wrap_pyfunction!(combine_reward, m)?)?;
    m.add_function(wrap_pyfunction!(run_training, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_checkpoint, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    Ok(())
}
