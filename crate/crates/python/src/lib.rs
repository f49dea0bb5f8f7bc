//! Python bindings for the snake-dqn core crate.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use snake_dqn::agent::{self, Hyperparams};
use snake_dqn::env::{Direction, EnvState, Event, GridConfig};
use snake_dqn::harness::{self, memreport};
use snake_dqn::preprocess::{self, BinaryFrame, FrameStack, PixelFormat, RgbFrame, STACK_LEN};
use snake_dqn::replay;
use snake_dqn::{Agent, Error};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Checkpoint(_) | Error::Parse { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn pixel_format(name: &str) -> PyResult<PixelFormat> {
    match name {
        "rgb" => Ok(PixelFormat::RgbFloat64),
        "gray" => Ok(PixelFormat::GrayFloat64),
        "binary" => Ok(PixelFormat::BinaryByte),
        "packed" => Ok(PixelFormat::BinaryPacked),
        _ => Err(PyValueError::new_err(format!(
            "unknown format '{name}' (rgb|gray|binary|packed)"
        ))),
    }
}

fn event_name(e: Event) -> &'static str {
    match e {
        Event::AteApple => "ate_apple",
        Event::Collision => "collision",
        Event::Moved => "moved",
        Event::Truncated => "truncated",
        Event::Won => "won",
    }
}

/// Snake on the default 12x12 grid. Actions: 0 up, 1 down, 2 left, 3 right.
#[pyclass(name = "Env")]
struct PyEnv {
    state: EnvState,
}

#[pymethods]
impl PyEnv {
    #[new]
    #[pyo3(signature = (seed = 0, max_steps = 10_000))]
    fn new(seed: u64, max_steps: u64) -> PyResult<Self> {
        let config = GridConfig::default().with_max_steps(max_steps);
        Ok(PyEnv {
            state: EnvState::reset(config, seed).map_err(to_py)?,
        })
    }

    fn reset(&mut self, seed: u64) -> PyResult<()> {
        self.state = EnvState::reset(*self.state.config(), seed).map_err(to_py)?;
        Ok(())
    }

    /// Returns `(reward, terminal, event)`.
    fn step(&mut self, action: usize) -> PyResult<(f64, bool, &'static str)> {
        let dir = Direction::from_index(action)
            .ok_or_else(|| PyValueError::new_err(format!("action {action} not in 0..4")))?;
        let out = self.state.step(dir).map_err(to_py)?;
        Ok((out.reward, out.terminal, event_name(out.event)))
    }

    #[getter]
    fn score(&self) -> u32 {
        self.state.score()
    }

    #[getter]
    fn steps(&self) -> u64 {
        self.state.steps()
    }

    #[getter]
    fn done(&self) -> bool {
        self.state.is_done()
    }

    /// `(col, row)` cells from head to tail.
    #[getter]
    fn body(&self) -> Vec<(i32, i32)> {
        self.state.body().map(|c| (c.col, c.row)).collect()
    }

    #[getter]
    fn apple(&self) -> Option<(i32, i32)> {
        self.state.apple().map(|c| (c.col, c.row))
    }

    fn to_text(&self) -> String {
        self.state.to_text()
    }

    /// Interleaved RGB bytes of the 252x252 frame.
    fn render<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, self.state.render().data())
    }

    /// The 84x84 binary observation, one byte (0 or 1) per pixel.
    fn observe<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let f = preprocess::observe(&self.state.render()).map_err(to_py)?;
        Ok(PyBytes::new(py, &f.to_bytes()))
    }
}

/// Grayscale, downscale and threshold an RGB frame into 7056 bytes of 0/1.
#[pyfunction]
#[pyo3(signature = (rgb, width = 252, height = 252))]
fn observe<'py>(
    py: Python<'py>,
    rgb: &[u8],
    width: usize,
    height: usize,
) -> PyResult<Bound<'py, PyBytes>> {
    let frame = RgbFrame::from_raw(width, height, rgb.to_vec()).map_err(to_py)?;
    let f = preprocess::observe(&frame).map_err(to_py)?;
    Ok(PyBytes::new(py, &f.to_bytes()))
}

/// Luminance of every pixel, row-major.
#[pyfunction]
fn to_grayscale(rgb: &[u8], width: usize, height: usize) -> PyResult<Vec<f64>> {
    let frame = RgbFrame::from_raw(width, height, rgb.to_vec()).map_err(to_py)?;
    Ok(preprocess::to_grayscale(&frame).data().to_vec())
}

/// Pack 7056 bytes of 0/1 into the 882-byte storage form.
#[pyfunction]
fn pack<'py>(py: Python<'py>, pixels: &[u8]) -> PyResult<Bound<'py, PyBytes>> {
    let f = BinaryFrame::from_bytes(pixels).map_err(to_py)?;
    Ok(PyBytes::new(py, f.packed()))
}

#[pyfunction]
fn frame_bytes(format: &str) -> PyResult<u64> {
    Ok(preprocess::frame_bytes(pixel_format(format)?))
}

/// Bytes of replay memory for `capacity` experiences.
#[pyfunction]
#[pyo3(signature = (capacity, format, frames_per_experience = replay::FRAMES_PER_EXPERIENCE))]
fn memory_bytes(capacity: u64, format: &str, frames_per_experience: u64) -> PyResult<u64> {
    Ok(replay::memory_report(capacity, pixel_format(format)?, frames_per_experience).bytes)
}

#[pyfunction]
fn memory_report_text() -> String {
    memreport::full_report()
}

/// Exploration rate after `frame` frames under the default schedule.
#[pyfunction]
fn epsilon_at(frame: u64) -> f64 {
    agent::epsilon_at(frame, &Hyperparams::default())
}

fn stack_from(frames: Vec<Vec<u8>>) -> PyResult<FrameStack> {
    if frames.len() != STACK_LEN {
        return Err(PyValueError::new_err(format!(
            "expected {STACK_LEN} frames"
        )));
    }
    let mut out: [BinaryFrame; STACK_LEN] = Default::default();
    for (slot, bytes) in out.iter_mut().zip(&frames) {
        *slot = BinaryFrame::from_bytes(bytes).map_err(to_py)?;
    }
    Ok(FrameStack::from_frames(out))
}

/// A freshly initialized agent with default hyperparameters.
#[pyclass(name = "Agent")]
struct PyAgent {
    inner: Agent,
}

#[pymethods]
impl PyAgent {
    #[new]
    #[pyo3(signature = (seed = 0))]
    fn new(seed: u64) -> PyResult<Self> {
        Ok(PyAgent {
            inner: Agent::new(Hyperparams::default(), seed).map_err(to_py)?,
        })
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.online.param_count()
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon()
    }

    /// Q-values for four 7056-byte observations, oldest first.
    fn q_values(&self, frames: Vec<Vec<u8>>) -> PyResult<Vec<f32>> {
        self.inner.q_values(&stack_from(frames)?).map_err(to_py)
    }

    fn greedy_action(&self, frames: Vec<Vec<u8>>) -> PyResult<usize> {
        Ok(agent::greedy_action(&self.q_values(frames)?))
    }
}

/// Train from a config file; returns `(episodes, frames)`.
#[pyfunction]
fn train(config: PathBuf) -> PyResult<(u64, u64)> {
    let cfg = harness::TrainConfig::load(&config).map_err(to_py)?;
    let mut t = harness::Trainer::new(cfg).map_err(to_py)?;
    t.run(|_| {}).map_err(to_py)?;
    Ok((t.episode, t.agent.frame_count))
}

/// Per-episode scores of a checkpoint's greedy (or epsilon-greedy) policy.
#[pyfunction]
#[pyo3(signature = (checkpoint, episodes = 50, epsilon = 0.0, seed = 0))]
fn evaluate_checkpoint(
    checkpoint: PathBuf,
    episodes: u64,
    epsilon: f64,
    seed: u64,
) -> PyResult<Vec<u32>> {
    Ok(
        harness::evaluate_checkpoint(&checkpoint, episodes, epsilon, seed)
            .map_err(to_py)?
            .scores,
    )
}

#[pyfunction]
#[pyo3(signature = (episodes, max_step = 10_000, seed = 0))]
fn random_baseline(episodes: u64, max_step: u64, seed: u64) -> PyResult<Vec<u32>> {
    Ok(harness::random_policy_baseline(max_step, episodes, seed)
        .map_err(to_py)?
        .scores)
}

#[pymodule]
fn snake_dqn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEnv>()?;
    m.add_class::<PyAgent>()?;
    m.add_function(wrap_pyfunction!(observe, m)?)?;
    m.add_function(wrap_pyfunction!(to_grayscale, m)?)?;
    m.add_function(wrap_pyfunction!(pack, m)?)?;
    m.add_function(wrap_pyfunction!(frame_bytes, m)?)?;
    m.add_function(wrap_pyfunction!(memory_bytes, m)?)?;
    m.add_function(wrap_pyfunction!(memory_report_text, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon_at, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_checkpoint, m)?)?;
    m.add_function(wrap_pyfunction!(random_baseline, m)?)?;
    Ok(())
}
