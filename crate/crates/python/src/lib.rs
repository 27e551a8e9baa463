//! Python bindings: build MRFs, run particle belief propagation with either
//! sampler, and use the denoising, tracking and diagnostics helpers.
//!
//! Labels cross the boundary as lists of floats, images as flat row-major
//! pixel lists plus width and height.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use spbp::apps::denoise::{self as den, DenoiseParams, GrayImage};
use spbp::apps::tracking::{self as trk, MotionParams, NodeLayout, Observation, TrackParams};
use spbp::diagnostics;
use spbp::engine::{self, stream_rng};
use spbp::interval::Interval as CoreInterval;

fn py_err(e: spbp::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn intervals(pairs: &[(f64, f64)]) -> PyResult<Vec<CoreInterval>> {
    pairs.iter().map(|&(lo, hi)| CoreInterval::new(lo, hi).map_err(py_err)).collect()
}

/// A finite union of disjoint closed intervals.
#[pyclass(name = "IntervalSet", module = "spbp_py")]
struct PyIntervalSet(spbp::IntervalSet);

#[pymethods]
impl PyIntervalSet {
    #[new]
    #[pyo3(signature = (pairs = Vec::new()))]
    fn new(pairs: Vec<(f64, f64)>) -> PyResult<Self> {
        spbp::IntervalSet::from_pairs(&pairs).map(Self).map_err(py_err)
    }

    fn parts(&self) -> Vec<(f64, f64)> {
        self.0.parts().iter().map(|p| (p.lo(), p.hi())).collect()
    }

    fn measure(&self) -> f64 {
        self.0.measure()
    }

    fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn contains(&self, x: f64) -> bool {
        self.0.contains(x)
    }

    fn union(&self, other: PyRef<'_, Self>) -> Self {
        Self(self.0.union(&other.0))
    }

    fn intersect(&self, other: PyRef<'_, Self>) -> Self {
        Self(self.0.intersect(&other.0))
    }

    fn __repr__(&self) -> String {
        format!("IntervalSet({:?})", self.parts())
    }
}

/// MCMC particle sampler: `Sampler.slice()`, `Sampler.mh(sigma)` or `Sampler.mh_polar(...)`.
#[pyclass(name = "Sampler", module = "spbp_py", frozen)]
struct PySampler(spbp::Sampler);

#[pymethods]
impl PySampler {
    #[staticmethod]
    fn slice() -> Self {
        Self(spbp::Sampler::Slice)
    }

    /// Gaussian random walk; one scale per coordinate or a single shared scale.
    #[staticmethod]
    #[pyo3(signature = (*sigmas))]
    fn mh(sigmas: Vec<f64>) -> PyResult<Self> {
        let s = spbp::Sampler::MetropolisHastings { proposal: spbp::Proposal::Gaussian { sigmas } };
        s.validate().map_err(py_err)?;
        Ok(Self(s))
    }

    /// Position random walk plus polar perturbation of the orientation, for 4-D mesh labels.
    #[staticmethod]
    fn mh_polar(sigma_xy: f64, sigma_r: f64, sigma_phi: f64) -> PyResult<Self> {
        let s = spbp::Sampler::MetropolisHastings {
            proposal: spbp::Proposal::PositionPolar { sigma_xy, sigma_r, sigma_phi },
        };
        s.validate().map_err(py_err)?;
        Ok(Self(s))
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.0.name()
    }

    fn __repr__(&self) -> String {
        format!("Sampler({:?})", self.0)
    }
}

#[pyclass(name = "EngineConfig", module = "spbp_py", frozen)]
struct PyEngineConfig(spbp::EngineConfig);

#[pymethods]
impl PyEngineConfig {
    #[new]
    #[pyo3(signature = (iterations, mcmc_steps, particles, sampler, seed = 0, workers = 1, annealing = None, trace_iterations = Vec::new(), trace_nodes = None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        iterations: usize,
        mcmc_steps: usize,
        particles: usize,
        sampler: PyRef<'_, PySampler>,
        seed: u64,
        workers: usize,
        annealing: Option<(f64, f64)>,
        trace_iterations: Vec<usize>,
        trace_nodes: Option<Vec<usize>>,
    ) -> PyResult<Self> {
        let mut c = spbp::EngineConfig::new(iterations, mcmc_steps, particles, sampler.0.clone())
            .with_seed(seed)
            .with_workers(workers);
        if let Some((t0, tn)) = annealing {
            c = c.with_annealing(t0, tn);
        }
        if !trace_iterations.is_empty() {
            c = c.with_trace(spbp::TraceSpec { iterations: trace_iterations, nodes: trace_nodes });
        }
        c.validate().map_err(py_err)?;
        Ok(Self(c))
    }

    fn temperature(&self, n: usize) -> f64 {
        self.0.temperature(n)
    }

    fn __repr__(&self) -> String {
        let c = &self.0;
        format!(
            "EngineConfig(iterations={}, mcmc_steps={}, particles={}, sampler={}, seed={})",
            c.iterations,
            c.mcmc_steps,
            c.particles,
            c.sampler.name(),
            c.seed
        )
    }
}

#[pyclass(name = "Unary", module = "spbp_py", frozen)]
struct PyUnary(spbp::Unary);

#[pymethods]
impl PyUnary {
    #[staticmethod]
    fn quadratic(target: Vec<f64>, weight: f64) -> Self {
        Self(spbp::Unary::Quadratic { target, weight })
    }

    #[staticmethod]
    fn nearest_well(wells: Vec<Vec<f64>>, weight: f64) -> Self {
        Self(spbp::Unary::NearestWell { wells, weight })
    }

    #[staticmethod]
    fn zero() -> Self {
        Self(spbp::Unary::Zero)
    }

    fn energy(&self, x: Vec<f64>) -> f64 {
        self.0.energy(&x)
    }
}

#[pyclass(name = "Pairwise", module = "spbp_py", frozen)]
struct PyPairwise(spbp::Pairwise);

#[pymethods]
impl PyPairwise {
    #[staticmethod]
    fn quadratic(weight: f64) -> Self {
        Self(spbp::Pairwise::Quadratic { weight })
    }

    #[staticmethod]
    fn truncated_quadratic(weight: f64, cap: f64) -> Self {
        Self(spbp::Pairwise::TruncatedQuadratic { weight, cap })
    }

    #[staticmethod]
    fn weak_perspective(offset: (f64, f64), weight: f64) -> Self {
        Self(spbp::Pairwise::WeakPerspective { offset: [offset.0, offset.1], weight })
    }

    fn energy(&self, a: Vec<f64>, b: Vec<f64>) -> f64 {
        self.0.energy(&a, &b)
    }
}

/// Accumulates nodes and edges; `build()` freezes it into a `Graph`.
#[pyclass(name = "GraphBuilder", module = "spbp_py")]
struct PyGraphBuilder(Option<spbp::GraphBuilder>);

impl PyGraphBuilder {
    fn inner(&mut self) -> PyResult<&mut spbp::GraphBuilder> {
        self.0.as_mut().ok_or_else(|| PyRuntimeError::new_err("builder already consumed by build()"))
    }
}

#[pymethods]
impl PyGraphBuilder {
    #[new]
    fn new() -> Self {
        Self(Some(spbp::GraphBuilder::new()))
    }

    /// Adds a node with label box `bounds = [(lo, hi), ...]`; returns its id.
    fn add_node(&mut self, bounds: Vec<(f64, f64)>, unary: PyRef<'_, PyUnary>) -> PyResult<usize> {
        let space = spbp::LabelSpace::new(intervals(&bounds)?).map_err(py_err)?;
        self.inner()?.add_node(space, unary.0.clone()).map_err(py_err)
    }

    fn add_edge(&mut self, s: usize, t: usize, potential: PyRef<'_, PyPairwise>) -> PyResult<usize> {
        self.inner()?.add_edge(s, t, potential.0.clone()).map_err(py_err)
    }

    fn build(&mut self) -> PyResult<PyGraph> {
        let builder = self.0.take().ok_or_else(|| PyRuntimeError::new_err("builder already consumed by build()"))?;
        Ok(PyGraph(builder.build()))
    }
}

#[pyclass(name = "Graph", module = "spbp_py", frozen)]
struct PyGraph(spbp::MrfGraph);

#[pymethods]
impl PyGraph {
    fn node_count(&self) -> usize {
        self.0.node_count()
    }

    fn neighbors(&self, s: usize) -> PyResult<Vec<usize>> {
        if s >= self.0.node_count() {
            return Err(PyValueError::new_err(format!("node {s} out of range")));
        }
        Ok(self.0.neighbors(s).iter().map(|n| n.node).collect())
    }

    /// Sum of unary energies plus each edge energy counted once.
    fn objective(&self, labels: Vec<Vec<f64>>) -> PyResult<f64> {
        self.0.objective(&labels).map_err(py_err)
    }

    /// Runs PBP from `init[node][particle] = label`.
    fn run(&self, py: Python<'_>, init: Vec<Vec<Vec<f64>>>, config: PyRef<'_, PyEngineConfig>) -> PyResult<PyRunResult> {
        let state = spbp::ParticleState::new(&self.0, init).map_err(py_err)?;
        let config = config.0.clone();
        let graph = &self.0;
        let out = py.detach(|| spbp::run(graph, &state, &config)).map_err(py_err)?;
        Ok(PyRunResult(out))
    }
}

#[pyclass(name = "RunResult", module = "spbp_py", frozen)]
struct PyRunResult(spbp::RunOutput);

#[pymethods]
impl PyRunResult {
    /// Lowest-disbelief particle per node.
    fn map_estimate(&self) -> Vec<Vec<f64>> {
        engine::map_estimate(&self.0.state)
    }

    /// Belief-weighted particle mean per node.
    fn mean_estimate(&self) -> Vec<Vec<f64>> {
        engine::mean_estimate(&self.0.state)
    }

    fn particles(&self, s: usize) -> PyResult<Vec<Vec<f64>>> {
        self.check(s)?;
        Ok(self.0.state.labels(s))
    }

    fn disbelief(&self, s: usize) -> PyResult<Vec<f64>> {
        self.check(s)?;
        Ok(self.0.state.disbelief(s).to_vec())
    }

    #[getter]
    fn total_steps(&self) -> u64 {
        self.0.total_steps()
    }

    #[getter]
    fn total_accepted(&self) -> u64 {
        self.0.total_accepted()
    }

    /// One dict per iteration: iteration, temperature, mean_disbelief, steps, accepted.
    fn summaries<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.0
            .summaries
            .iter()
            .map(|s| {
                let d = PyDict::new(py);
                d.set_item("iteration", s.iteration)?;
                d.set_item("temperature", s.temperature)?;
                d.set_item("mean_disbelief", s.mean_disbelief)?;
                d.set_item("steps", s.steps)?;
                d.set_item("accepted", s.accepted)?;
                Ok(d)
            })
            .collect()
    }

    /// One dict per recorded chain: node, particle, iteration and `samples[step][coord]`.
    fn traces<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.0
            .traces
            .iter()
            .map(|t| {
                let d = PyDict::new(py);
                d.set_item("node", t.node)?;
                d.set_item("particle", t.particle)?;
                d.set_item("iteration", t.iteration)?;
                let samples: Vec<Vec<f64>> = t.samples.chunks_exact(t.dims).map(<[f64]>::to_vec).collect();
                d.set_item("samples", samples)?;
                Ok(d)
            })
            .collect()
    }
}

impl PyRunResult {
    fn check(&self, s: usize) -> PyResult<()> {
        if s < self.0.state.node_count() {
            Ok(())
        } else {
            Err(PyValueError::new_err(format!("node {s} out of range")))
        }
    }
}

fn image(pixels: Vec<f64>, width: usize, height: usize) -> PyResult<GrayImage> {
    GrayImage::new(width, height, pixels).map_err(py_err)
}

/// Synthetic piecewise-constant test image as a flat pixel list.
#[pyfunction]
fn test_pattern(width: usize, height: usize) -> Vec<f64> {
    den::test_pattern(width, height).pixels().to_vec()
}

/// Adds Gaussian noise of std `sigma` and clips to [0, 1].
#[pyfunction]
fn add_noise(pixels: Vec<f64>, width: usize, height: usize, sigma: f64, seed: u64) -> PyResult<Vec<f64>> {
    let clean = image(pixels, width, height)?;
    let noisy = den::add_noise(&clean, sigma, &mut stream_rng(seed, &[])).map_err(py_err)?;
    Ok(noisy.pixels().to_vec())
}

#[pyfunction]
fn image_loss(estimate: Vec<f64>, truth: Vec<f64>, width: usize, height: usize) -> PyResult<f64> {
    den::image_loss(&image(estimate, width, height)?, &image(truth, width, height)?).map_err(py_err)
}

/// Denoises a [0, 1] image; returns `(map_pixels, mean_pixels, acceptance_rate)`.
#[pyfunction]
#[pyo3(signature = (observed, width, height, config, data_weight = None, smooth_weight = None, smooth_cap = None))]
#[allow(clippy::too_many_arguments)]
fn denoise(
    py: Python<'_>,
    observed: Vec<f64>,
    width: usize,
    height: usize,
    config: PyRef<'_, PyEngineConfig>,
    data_weight: Option<f64>,
    smooth_weight: Option<f64>,
    smooth_cap: Option<f64>,
) -> PyResult<(Vec<f64>, Vec<f64>, f64)> {
    let observed = image(observed, width, height)?;
    let defaults = DenoiseParams::default();
    let params = DenoiseParams {
        data_weight: data_weight.unwrap_or(defaults.data_weight),
        smooth_weight: smooth_weight.unwrap_or(defaults.smooth_weight),
        smooth_cap: smooth_cap.unwrap_or(defaults.smooth_cap),
    };
    let config = config.0.clone();
    let out = py.detach(|| den::denoise(&observed, &params, &config)).map_err(py_err)?;
    let rate = out.run.total_accepted() as f64 / out.run.total_steps().max(1) as f64;
    Ok((out.map.pixels().to_vec(), out.mean.pixels().to_vec(), rate))
}

/// Synthetic moving mesh with ground-truth poses and noisy position observations.
#[pyclass(name = "MeshScene", module = "spbp_py", frozen)]
struct PyMeshScene(trk::MeshScene);

#[pymethods]
impl PyMeshScene {
    /// A `rows x cols` grid mesh moved by a similarity transform per frame.
    #[staticmethod]
    #[pyo3(signature = (rows, cols, spacing, origin, frames, translation = (0.0, 0.0), rotation = 0.0, scale = 0.0, deformation = 0.0, obs_noise = 1.0, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn grid(
        rows: usize,
        cols: usize,
        spacing: f64,
        origin: (f64, f64),
        frames: usize,
        translation: (f64, f64),
        rotation: f64,
        scale: f64,
        deformation: f64,
        obs_noise: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let layout = NodeLayout::grid(rows, cols, spacing, [origin.0, origin.1]);
        let motion = MotionParams { translation: [translation.0, translation.1], rotation, scale, deformation };
        trk::generate_scene(&layout, frames, &motion, obs_noise, &mut stream_rng(seed, &[]))
            .map(Self)
            .map_err(py_err)
    }

    #[getter]
    fn frame_count(&self) -> usize {
        self.0.frame_count()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.0.layout.len()
    }

    /// Ground-truth `[px, py, ox, oy]` per node for frame `f`.
    fn truth(&self, f: usize) -> PyResult<Vec<[f64; 4]>> {
        self.0.truth.get(f).cloned().ok_or_else(|| PyValueError::new_err(format!("frame {f} out of range")))
    }

    fn observations(&self, f: usize) -> PyResult<Vec<[f64; 2]>> {
        self.0.observations.get(f).cloned().ok_or_else(|| PyValueError::new_err(format!("frame {f} out of range")))
    }
}

/// Tracks the scene frame by frame; returns a dict with rmsd, frame_rmsd,
/// quantiles, estimates and acceptance_rate.
#[pyfunction]
#[pyo3(signature = (scene, alpha, config, ambiguous = false))]
fn track<'py>(
    py: Python<'py>,
    scene: PyRef<'_, PyMeshScene>,
    alpha: f64,
    config: PyRef<'_, PyEngineConfig>,
    ambiguous: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let observation = if ambiguous { Observation::Ambiguous } else { Observation::PerNode };
    let params = TrackParams::new(alpha, observation);
    params.validate().map_err(py_err)?;
    let config = config.0.clone();
    let scene = &scene.0;
    let out = py.detach(|| trk::track(scene, &params, &config)).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("rmsd", out.rmsd)?;
    d.set_item("frame_rmsd", out.frame_rmsd)?;
    let q = out.quantiles;
    d.set_item("quantiles", [q.q10, q.q25, q.q50, q.q75, q.q90])?;
    d.set_item("estimates", out.estimates)?;
    d.set_item("acceptance_rate", out.accepted as f64 / out.steps.max(1) as f64)?;
    Ok(d)
}

/// `[1, rho_1, ..., rho_max_lag]` of the second half of `chain`.
#[pyfunction]
fn autocorrelation(chain: Vec<f64>, max_lag: usize) -> PyResult<Vec<f64>> {
    diagnostics::autocorrelation(&chain, max_lag).map_err(py_err)
}

#[pyfunction]
fn mean_autocorrelation(rows: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    diagnostics::mean_autocorrelation(&rows).map_err(py_err)
}

#[pyfunction]
fn rmsd(errors: Vec<f64>) -> PyResult<f64> {
    diagnostics::rmsd(&errors).map_err(py_err)
}

/// 10/25/50/75/90 % quantiles.
#[pyfunction]
fn quantiles(errors: Vec<f64>) -> PyResult<[f64; 5]> {
    let q = diagnostics::quantiles(&errors).map_err(py_err)?;
    Ok([q.q10, q.q25, q.q50, q.q75, q.q90])
}

/// Temperature at iteration `n` of a geometric schedule from `t0` to `tn` over `steps`.
#[pyfunction]
fn temperature(t0: f64, tn: f64, steps: usize, n: usize) -> PyResult<f64> {
    let s = spbp::AnnealingSchedule::new(t0, tn, steps).map_err(py_err)?;
    Ok(s.temperature(n))
}

#[pymodule]
pub fn spbp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyIntervalSet>()?;
    m.add_class::<PySampler>()?;
    m.add_class::<PyEngineConfig>()?;
    m.add_class::<PyUnary>()?;
    m.add_class::<PyPairwise>()?;
    m.add_class::<PyGraphBuilder>()?;
    m.add_class::<PyGraph>()?;
    m.add_class::<PyRunResult>()?;
    m.add_class::<PyMeshScene>()?;
    m.add_function(wrap_pyfunction!(test_pattern, m)?)?;
    m.add_function(wrap_pyfunction!(add_noise, m)?)?;
    m.add_function(wrap_pyfunction!(image_loss, m)?)?;
    m.add_function(wrap_pyfunction!(denoise, m)?)?;
    m.add_function(wrap_pyfunction!(track, m)?)?;
    m.add_function(wrap_pyfunction!(autocorrelation, m)?)?;
    m.add_function(wrap_pyfunction!(mean_autocorrelation, m)?)?;
    m.add_function(wrap_pyfunction!(rmsd, m)?)?;
    m.add_function(wrap_pyfunction!(quantiles, m)?)?;
    m.add_function(wrap_pyfunction!(temperature, m)?)?;
    Ok(())
}
