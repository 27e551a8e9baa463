//! Max-product particle belief propagation in min-sum (negative log) form.
//!
//! Every node carries `p` particles. An iteration resamples all particles
//! with the configured MCMC kernel against the node's log disbelief, then
//! rebuilds the caches at the new particles:
//!
//! ```text
//! M_{t->s}(x_s) = min_{x_t in P_t} [ psi_{s,t}(x_s, x_t) / T + B_t(x_t) - M_{s->t}(x_t) ]
//! B_s(x_s)      = psi_s(x_s) / T + sum_{t in N(s)} M_{t->s}(x_s)
//! ```
//!
//! All reads during an iteration use the previous iteration's particles and
//! caches, so node order never matters and nodes may be updated in parallel.
//! Cached values are stored already divided by the temperature of the
//! iteration that produced them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::ChainTrace;
use crate::error::{Error, Result};
use crate::mrf::MrfGraph;
use crate::samplers::{run_chain, NodeView, Sampler};

/// Geometric temperature schedule `T_n = t0 * (tn / t0)^(n / steps)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealingSchedule {
    pub t0: f64,
    pub tn: f64,
    pub steps: usize,
}

impl AnnealingSchedule {
    pub fn new(t0: f64, tn: f64, steps: usize) -> Result<Self> {
        let s = Self { t0, tn, steps };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0 && self.t0.is_finite() && self.tn > 0.0 && self.tn.is_finite()) {
            return Err(Error::Config(format!(
                "temperatures must be positive and finite, got {} and {}",
                self.t0, self.tn
            )));
        }
        if self.steps == 0 {
            return Err(Error::Config("annealing schedule needs at least one step".into()));
        }
        Ok(())
    }

    pub fn temperature(&self, n: usize) -> f64 {
        temperature(self, n)
    }
}

pub fn temperature(schedule: &AnnealingSchedule, n: usize) -> f64 {
    if n == 0 {
        return schedule.t0;
    }
    if n == schedule.steps {
        return schedule.tn;
    }
    schedule.t0 * (schedule.tn / schedule.t0).powf(n as f64 / schedule.steps as f64)
}

/// Which iterations (and optionally which nodes) record full MCMC chains.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceSpec {
    pub iterations: Vec<usize>,
    /// `None` records every node.
    pub nodes: Option<Vec<usize>>,
}

impl TraceSpec {
    fn records(&self, n: usize, s: usize) -> bool {
        self.iterations.contains(&n) && self.nodes.as_ref().is_none_or(|ns| ns.contains(&s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// PBP iterations `N`.
    pub iterations: usize,
    /// MCMC steps `M` per particle per iteration.
    pub mcmc_steps: usize,
    /// Particles `p` per node.
    pub particles: usize,
    pub sampler: Sampler,
    #[serde(default)]
    pub annealing: Option<AnnealingSchedule>,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads for per-node updates; results do not depend on it.
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub trace: TraceSpec,
}

fn default_workers() -> usize {
    1
}

impl EngineConfig {
    pub fn new(iterations: usize, mcmc_steps: usize, particles: usize, sampler: Sampler) -> Self {
        Self {
            iterations,
            mcmc_steps,
            particles,
            sampler,
            annealing: None,
            seed: 0,
            workers: 1,
            trace: TraceSpec::default(),
        }
    }

    pub fn with_annealing(mut self, t0: f64, tn: f64) -> Self {
        self.annealing = Some(AnnealingSchedule { t0, tn, steps: self.iterations.max(1) });
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_trace(mut self, trace: TraceSpec) -> Self {
        self.trace = trace;
        self
    }

    /// Temperature used at iteration `n` (1 without annealing).
    pub fn temperature(&self, n: usize) -> f64 {
        self.annealing.as_ref().map_or(1.0, |a| a.temperature(n))
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::Config("need at least one particle per node".into()));
        }
        if let Some(a) = &self.annealing {
            a.validate()?;
        }
        self.sampler.validate()
    }
}

/// Particles plus the cached log disbeliefs and incoming messages at them.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    count: usize,
    dims: Vec<usize>,
    /// Per node, `count * dims` values.
    particles: Vec<Vec<f64>>,
    /// Per node, `B_s` at each particle.
    disbelief: Vec<Vec<f64>>,
    /// Per node and neighbor slot, `M_{t->s}` at each of `s`'s particles.
    incoming: Vec<Vec<Vec<f64>>>,
    iteration: usize,
}

impl ParticleState {
    /// State with the given particles (per node, per particle label) and
    /// all caches zero.
    pub fn new(graph: &MrfGraph, labels: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if labels.len() != graph.node_count() {
            return Err(Error::Shape(format!(
                "particles for {} nodes, graph has {}",
                labels.len(),
                graph.node_count()
            )));
        }
        let count = labels.first().map_or(0, Vec::len);
        if count == 0 {
            return Err(Error::Config("need at least one particle per node".into()));
        }
        let mut particles = Vec::with_capacity(labels.len());
        let mut dims = Vec::with_capacity(labels.len());
        for (s, node) in labels.into_iter().enumerate() {
            if node.len() != count {
                return Err(Error::Shape(format!("node {s} has {} particles, expected {count}", node.len())));
            }
            let space = graph.space(s);
            for x in &node {
                if !space.contains(x) {
                    return Err(Error::Domain { node: s, label: x.clone() });
                }
            }
            dims.push(space.dims());
            particles.push(node.concat());
        }
        Ok(Self::from_flat(graph, count, dims, particles))
    }

    fn from_flat(graph: &MrfGraph, count: usize, dims: Vec<usize>, particles: Vec<Vec<f64>>) -> Self {
        let n = graph.node_count();
        Self {
            count,
            dims,
            particles,
            disbelief: vec![vec![0.0; count]; n],
            incoming: (0..n)
                .map(|s| vec![vec![0.0; count]; graph.neighbors(s).len()])
                .collect(),
            iteration: 0,
        }
    }

    pub fn node_count(&self) -> usize {
        self.particles.len()
    }

    /// Particles per node.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dims(&self, s: usize) -> usize {
        self.dims[s]
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn particle(&self, s: usize, i: usize) -> &[f64] {
        let d = self.dims[s];
        &self.particles[s][i * d..(i + 1) * d]
    }

    /// All particles of node `s` as labels.
    pub fn labels(&self, s: usize) -> Vec<Vec<f64>> {
        self.particles[s].chunks(self.dims[s]).map(<[f64]>::to_vec).collect()
    }

    pub fn disbelief(&self, s: usize) -> &[f64] {
        &self.disbelief[s]
    }

    /// `M_{t->s}` at the particles of `s`, for the neighbor of `s` in `slot`.
    pub fn incoming(&self, s: usize, slot: usize) -> &[f64] {
        &self.incoming[s][slot]
    }

    /// Overwrites the cached disbeliefs of node `s`.
    pub fn set_disbelief(&mut self, s: usize, values: Vec<f64>) -> Result<()> {
        if values.len() != self.count {
            return Err(Error::Shape(format!("{} disbeliefs for {} particles", values.len(), self.count)));
        }
        self.disbelief[s] = values;
        Ok(())
    }

    /// Overwrites the cached incoming message of node `s` from its neighbor in `slot`.
    pub fn set_incoming(&mut self, s: usize, slot: usize, values: Vec<f64>) -> Result<()> {
        if values.len() != self.count {
            return Err(Error::Shape(format!("{} message values for {} particles", values.len(), self.count)));
        }
        self.incoming[s][slot] = values;
        Ok(())
    }
}

/// Message from the neighbor of `s` in `slot` into `s`, evaluated at an
/// arbitrary label `x_s`. Only the potential term is divided by `temp`.
#[inline]
pub fn message(graph: &MrfGraph, state: &ParticleState, s: usize, slot: usize, x_s: &[f64], temp: f64) -> f64 {
    let nb = graph.neighbors(s)[slot];
    let t = nb.node;
    let b_t = &state.disbelief[t];
    let m_st = &state.incoming[t][nb.reverse_slot];
    let d = state.dims[t];
    let inv_temp = 1.0 / temp;
    let mut best = f64::INFINITY;
    for (k, x_t) in state.particles[t].chunks_exact(d).enumerate() {
        let v = graph.pair_energy(s, slot, x_s, x_t) * inv_temp + b_t[k] - m_st[k];
        if v < best {
            best = v;
        }
    }
    best
}

/// Log disbelief of node `s` at an arbitrary label.
pub fn disbelief(graph: &MrfGraph, state: &ParticleState, s: usize, x_s: &[f64], temp: f64) -> f64 {
    let mut total = graph.unary(s).energy(x_s) / temp;
    for slot in 0..graph.neighbors(s).len() {
        total += message(graph, state, s, slot, x_s, temp);
    }
    total
}

fn shift_to_zero_min(row: &mut [f64]) {
    let min = row.iter().copied().fold(f64::INFINITY, f64::min);
    if min.is_finite() {
        row.iter_mut().for_each(|v| *v -= min);
    }
}

/// Shifts every disbelief row and every message row so its minimum is zero.
pub fn normalize(mut state: ParticleState) -> ParticleState {
    normalize_in_place(&mut state);
    state
}

pub fn normalize_in_place(state: &mut ParticleState) {
    for row in &mut state.disbelief {
        shift_to_zero_min(row);
    }
    for node in &mut state.incoming {
        for row in node {
            shift_to_zero_min(row);
        }
    }
}

/// Index of the smallest value, lowest index on ties.
pub fn argmin(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v < row[best] {
            best = i;
        }
    }
    best
}

/// Per node, the index of the particle with minimal disbelief.
pub fn map_indices(state: &ParticleState) -> Vec<usize> {
    state.disbelief.iter().map(|row| argmin(row)).collect()
}

/// Per node, the particle with minimal disbelief (lowest index on ties).
pub fn map_estimate(state: &ParticleState) -> Vec<Vec<f64>> {
    map_indices(state)
        .into_iter()
        .enumerate()
        .map(|(s, i)| state.particle(s, i).to_vec())
        .collect()
}

/// Normalized belief weights `exp(-B) / sum exp(-B)` for one node.
pub fn belief_weights(disbelief: &[f64]) -> Vec<f64> {
    let min = disbelief.iter().copied().fold(f64::INFINITY, f64::min);
    let raw: Vec<f64> = disbelief.iter().map(|b| (-(b - min)).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Per node, the belief-weighted mean of the particles.
pub fn mean_estimate(state: &ParticleState) -> Vec<Vec<f64>> {
    (0..state.node_count())
        .map(|s| {
            let weights = belief_weights(&state.disbelief[s]);
            let d = state.dims[s];
            let mut mean = vec![0.0; d];
            for (w, x) in weights.iter().zip(state.particles[s].chunks_exact(d)) {
                for (m, v) in mean.iter_mut().zip(x) {
                    *m += w * v;
                }
            }
            mean
        })
        .collect()
}

/// Draws `p` particles per node with replacement, with probability
/// proportional to `exp(-B)`. Caches of the result are zero.
pub fn resample<R: Rng + ?Sized>(graph: &MrfGraph, state: &ParticleState, rng: &mut R) -> ParticleState {
    let particles = (0..state.node_count())
        .map(|s| {
            let weights = belief_weights(&state.disbelief[s]);
            let d = state.dims[s];
            let mut out = Vec::with_capacity(state.count * d);
            for _ in 0..state.count {
                let idx = draw_index(&weights, rng);
                out.extend_from_slice(state.particle(s, idx));
            }
            out
        })
        .collect();
    ParticleState::from_flat(graph, state.count, state.dims.clone(), particles)
}

fn draw_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let mut u = rng.random::<f64>();
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    // Rounding: fall back to the last particle with positive weight.
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(weights.len() - 1)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed derived from `seed` and a tuple of indices.
pub fn derive_seed(seed: u64, keys: &[u64]) -> u64 {
    let mut h = splitmix64(seed);
    for &k in keys {
        h = splitmix64(h ^ splitmix64(k));
    }
    h
}

/// Independent random stream keyed by a seed and a tuple of indices.
pub fn stream_rng(seed: u64, keys: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, keys))
}

/// Per-iteration summary row.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationSummary {
    pub iteration: usize,
    pub temperature: f64,
    /// Mean normalized disbelief over all particles of all nodes.
    pub mean_disbelief: f64,
    pub steps: u64,
    pub accepted: u64,
}

impl IterationSummary {
    pub fn acceptance_rate(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.accepted as f64 / self.steps as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: ParticleState,
    pub traces: Vec<ChainTrace>,
    pub summaries: Vec<IterationSummary>,
}

impl RunOutput {
    pub fn total_steps(&self) -> u64 {
        self.summaries.iter().map(|s| s.steps).sum()
    }

    pub fn total_accepted(&self) -> u64 {
        self.summaries.iter().map(|s| s.accepted).sum()
    }
}

struct NodeUpdate {
    particles: Vec<f64>,
    steps: u64,
    accepted: u64,
    traces: Vec<ChainTrace>,
}

fn update_node(
    graph: &MrfGraph,
    state: &ParticleState,
    s: usize,
    n: usize,
    temp: f64,
    config: &EngineConfig,
) -> NodeUpdate {
    let view = NodeView::new(graph, state, s, temp);
    let d = state.dims[s];
    let record = config.trace.records(n, s);
    let mut particles = Vec::with_capacity(state.count * d);
    let mut traces = Vec::new();
    let (mut steps, mut accepted) = (0, 0);
    for i in 0..state.count {
        let mut rng = stream_rng(config.seed, &[n as u64, s as u64, i as u64]);
        let mut samples = record.then(|| Vec::with_capacity(config.mcmc_steps * d));
        let chain = run_chain(
            &view,
            &config.sampler,
            state.particle(s, i),
            config.mcmc_steps,
            &mut rng,
            samples.as_mut(),
        );
        steps += chain.steps;
        accepted += chain.accepted;
        particles.extend_from_slice(&chain.last);
        if let Some(samples) = samples {
            traces.push(ChainTrace { node: s, particle: i, iteration: n, dims: d, samples });
        }
    }
    NodeUpdate { particles, steps, accepted, traces }
}

/// Caches of one node at its new particles, read against `prev`.
fn node_caches(
    graph: &MrfGraph,
    prev: &ParticleState,
    s: usize,
    particles: &[f64],
    temp: f64,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = prev.dims[s];
    let slots = graph.neighbors(s).len();
    let mut incoming = vec![Vec::with_capacity(prev.count); slots];
    let mut disbelief = Vec::with_capacity(prev.count);
    for x in particles.chunks_exact(d) {
        let mut b = graph.unary(s).energy(x) / temp;
        for (slot, row) in incoming.iter_mut().enumerate() {
            let m = message(graph, prev, s, slot, x, temp);
            row.push(m);
            b += m;
        }
        disbelief.push(b);
    }
    (disbelief, incoming)
}

fn maybe_parallel<T: Send>(workers: usize, n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    if workers <= 1 {
        (0..n).map(f).collect()
    } else {
        (0..n).into_par_iter().map(f).collect()
    }
}

/// Rebuilds every cache at `particles` from the previous state, then normalizes.
fn refresh(graph: &MrfGraph, prev: &ParticleState, particles: Vec<Vec<f64>>, temp: f64, workers: usize) -> ParticleState {
    let caches = maybe_parallel(workers, graph.node_count(), |s| node_caches(graph, prev, s, &particles[s], temp));
    let (disbelief, incoming) = caches.into_iter().unzip();
    let mut next = ParticleState {
        count: prev.count,
        dims: prev.dims.clone(),
        particles,
        disbelief,
        incoming,
        iteration: prev.iteration + 1,
    };
    normalize_in_place(&mut next);
    next
}

fn check_compatible(graph: &MrfGraph, state: &ParticleState) -> Result<()> {
    if state.node_count() != graph.node_count() {
        return Err(Error::Shape(format!(
            "state has {} nodes, graph has {}",
            state.node_count(),
            graph.node_count()
        )));
    }
    for s in 0..graph.node_count() {
        if state.dims[s] != graph.space(s).dims() || state.incoming[s].len() != graph.neighbors(s).len() {
            return Err(Error::Shape(format!("node {s} does not match the graph")));
        }
        for i in 0..state.count {
            if !graph.space(s).contains(state.particle(s, i)) {
                return Err(Error::Domain { node: s, label: state.particle(s, i).to_vec() });
            }
        }
    }
    Ok(())
}

/// Runs `config.iterations` PBP iterations starting from `init`'s particles.
///
/// Caches start at zero regardless of what `init` holds. With zero
/// iterations the caches are built once at the initial temperature.
pub fn run(graph: &MrfGraph, init: &ParticleState, config: &EngineConfig) -> Result<RunOutput> {
    config.validate()?;
    if init.count != config.particles {
        return Err(Error::Config(format!(
            "config asks for {} particles, initial state has {}",
            config.particles, init.count
        )));
    }
    check_compatible(graph, init)?;
    config.sampler.check_graph(graph)?;

    let pool = if config.workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.workers)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?,
        )
    } else {
        None
    };
    let body = || run_iterations(graph, init, config);
    Ok(match &pool {
        Some(pool) => pool.install(body),
        None => body(),
    })
}

fn run_iterations(graph: &MrfGraph, init: &ParticleState, config: &EngineConfig) -> RunOutput {
    let mut state = ParticleState::from_flat(graph, init.count, init.dims.clone(), init.particles.clone());
    let mut traces = Vec::new();
    let mut summaries = Vec::with_capacity(config.iterations);

    if config.iterations == 0 {
        let particles = state.particles.clone();
        let mut state = refresh(graph, &state, particles, config.temperature(0), config.workers);
        state.iteration = 0;
        return RunOutput { state, traces, summaries };
    }

    for n in 1..=config.iterations {
        let temp = config.temperature(n);
        let updates = maybe_parallel(config.workers, graph.node_count(), |s| {
            update_node(graph, &state, s, n, temp, config)
        });
        let (mut steps, mut accepted) = (0, 0);
        let mut particles = Vec::with_capacity(updates.len());
        for u in updates {
            steps += u.steps;
            accepted += u.accepted;
            traces.extend(u.traces);
            particles.push(u.particles);
        }
        state = refresh(graph, &state, particles, temp, config.workers);
        let total: f64 = state.disbelief.iter().flatten().sum();
        summaries.push(IterationSummary {
            iteration: n,
            temperature: temp,
            mean_disbelief: total / (state.count * state.node_count()) as f64,
            steps,
            accepted,
        });
    }
    RunOutput { state, traces, summaries }
}
