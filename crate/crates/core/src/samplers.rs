//! MCMC kernels that move one particle against its node's log disbelief.
//!
//! The disbelief of node `s` splits into factors `F_0 = psi_s / T` and
//! `F_j = M_{t_j -> s}`, one per neighbor in ascending id order. The slice
//! kernel draws one level per factor, `u_l = F_l(x) - ln U(0, 1]`, and then
//! samples uniformly from
//!
//! ```text
//! A = {psi_s <= T u_0}  ∩  ⋂_j ⋃_{x_t in P_t} {psi_{s,t}(., x_t) <= T (u_j - B_t(x_t) + M_{s->t}(x_t))}
//! ```
//!
//! along one randomly chosen coordinate. A candidate is kept only if every
//! factor stays under its level, which makes over-approximated sets safe.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::engine::{message, ParticleState};
use crate::error::{Error, Result};
use crate::interval::{intersect_union_into, sample_uniform_parts, Interval, IntervalSet};
use crate::mrf::{MrfGraph, Pairwise, Piece};

/// Absolute slack allowed when checking a slice candidate against its levels.
pub const GUARD_SLACK: f64 = 1e-9;

/// Candidate generator for Metropolis-Hastings. Scales are multiplied by
/// `sqrt(T)` at temperature `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Proposal {
    /// Independent Gaussian step on every axis. One sigma is broadcast to all axes.
    Gaussian { sigmas: Vec<f64> },
    /// For `[px, py, ox, oy]` labels: Gaussian step on the position and a
    /// Gaussian step in polar coordinates `(|o|, atan2(oy, ox))` on the orientation.
    PositionPolar { sigma_xy: f64, sigma_r: f64, sigma_phi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Sampler {
    Slice,
    MetropolisHastings { proposal: Proposal },
}

impl Sampler {
    /// Metropolis-Hastings with one Gaussian scale for every axis.
    pub fn mh(sigma: f64) -> Self {
        Sampler::MetropolisHastings { proposal: Proposal::Gaussian { sigmas: vec![sigma] } }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Sampler::Slice => "slice",
            Sampler::MetropolisHastings { .. } => "mh",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        match self {
            Sampler::Slice => Ok(()),
            Sampler::MetropolisHastings { proposal: Proposal::Gaussian { sigmas } } => {
                if sigmas.is_empty() || !sigmas.iter().all(|s| positive(*s)) {
                    return Err(Error::Config(format!("proposal scales must be positive, got {sigmas:?}")));
                }
                Ok(())
            }
            Sampler::MetropolisHastings { proposal: Proposal::PositionPolar { sigma_xy, sigma_r, sigma_phi } } => {
                if !(positive(*sigma_xy) && positive(*sigma_r) && positive(*sigma_phi)) {
                    return Err(Error::Config("polar proposal scales must be positive".into()));
                }
                Ok(())
            }
        }
    }

    pub(crate) fn check_graph(&self, graph: &MrfGraph) -> Result<()> {
        let Sampler::MetropolisHastings { proposal } = self else {
            return Ok(());
        };
        for s in 0..graph.node_count() {
            let d = graph.space(s).dims();
            match proposal {
                Proposal::Gaussian { sigmas } if sigmas.len() != 1 && sigmas.len() != d => {
                    return Err(Error::Config(format!(
                        "{} proposal scales for a {d}-D label at node {s}",
                        sigmas.len()
                    )));
                }
                Proposal::PositionPolar { .. } if d != 4 => {
                    return Err(Error::Config(format!("polar proposal needs 4-D labels, node {s} has {d}")));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Per-factor slice levels for one MCMC step.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceLevels(pub Vec<f64>);

impl SliceLevels {
    /// `u_l = F_l - ln(u)` with `u` uniform on `(0, 1]`.
    pub fn draw<R: Rng + ?Sized>(factors: &[f64], rng: &mut R) -> Self {
        let mut levels = Vec::with_capacity(factors.len());
        draw_levels_into(factors, rng, &mut levels);
        SliceLevels(levels)
    }

    /// Whether every factor value lies under its level (with [`GUARD_SLACK`]).
    pub fn admits(&self, factors: &[f64]) -> bool {
        admits(&self.0, factors)
    }
}

fn draw_levels_into<R: Rng + ?Sized>(factors: &[f64], rng: &mut R, out: &mut Vec<f64>) {
    out.clear();
    out.extend(factors.iter().map(|f| {
        let u = 1.0 - rng.random::<f64>();
        f - u.ln()
    }));
}

fn admits(levels: &[f64], factors: &[f64]) -> bool {
    levels.iter().zip(factors).all(|(u, f)| *f <= u + GUARD_SLACK)
}

/// Result of one MCMC step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub sample: Vec<f64>,
    pub accepted: bool,
    /// Measure of the slice the candidate was drawn from (zero for MH).
    pub slice_measure: f64,
    /// The candidate that was tested, whether or not it was kept.
    pub proposal: Vec<f64>,
}

/// Read-only view of one node against a fixed snapshot of the previous
/// iteration's particles and caches.
#[derive(Clone, Copy)]
pub struct NodeView<'a> {
    graph: &'a MrfGraph,
    state: &'a ParticleState,
    node: usize,
    temp: f64,
}

impl<'a> NodeView<'a> {
    pub fn new(graph: &'a MrfGraph, state: &'a ParticleState, node: usize, temp: f64) -> Self {
        Self { graph, state, node, temp }
    }

    pub fn node(&self) -> usize {
        self.node
    }

    pub fn temperature(&self) -> f64 {
        self.temp
    }

    pub fn factor_count(&self) -> usize {
        1 + self.graph.neighbors(self.node).len()
    }

    /// `[psi_s(x) / T, M_{t_1 -> s}(x), ...]`; sums to the log disbelief.
    pub fn factor_values(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.factor_count());
        self.factor_values_into(x, &mut out);
        out
    }

    fn factor_values_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.push(self.graph.unary(self.node).energy(x) / self.temp);
        for slot in 0..self.graph.neighbors(self.node).len() {
            out.push(message(self.graph, self.state, self.node, slot, x, self.temp));
        }
    }

    pub fn disbelief(&self, x: &[f64]) -> f64 {
        let mut total = self.graph.unary(self.node).energy(x) / self.temp;
        for slot in 0..self.graph.neighbors(self.node).len() {
            total += message(self.graph, self.state, self.node, slot, x, self.temp);
        }
        total
    }

    /// The slice along coordinate `axis` through `x` for the given levels,
    /// clipped to the axis box. Factors without bounds contribute the whole axis.
    pub fn slice_interval(&self, axis: usize, x: &[f64], levels: &SliceLevels) -> IntervalSet {
        let mut scratch = SliceScratch::default();
        self.slice_interval_with(axis, x, &levels.0, &mut scratch);
        IntervalSet::from_parts(scratch.current.iter().copied())
    }

    /// Leaves the canonical slice in `scratch.current`.
    fn slice_interval_with(&self, axis: usize, x: &[f64], levels: &[f64], scratch: &mut SliceScratch) {
        let s = self.node;
        let domain = self.graph.space(s).axis(axis);
        scratch.current.clear();
        match self.graph.unary(s).sublevel(axis, x, self.temp * levels[0], domain) {
            Ok(set) => scratch.current.extend_from_slice(set.parts()),
            Err(_) => scratch.current.push(domain),
        }

        for (slot, nb) in self.graph.neighbors(s).iter().enumerate() {
            if scratch.current.is_empty() {
                return;
            }
            let t = nb.node;
            let d_t = self.state.dims(t);
            let b_t = self.state.disbelief(t);
            let m_st = self.state.incoming(t, nb.reverse_slot);
            let level = levels[slot + 1];
            // Built-in pairwise families are nonnegative, so negative budgets give empty sets.
            let nonnegative = !matches!(self.graph.edges()[nb.edge].potential, Pairwise::Custom(_));
            scratch.raw.clear();
            let mut whole_axis = false;
            for k in 0..self.state.count() {
                let budget = self.temp * (level - b_t[k] + m_st[k]);
                if budget < 0.0 && nonnegative {
                    continue;
                }
                let x_t = &self.state.particle(t, k)[..d_t];
                match self.graph.pair_sublevel_piece(s, slot, axis, x, x_t, budget) {
                    Some(Piece::Empty) => continue,
                    Some(Piece::Part(part)) => {
                        scratch.raw.push(part);
                        continue;
                    }
                    Some(Piece::Whole) => {
                        whole_axis = true;
                        break;
                    }
                    None => {}
                }
                match self.graph.pair_sublevel(s, slot, axis, x, x_t, budget) {
                    Ok(set) if set.parts() == [domain] => {
                        whole_axis = true;
                        break;
                    }
                    Ok(set) => scratch.raw.extend_from_slice(set.parts()),
                    Err(_) => {
                        whole_axis = true;
                        break;
                    }
                }
            }
            if !whole_axis {
                intersect_union_into(&scratch.current, &mut scratch.raw, &mut scratch.next);
                std::mem::swap(&mut scratch.current, &mut scratch.next);
            }
        }
    }
}

#[derive(Debug, Default)]
struct SliceScratch {
    current: Vec<Interval>,
    next: Vec<Interval>,
    raw: Vec<Interval>,
}

/// Chain summary returned by [`run_chain`].
#[derive(Debug, Clone, PartialEq)]
pub struct ChainResult {
    pub last: Vec<f64>,
    pub steps: u64,
    pub accepted: u64,
}

struct SliceKernel {
    current: Vec<f64>,
    factors: Vec<f64>,
    levels: Vec<f64>,
    candidate: Vec<f64>,
    candidate_factors: Vec<f64>,
    scratch: SliceScratch,
}

impl SliceKernel {
    fn new(view: &NodeView<'_>, start: &[f64]) -> Self {
        let mut factors = Vec::with_capacity(view.factor_count());
        view.factor_values_into(start, &mut factors);
        Self {
            current: start.to_vec(),
            factors,
            levels: Vec::with_capacity(view.factor_count()),
            candidate: start.to_vec(),
            candidate_factors: Vec::with_capacity(view.factor_count()),
            scratch: SliceScratch::default(),
        }
    }

    /// Returns `(accepted, slice measure)`.
    fn step<R: Rng + ?Sized>(&mut self, view: &NodeView<'_>, rng: &mut R) -> (bool, f64) {
        let axis = rng.random_range(0..self.current.len());
        draw_levels_into(&self.factors, rng, &mut self.levels);
        view.slice_interval_with(axis, &self.current, &self.levels, &mut self.scratch);
        let parts = &self.scratch.current;
        let measure: f64 = parts.iter().map(Interval::len).sum();
        self.candidate.copy_from_slice(&self.current);
        let Ok(value) = sample_uniform_parts(parts, measure, rng) else {
            return (false, measure);
        };
        self.candidate[axis] = value;
        view.factor_values_into(&self.candidate, &mut self.candidate_factors);
        if admits(&self.levels, &self.candidate_factors) {
            std::mem::swap(&mut self.current, &mut self.candidate);
            std::mem::swap(&mut self.factors, &mut self.candidate_factors);
            (true, measure)
        } else {
            (false, measure)
        }
    }
}

struct MhKernel {
    current: Vec<f64>,
    energy: f64,
    candidate: Vec<f64>,
}

impl MhKernel {
    fn new(view: &NodeView<'_>, start: &[f64]) -> Self {
        Self { current: start.to_vec(), energy: view.disbelief(start), candidate: start.to_vec() }
    }

    fn step<R: Rng + ?Sized>(&mut self, view: &NodeView<'_>, proposal: &Proposal, rng: &mut R) -> bool {
        let scale = view.temp.sqrt();
        let mut log_correction = 0.0;
        self.candidate.copy_from_slice(&self.current);
        match proposal {
            Proposal::Gaussian { sigmas } => {
                for (k, v) in self.candidate.iter_mut().enumerate() {
                    let sigma = if sigmas.len() == 1 { sigmas[0] } else { sigmas[k] };
                    *v += sigma * scale * rng.sample::<f64, _>(StandardNormal);
                }
            }
            Proposal::PositionPolar { sigma_xy, sigma_r, sigma_phi } => {
                for v in &mut self.candidate[..2] {
                    *v += sigma_xy * scale * rng.sample::<f64, _>(StandardNormal);
                }
                let (ox, oy) = (self.current[2], self.current[3]);
                let r = ox.hypot(oy);
                let phi = oy.atan2(ox);
                let r_new = r + sigma_r * scale * rng.sample::<f64, _>(StandardNormal);
                let phi_new = phi + sigma_phi * scale * rng.sample::<f64, _>(StandardNormal);
                if !(r_new > 0.0 && r > 0.0) {
                    return false;
                }
                self.candidate[2] = r_new * phi_new.cos();
                self.candidate[3] = r_new * phi_new.sin();
                // Polar steps are symmetric in (r, phi); the Cartesian density carries 1/r.
                log_correction = (r_new / r).ln();
            }
        }
        if !view.graph.space(view.node).contains(&self.candidate) {
            return false;
        }
        let candidate_energy = view.disbelief(&self.candidate);
        let u = 1.0 - rng.random::<f64>();
        if candidate_energy < self.energy - u.ln() + log_correction {
            std::mem::swap(&mut self.current, &mut self.candidate);
            self.energy = candidate_energy;
            true
        } else {
            false
        }
    }
}

/// One slice-sampling step from `current`.
pub fn slice_step<R: Rng + ?Sized>(view: &NodeView<'_>, current: &[f64], rng: &mut R) -> StepOutcome {
    let mut kernel = SliceKernel::new(view, current);
    let (accepted, slice_measure) = kernel.step(view, rng);
    let proposal = if accepted { kernel.current.clone() } else { kernel.candidate.clone() };
    StepOutcome { sample: kernel.current, accepted, slice_measure, proposal }
}

/// One Metropolis-Hastings step from `current`.
pub fn mh_step<R: Rng + ?Sized>(
    view: &NodeView<'_>,
    current: &[f64],
    proposal: &Proposal,
    rng: &mut R,
) -> StepOutcome {
    let mut kernel = MhKernel::new(view, current);
    let accepted = kernel.step(view, proposal, rng);
    let tested = if accepted { kernel.current.clone() } else { kernel.candidate.clone() };
    StepOutcome { sample: kernel.current, accepted, slice_measure: 0.0, proposal: tested }
}

/// Runs `steps` MCMC steps from `start`, appending every post-step label to `trace`.
pub fn run_chain<R: Rng + ?Sized>(
    view: &NodeView<'_>,
    sampler: &Sampler,
    start: &[f64],
    steps: usize,
    rng: &mut R,
    mut trace: Option<&mut Vec<f64>>,
) -> ChainResult {
    let mut accepted = 0;
    let last = match sampler {
        Sampler::Slice => {
            let mut kernel = SliceKernel::new(view, start);
            for _ in 0..steps {
                accepted += u64::from(kernel.step(view, rng).0);
                if let Some(t) = trace.as_deref_mut() {
                    t.extend_from_slice(&kernel.current);
                }
            }
            kernel.current
        }
        Sampler::MetropolisHastings { proposal } => {
            let mut kernel = MhKernel::new(view, start);
            for _ in 0..steps {
                accepted += u64::from(kernel.step(view, proposal, rng));
                if let Some(t) = trace.as_deref_mut() {
                    t.extend_from_slice(&kernel.current);
                }
            }
            kernel.current
        }
    };
    ChainResult { last, steps: steps as u64, accepted }
}
