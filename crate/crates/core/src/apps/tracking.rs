//! Synthetic relational mesh tracking with 4-D `[px, py, ox, oy]` labels.
//!
//! Each feature carries a position and an orientation vector that acts as a
//! rotation-and-scale relative to the reference frame. Neighbors are tied by
//! the weak-perspective term, so a common similarity transform of the whole
//! mesh costs nothing, and the unary only sees positions.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::diagnostics::{quantiles, rmsd, Quantiles};
use crate::engine::{map_estimate, resample, run, stream_rng, EngineConfig, ParticleState};
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::mrf::{GraphBuilder, LabelSpace, MrfGraph, Pairwise, Unary};

/// Orientation components are confined to this symmetric range.
pub const ORIENTATION_BOUND: f64 = 10.0;

/// Reference mesh: positions, orientations and neighbor pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeLayout {
    pub positions: Vec<[f64; 2]>,
    pub orientations: Vec<[f64; 2]>,
    pub edges: Vec<(usize, usize)>,
}

impl NodeLayout {
    /// `rows x cols` lattice with 4-neighbor edges and unit orientation `(1, 0)`.
    pub fn grid(rows: usize, cols: usize, spacing: f64, origin: [f64; 2]) -> Self {
        let mut positions = Vec::with_capacity(rows * cols);
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                positions.push([origin[0] + c as f64 * spacing, origin[1] + r as f64 * spacing]);
                let s = r * cols + c;
                if c + 1 < cols {
                    edges.push((s, s + 1));
                }
                if r + 1 < rows {
                    edges.push((s, s + cols));
                }
            }
        }
        let orientations = vec![[1.0, 0.0]; positions.len()];
        Self { positions, orientations, edges }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn centroid(&self) -> [f64; 2] {
        let n = self.len() as f64;
        let (sx, sy) = self.positions.iter().fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
        [sx / n, sy / n]
    }

    /// Nonempty, consistent lengths, nonzero orientations, valid edges, connected.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(Error::Empty("layout nodes"));
        }
        if self.orientations.len() != n {
            return Err(Error::Shape(format!("{n} positions but {} orientations", self.orientations.len())));
        }
        if self.orientations.iter().any(|o| !(o[0].hypot(o[1]) > 0.0)) {
            return Err(Error::Config("reference orientations must be nonzero".into()));
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            if a >= n || b >= n || a == b {
                return Err(Error::Graph(format!("bad layout edge ({a}, {b})")));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(s) = stack.pop() {
            for &t in &adjacency[s] {
                if !std::mem::replace(&mut seen[t], true) {
                    stack.push(t);
                }
            }
        }
        if seen.iter().any(|v| !v) {
            return Err(Error::Graph("layout is not connected".into()));
        }
        Ok(())
    }
}

/// Per-frame similarity ramp about the layout centroid plus per-node jitter.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionParams {
    /// Translation added per frame, in pixels.
    pub translation: [f64; 2],
    /// Rotation added per frame, in radians.
    pub rotation: f64,
    /// Scale added per frame (scale at frame `f` is `1 + f * scale`).
    pub scale: f64,
    /// Standard deviation of independent per-node, per-frame position jitter.
    pub deformation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshScene {
    pub layout: NodeLayout,
    /// Position box is `[1, width] x [1, height]`.
    pub width: f64,
    pub height: f64,
    /// Ground-truth `[px, py, ox, oy]` per frame and node.
    pub truth: Vec<Vec<[f64; 4]>>,
    /// Noisy observed positions per frame and node.
    pub observations: Vec<Vec<[f64; 2]>>,
}

impl MeshScene {
    pub fn frame_count(&self) -> usize {
        self.truth.len()
    }

    /// Per-node label box: positions inside the image, orientations in `[-10, 10]^2`.
    pub fn label_space(&self) -> Result<LabelSpace> {
        LabelSpace::new(vec![
            Interval::new(1.0, self.width)?,
            Interval::new(1.0, self.height)?,
            Interval::new(-ORIENTATION_BOUND, ORIENTATION_BOUND)?,
            Interval::new(-ORIENTATION_BOUND, ORIENTATION_BOUND)?,
        ])
    }
}

/// Margin in pixels between the furthest scene point and the image border.
const FRAME_MARGIN: f64 = 16.0;

fn complex_mul(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0]]
}

fn complex_div(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let n = b[0] * b[0] + b[1] * b[1];
    [(a[0] * b[0] + a[1] * b[1]) / n, (a[1] * b[0] - a[0] * b[1]) / n]
}

pub fn generate_scene<R: Rng + ?Sized>(
    layout: &NodeLayout,
    frame_count: usize,
    motion: &MotionParams,
    obs_noise: f64,
    rng: &mut R,
) -> Result<MeshScene> {
    layout.validate()?;
    if frame_count == 0 {
        return Err(Error::Config("need at least one frame".into()));
    }
    let noise = |sigma: f64| Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()));
    let deform = noise(motion.deformation)?;
    let observe = noise(obs_noise)?;
    let center = layout.centroid();
    let mut truth = Vec::with_capacity(frame_count);
    let mut observations = Vec::with_capacity(frame_count);
    for f in 0..frame_count {
        let t = f as f64;
        let scale = 1.0 + t * motion.scale;
        let angle = t * motion.rotation;
        let transform = [scale * angle.cos(), scale * angle.sin()];
        let mut poses = Vec::with_capacity(layout.len());
        let mut seen = Vec::with_capacity(layout.len());
        for (p, o) in layout.positions.iter().zip(&layout.orientations) {
            let moved = complex_mul(transform, [p[0] - center[0], p[1] - center[1]]);
            let px = center[0] + moved[0] + t * motion.translation[0] + deform.sample(rng);
            let py = center[1] + moved[1] + t * motion.translation[1] + deform.sample(rng);
            let [ox, oy] = complex_mul(transform, *o);
            poses.push([px, py, ox, oy]);
            seen.push([px + observe.sample(rng), py + observe.sample(rng)]);
        }
        truth.push(poses);
        observations.push(seen);
    }
    let all = || truth.iter().flatten().map(|p| [p[0], p[1]]).chain(observations.iter().flatten().copied());
    let min = all().fold(f64::INFINITY, |m, p| m.min(p[0]).min(p[1]));
    if min < 1.0 {
        return Err(Error::Config(format!("scene leaves the image (coordinate {min})")));
    }
    if truth.iter().flatten().any(|p| p[2].abs() > ORIENTATION_BOUND || p[3].abs() > ORIENTATION_BOUND) {
        return Err(Error::Config("orientation leaves its box".into()));
    }
    let width = all().fold(0.0f64, |m, p| m.max(p[0])).ceil() + FRAME_MARGIN;
    let height = all().fold(0.0f64, |m, p| m.max(p[1])).ceil() + FRAME_MARGIN;
    Ok(MeshScene { layout: layout.clone(), width, height, truth, observations })
}

/// How the position observation enters each node's unary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observation {
    /// Each node is attracted to its own observation.
    #[default]
    PerNode,
    /// Every node is attracted to the nearest of all observations, so unaries are identical.
    Ambiguous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackParams {
    /// Weight of the relational term.
    pub alpha: f64,
    #[serde(default = "unit")]
    pub unary_weight: f64,
    #[serde(default)]
    pub observation: Observation,
}

fn unit() -> f64 {
    1.0
}

impl TrackParams {
    pub fn new(alpha: f64, observation: Observation) -> Self {
        Self { alpha, unary_weight: 1.0, observation }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.unary_weight.is_finite() && self.unary_weight > 0.0) {
            return Err(Error::Config(format!("unary weight must be positive, got {}", self.unary_weight)));
        }
        Ok(())
    }
}

pub fn build_track_graph(scene: &MeshScene, frame: usize, params: &TrackParams) -> Result<MrfGraph> {
    params.validate()?;
    let observed = scene
        .observations
        .get(frame)
        .ok_or_else(|| Error::Config(format!("frame {frame} out of range")))?;
    let space = scene.label_space()?;
    let layout = &scene.layout;
    let mut g = GraphBuilder::new();
    for z in observed {
        let unary = match params.observation {
            Observation::PerNode => Unary::Quadratic { target: z.to_vec(), weight: params.unary_weight },
            Observation::Ambiguous => Unary::NearestWell {
                wells: observed.iter().map(|w| w.to_vec()).collect(),
                weight: params.unary_weight,
            },
        };
        g.add_node(space.clone(), unary)?;
    }
    for &(s, t) in &layout.edges {
        let (a, b) = (s.min(t), s.max(t));
        let (pa, pb) = (layout.positions[a], layout.positions[b]);
        let offset = complex_div([pb[0] - pa[0], pb[1] - pa[1]], layout.orientations[a]);
        g.add_edge(a, b, Pairwise::WeakPerspective { offset, weight: params.alpha })?;
    }
    Ok(g.build())
}

/// Stream key reserved for per-frame seeds.
const FRAME_STREAM: u64 = u64::MAX - 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackOutput {
    /// Lowest-disbelief label per frame and node.
    pub estimates: Vec<Vec<[f64; 4]>>,
    /// Euclidean position error per frame and node.
    pub errors: Vec<Vec<f64>>,
    pub frame_rmsd: Vec<f64>,
    /// Over all frames and nodes.
    pub rmsd: f64,
    pub quantiles: Quantiles,
    pub steps: u64,
    pub accepted: u64,
}

/// Tracks the mesh frame by frame.
///
/// Particles start at the reference pose; between frames they are resampled
/// from the previous frame's beliefs.
pub fn track(scene: &MeshScene, params: &TrackParams, config: &EngineConfig) -> Result<TrackOutput> {
    params.validate()?;
    config.validate()?;
    let layout = &scene.layout;
    let reference: Vec<Vec<Vec<f64>>> = layout
        .positions
        .iter()
        .zip(&layout.orientations)
        .map(|(p, o)| vec![vec![p[0], p[1], o[0], o[1]]; config.particles])
        .collect();

    let mut estimates = Vec::with_capacity(scene.frame_count());
    let mut errors = Vec::with_capacity(scene.frame_count());
    let (mut steps, mut accepted) = (0, 0);
    let mut previous: Option<(MrfGraph, ParticleState)> = None;
    for f in 0..scene.frame_count() {
        let graph = build_track_graph(scene, f, params)?;
        let mut frame_rng = stream_rng(config.seed, &[FRAME_STREAM, f as u64]);
        let init = match &previous {
            None => ParticleState::new(&graph, reference.clone())?,
            Some((prev_graph, prev_state)) => resample(prev_graph, prev_state, &mut frame_rng),
        };
        let frame_config = config.clone().with_seed(frame_rng.random());
        let out = run(&graph, &init, &frame_config)?;
        steps += out.total_steps();
        accepted += out.total_accepted();

        let labels = map_estimate(&out.state);
        let frame_estimates: Vec<[f64; 4]> = labels.iter().map(|l| [l[0], l[1], l[2], l[3]]).collect();
        let frame_errors: Vec<f64> = frame_estimates
            .iter()
            .zip(&scene.truth[f])
            .map(|(e, t)| (e[0] - t[0]).hypot(e[1] - t[1]))
            .collect();
        estimates.push(frame_estimates);
        errors.push(frame_errors);
        previous = Some((graph, out.state));
    }
    let frame_rmsd = errors.iter().map(|e| rmsd(e)).collect::<Result<Vec<_>>>()?;
    let all: Vec<f64> = errors.iter().flatten().copied().collect();
    Ok(TrackOutput { estimates, errors, frame_rmsd, rmsd: rmsd(&all)?, quantiles: quantiles(&all)?, steps, accepted })
}
