//! Run configuration: one JSON file with a section per command. Every field
//! has a default, so `{}` is a valid file.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use spbp::apps::denoise::DenoiseParams;
use spbp::apps::tracking::{MotionParams, NodeLayout, Observation, TrackParams};
use spbp::engine::AnnealingSchedule;
use spbp::{EngineConfig, Proposal, Sampler};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub denoise: DenoiseSection,
    pub track: TrackSection,
    pub mh_sweep: SweepSection,
    pub diagnose: DiagnoseSection,
}

/// PBP settings shared by the experiment sections.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSection {
    pub iterations: usize,
    pub mcmc_steps: usize,
    pub particles: usize,
    /// `[t0, tn]` geometric schedule over the iterations.
    #[serde(default)]
    pub annealing: Option<[f64; 2]>,
    /// Iterations whose MCMC chains are written to a trace CSV.
    #[serde(default)]
    pub trace_iterations: Vec<usize>,
    /// Restrict traces to these nodes (all when absent).
    #[serde(default)]
    pub trace_nodes: Option<Vec<usize>>,
}

impl EngineSection {
    pub fn engine(&self, sampler: Sampler, seed: u64, workers: usize) -> EngineConfig {
        let mut config = EngineConfig::new(self.iterations, self.mcmc_steps, self.particles, sampler)
            .with_seed(seed)
            .with_workers(workers);
        if let Some([t0, tn]) = self.annealing {
            config = config.with_annealing(t0, tn);
        }
        if !self.trace_iterations.is_empty() {
            config = config.with_trace(spbp::TraceSpec {
                iterations: self.trace_iterations.clone(),
                nodes: self.trace_nodes.clone(),
            });
        }
        config
    }

    fn validate(&self, what: &str) -> Result<()> {
        ensure!(self.particles >= 1, "{what}: need at least one particle");
        if let Some([t0, tn]) = self.annealing {
            AnnealingSchedule::new(t0, tn, self.iterations.max(1)).with_context(|| format!("{what}: annealing"))?;
        }
        if let Some(n) = self.trace_iterations.iter().find(|n| **n == 0 || **n > self.iterations) {
            bail!("{what}: trace iteration {n} outside 1..={}", self.iterations);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiseSection {
    /// Clean PGM; a generated test pattern is used when absent.
    pub image: Option<PathBuf>,
    pub width: usize,
    pub height: usize,
    pub instances: usize,
    pub noise: f64,
    pub model: DenoiseParams,
    pub engine: EngineSection,
    pub samplers: Vec<Sampler>,
}

impl Default for DenoiseSection {
    fn default() -> Self {
        Self {
            image: None,
            width: 64,
            height: 64,
            instances: 10,
            noise: 0.05,
            model: DenoiseParams::default(),
            engine: EngineSection {
                iterations: 100,
                mcmc_steps: 20,
                particles: 5,
                annealing: Some([1.0, 1e-4]),
                trace_iterations: Vec::new(),
                trace_nodes: None,
            },
            samplers: vec![Sampler::Slice, Sampler::mh(0.7)],
        }
    }
}

impl DenoiseSection {
    /// Full-size experiment: 10 instances, N = 100, M = 500, p = 5, annealing 1 to 1e-4.
    pub fn full_preset() -> Self {
        let mut section = Self::default();
        section.engine.mcmc_steps = 500;
        section
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.instances >= 1, "denoise: need at least one instance");
        ensure!(self.noise >= 0.0 && self.noise.is_finite(), "denoise: noise must be >= 0");
        if self.image.is_none() {
            ensure!(self.width >= 1 && self.height >= 1, "denoise: empty image size");
        }
        self.model.validate()?;
        self.engine.validate("denoise")?;
        ensure!(!self.samplers.is_empty(), "denoise: no samplers configured");
        for s in &self.samplers {
            s.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackSection {
    pub rows: usize,
    pub cols: usize,
    pub spacing: f64,
    pub origin: [f64; 2],
    pub frames: usize,
    pub motion: MotionParams,
    pub obs_noise: f64,
    pub model: TrackParams,
    pub engine: EngineSection,
    /// One summary cell per `(sampler, M)`; overrides `engine.mcmc_steps`.
    pub mcmc_steps: Vec<usize>,
    pub samplers: Vec<Sampler>,
}

impl Default for TrackSection {
    fn default() -> Self {
        Self {
            rows: 5,
            cols: 5,
            spacing: 12.0,
            origin: [40.0, 40.0],
            frames: 10,
            motion: MotionParams { translation: [3.0, 1.5], rotation: 0.02, scale: 0.005, deformation: 0.3 },
            obs_noise: 1.0,
            model: TrackParams::new(20.0, Observation::Ambiguous),
            engine: EngineSection {
                iterations: 20,
                mcmc_steps: 3,
                particles: 10,
                annealing: None,
                trace_iterations: Vec::new(),
                trace_nodes: None,
            },
            mcmc_steps: vec![2, 3, 4, 5],
            samplers: vec![
                Sampler::Slice,
                Sampler::MetropolisHastings {
                    proposal: Proposal::PositionPolar { sigma_xy: 1.0, sigma_r: 0.05, sigma_phi: 0.05 },
                },
            ],
        }
    }
}

impl TrackSection {
    pub fn layout(&self) -> NodeLayout {
        NodeLayout::grid(self.rows, self.cols, self.spacing, self.origin)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.rows >= 1 && self.cols >= 1, "track: empty layout");
        ensure!(self.spacing > 0.0, "track: spacing must be positive");
        ensure!(self.frames >= 1, "track: need at least one frame");
        ensure!(self.obs_noise >= 0.0 && self.obs_noise.is_finite(), "track: obs_noise must be >= 0");
        ensure!(self.motion.deformation >= 0.0, "track: deformation must be >= 0");
        self.model.validate()?;
        self.engine.validate("track")?;
        ensure!(!self.samplers.is_empty(), "track: no samplers configured");
        for s in &self.samplers {
            s.validate()?;
        }
        Ok(())
    }

    /// `mcmc_steps` list, or the engine's single value when the list is empty.
    pub fn step_counts(&self) -> Vec<usize> {
        if self.mcmc_steps.is_empty() {
            vec![self.engine.mcmc_steps]
        } else {
            self.mcmc_steps.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepTarget {
    Denoise,
    Track,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    /// Vary one polar parameter at a time around the base values.
    Individual,
    /// Every combination of the three lists.
    Grid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub target: SweepTarget,
    /// Gaussian scales for the denoising sweep.
    pub sigmas: Vec<f64>,
    pub sigma_xy: Vec<f64>,
    pub sigma_r: Vec<f64>,
    pub sigma_phi: Vec<f64>,
    /// Values held fixed in `individual` mode: `[sigma_xy, sigma_r, sigma_phi]`.
    pub base: [f64; 3],
    pub mode: SweepMode,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            target: SweepTarget::Denoise,
            sigmas: vec![0.1, 0.3, 0.5, 0.7, 1.0, 1.5, 2.0],
            sigma_xy: vec![0.1, 0.5, 1.0, 2.0, 5.0],
            sigma_r: vec![0.01, 0.05, 0.1, 0.5],
            sigma_phi: vec![0.01, 0.05, 0.1, 0.5],
            base: [1.0, 0.05, 0.05],
            mode: SweepMode::Individual,
        }
    }
}

impl SweepSection {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, values: &[f64]| -> Result<()> {
            ensure!(!values.is_empty(), "mh-sweep: empty {name} grid");
            ensure!(values.iter().all(|v| v.is_finite() && *v > 0.0), "mh-sweep: {name} values must be positive");
            Ok(())
        };
        match self.target {
            SweepTarget::Denoise => positive("sigmas", &self.sigmas),
            SweepTarget::Track => {
                positive("sigma_xy", &self.sigma_xy)?;
                positive("sigma_r", &self.sigma_r)?;
                positive("sigma_phi", &self.sigma_phi)?;
                positive("base", &self.base)
            }
        }
    }

    /// `(sigma_xy, sigma_r, sigma_phi)` points to evaluate for the tracking sweep.
    pub fn polar_points(&self) -> Vec<[f64; 3]> {
        match self.mode {
            SweepMode::Grid => {
                let mut points = Vec::new();
                for &xy in &self.sigma_xy {
                    for &r in &self.sigma_r {
                        for &phi in &self.sigma_phi {
                            points.push([xy, r, phi]);
                        }
                    }
                }
                points
            }
            SweepMode::Individual => {
                let [bxy, br, bphi] = self.base;
                let mut points: Vec<[f64; 3]> = self.sigma_xy.iter().map(|&v| [v, br, bphi]).collect();
                points.extend(self.sigma_r.iter().map(|&v| [bxy, v, bphi]));
                points.extend(self.sigma_phi.iter().map(|&v| [bxy, br, v]));
                points
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseSection {
    pub traces: Vec<PathBuf>,
    pub max_lag: usize,
}

impl Default for DiagnoseSection {
    fn default() -> Self {
        Self { traces: Vec::new(), max_lag: 20 }
    }
}

pub fn load(path: Option<&Path>) -> Result<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}
