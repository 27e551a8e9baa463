//! Truncated-quadratic image denoising on a 4-connected pixel grid.
//!
//! ```text
//! E(x) = sum_s theta1 (x_s - d_s)^2 + sum_{s~t} theta2 min(theta3, (x_s - x_t)^2)
//! ```

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::engine::{map_estimate, mean_estimate, run, stream_rng, EngineConfig, ParticleState, RunOutput};
use crate::error::{Error, Result};
use crate::mrf::{GraphBuilder, LabelSpace, MrfGraph, Pairwise, Unary};

/// Row-major grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::Shape(format!("{width}x{height} image needs {} pixels, got {}", width * height, pixels.len())));
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Shape(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Builds an image from one scalar label per pixel, clamping into `[0, 1]`.
    pub fn from_labels(width: usize, height: usize, labels: &[Vec<f64>]) -> Result<Self> {
        Self::new(width, height, labels.iter().map(|l| l[0].clamp(0.0, 1.0)).collect())
    }
}

/// Piecewise-constant test pattern: two overlapping rectangles and a disk on a dark background.
pub fn test_pattern(width: usize, height: usize) -> GrayImage {
    let (w, h) = (width as f64, height as f64);
    let mut pixels = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let (u, v) = ((x as f64 + 0.5) / w, (y as f64 + 0.5) / h);
            let mut value = 0.2;
            if (0.1..0.55).contains(&u) && (0.12..0.45).contains(&v) {
                value = 0.8;
            }
            if (0.35..0.9).contains(&u) && (0.3..0.6).contains(&v) {
                value = 0.5;
            }
            if (u - 0.62).powi(2) + (v - 0.75).powi(2) < 0.18f64.powi(2) {
                value = 0.95;
            }
            pixels.push(value);
        }
    }
    GrayImage { width, height, pixels }
}

/// Adds i.i.d. Gaussian noise of standard deviation `sigma` and clips to `[0, 1]`.
pub fn add_noise<R: Rng + ?Sized>(clean: &GrayImage, sigma: f64, rng: &mut R) -> Result<GrayImage> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!("noise sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(clean.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
    let pixels = clean.pixels.iter().map(|p| (p + normal.sample(rng)).clamp(0.0, 1.0)).collect();
    Ok(GrayImage { width: clean.width, height: clean.height, pixels })
}

/// Model weights `(theta1, theta2, theta3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DenoiseParams {
    pub data_weight: f64,
    pub smooth_weight: f64,
    pub smooth_cap: f64,
}

impl Default for DenoiseParams {
    fn default() -> Self {
        Self { data_weight: 0.756, smooth_weight: 1.170, smooth_cap: 0.0059 }
    }
}

impl DenoiseParams {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.data_weight) && ok(self.smooth_weight) && ok(self.smooth_cap) {
            Ok(())
        } else {
            Err(Error::Config(format!("denoising weights must be positive, got {self:?}")))
        }
    }
}

/// One node per pixel (id `y * width + x`), 4-connected, label box `[0, 1]`.
pub fn build_denoise_graph(observed: &GrayImage, params: &DenoiseParams) -> Result<MrfGraph> {
    params.validate()?;
    let (w, h) = (observed.width, observed.height);
    let space = LabelSpace::uniform(1, 0.0, 1.0)?;
    let mut g = GraphBuilder::new();
    for &d in &observed.pixels {
        g.add_node(space.clone(), Unary::Quadratic { target: vec![d], weight: params.data_weight })?;
    }
    let pair = Pairwise::TruncatedQuadratic { weight: params.smooth_weight, cap: params.smooth_cap };
    for y in 0..h {
        for x in 0..w {
            let s = y * w + x;
            if x + 1 < w {
                g.add_edge(s, s + 1, pair.clone())?;
            }
            if y + 1 < h {
                g.add_edge(s, s + w, pair.clone())?;
            }
        }
    }
    Ok(g.build())
}

/// `count` particles per pixel at the observed value plus uniform jitter in `[-jitter, jitter]`, clipped to `[0, 1]`.
pub fn initial_particles<R: Rng + ?Sized>(
    observed: &GrayImage,
    count: usize,
    jitter: f64,
    rng: &mut R,
) -> Vec<Vec<Vec<f64>>> {
    observed
        .pixels
        .iter()
        .map(|&d| {
            (0..count)
                .map(|_| {
                    let offset = if jitter > 0.0 { rng.random_range(-jitter..=jitter) } else { 0.0 };
                    vec![(d + offset).clamp(0.0, 1.0)]
                })
                .collect()
        })
        .collect()
}

/// Initialization jitter used by [`denoise`].
pub const INIT_JITTER: f64 = 0.02;

/// Stream key reserved for particle initialization.
const INIT_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone)]
pub struct Denoised {
    /// Per-pixel lowest-disbelief particle.
    pub map: GrayImage,
    /// Per-pixel belief-weighted particle mean.
    pub mean: GrayImage,
    pub run: RunOutput,
}

/// Runs PBP on the denoising model for `observed`.
pub fn denoise(observed: &GrayImage, params: &DenoiseParams, config: &EngineConfig) -> Result<Denoised> {
    let graph = build_denoise_graph(observed, params)?;
    let mut rng = stream_rng(config.seed, &[INIT_STREAM]);
    let init = ParticleState::new(&graph, initial_particles(observed, config.particles, INIT_JITTER, &mut rng))?;
    let out = run(&graph, &init, config)?;
    let (w, h) = (observed.width, observed.height);
    Ok(Denoised {
        map: GrayImage::from_labels(w, h, &map_estimate(&out.state))?,
        mean: GrayImage::from_labels(w, h, &mean_estimate(&out.state))?,
        run: out,
    })
}

/// Squared loss between two images of the same size.
pub fn image_loss(estimate: &GrayImage, truth: &GrayImage) -> Result<f64> {
    if (estimate.width, estimate.height) != (truth.width, truth.height) {
        return Err(Error::Shape("images differ in size".into()));
    }
    crate::diagnostics::squared_loss(&estimate.pixels, &truth.pixels)
}
