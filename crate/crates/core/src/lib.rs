//! Max-product particle belief propagation for continuous-label pairwise MRFs.
//!
//! Particles are moved by MCMC against each node's tempered disbelief, either
//! with a slice sampler that solves potential sublevel sets in closed form or
//! with random-walk Metropolis-Hastings.

pub mod apps;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod interval;
pub mod io;
pub mod mrf;
pub mod samplers;

pub use engine::{run, AnnealingSchedule, EngineConfig, ParticleState, RunOutput, TraceSpec};
pub use error::{Error, Result};
pub use interval::{Interval, IntervalSet};
pub use mrf::{GraphBuilder, LabelSpace, MrfGraph, Pairwise, Unary};
pub use samplers::{Proposal, Sampler};
