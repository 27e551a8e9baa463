//! Experiment drivers built on the engine.

pub mod denoise;
pub mod tracking;
