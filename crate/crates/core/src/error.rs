use thiserror::Error;

/// Errors produced by the inference engine and its supporting modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("slice has zero measure")]
    EmptySlice,

    #[error("potential provides no sub-level bounds for axis {axis}")]
    NoBounds { axis: usize },

    #[error("label {label:?} lies outside the label box of node {node}")]
    Domain { node: usize, label: Vec<f64> },

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("chain too short: {len} samples after burn-in, need at least 4")]
    ChainTooShort { len: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
