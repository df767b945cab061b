use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid degree {degree} for {num_nodes} nodes: {reason}")]
    InvalidDegree {
        num_nodes: usize,
        degree: usize,
        reason: &'static str,
    },

    #[error("failed to generate a simple connected {degree}-regular graph on {num_nodes} nodes after {attempts} attempts")]
    GenerationFailed {
        num_nodes: usize,
        degree: usize,
        attempts: usize,
    },

    #[error("size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("graph with {num_nodes} nodes exceeds the exhaustive search cap of {cap}")]
    TooLarge { num_nodes: usize, cap: usize },

    #[error("invalid blue count {blue_count} for {num_nodes} nodes (allowed 1..={max})")]
    InvalidBlueCount {
        blue_count: usize,
        num_nodes: usize,
        max: usize,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate edge ({u}, {v})")]
    DuplicateEdge { u: usize, v: usize },

    #[error("self-loop on node {node}")]
    SelfLoop { node: usize },

    #[error("node index {index} out of range for {num_nodes} nodes")]
    NodeOutOfRange { index: usize, num_nodes: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("histogram has {len} entries but the graph needs {needed}")]
    HistogramTooShort { len: usize, needed: usize },

    #[error("degenerate denominator in {0}")]
    DegenerateDenominator(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Io(err.to_string())
    }
}
