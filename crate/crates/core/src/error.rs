use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("sample {value} at index {index} lies outside [-1, 1]")]
    SampleOutOfRange { index: usize, value: f64 },

    #[error("empirical variance needs at least two samples, got {0}")]
    TooFewSamples(usize),

    #[error("query point {0:?} lies outside the unit cube")]
    OutsideDomain(Vec<f64>),

    #[error("query point has dimension {got}, labeler expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("node {node:?} is not a lattice node of cell {cell:?}")]
    NodeNotInCell { cell: Vec<usize>, node: Vec<usize> },

    #[error("no learned value for lattice node {0:?}")]
    MissingNode(Vec<usize>),

    #[error("grid needs {nodes} lattice nodes, limit is {limit}")]
    GridTooLarge { nodes: u128, limit: u64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("cannot fit scaling exponent: {0}")]
    Fit(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("report serialization failed: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
