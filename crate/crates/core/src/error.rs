use thiserror::Error;

use crate::graph::VertexId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("edge ({from}, {to}) has non-positive weight {weight}")]
    NonPositiveWeight { from: u64, to: u64, weight: f64 },
    #[error("duplicate edge ({from}, {to})")]
    DuplicateEdge { from: u64, to: u64 },
    #[error("vertex id must be at least 1")]
    InvalidVertex,
    #[error("graph has no edges")]
    EmptyGraph,
    #[error("vertex {0} is not in the graph")]
    VertexNotInGraph(VertexId),
    #[error("path step ({from}, {to}) is not an edge of the graph")]
    PathNotInGraph { from: VertexId, to: VertexId },
    #[error("cannot generate a subgraph from an empty path family")]
    EmptyFamily,
    #[error("graph is not connected")]
    NotConnected,

    #[error("enumeration cap of {cap} exceeded")]
    CapExceeded { cap: usize },
    #[error("series has no positive coefficient")]
    AllZeroCoefficients,
    #[error("series is a truncation, not a polynomial")]
    TruncatedSeries,
    #[error("root bracket invalid: {0}")]
    BracketFailed(String),
    #[error("classification inconclusive: {0}")]
    Inconclusive(String),

    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),
    #[error("calibration failed: {0}")]
    CalibrationFailed(String),
    #[error("z = {z} lies beyond the radius of convergence {radius}")]
    BeyondRadius { z: f64, radius: f64 },

    #[error("power iteration did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("family is not unstable positive (classified {0})")]
    NotUplg(String),
    #[error("family does not satisfy the bounded jumps condition")]
    NoBoundedJumps,
    #[error("G_(n,m) requires m > n (got n = {n}, m = {m})")]
    InvalidSubgraphSpec { n: usize, m: usize },
    #[error("sequence is not nested at position {0}")]
    NotNested(usize),
    #[error("report has {got} records, at least {need} are required")]
    TooFewRecords { got: usize, need: usize },
    #[error(
        "irregular search exhausted at step {k}: n_k = {n}, best m = {best_m} with derivative {best_dphi}"
    )]
    SearchExhausted {
        k: usize,
        n: usize,
        best_m: usize,
        best_dphi: f64,
    },

    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
