use alloc::string::String;
use alloc::vec::Vec;

use crate::mesh::NodeAddr;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("channel {channel} voltage {volts} V outside ±25 V")]
    VoltageOutOfRange { channel: usize, volts: f64 },

    #[error("no such channel: {0}")]
    InvalidChannel(usize),

    #[error("no such node: {0}")]
    UnknownNode(NodeAddr),

    #[error("port {0} outside 0..{1}")]
    PortOutOfRange(usize, usize),

    #[error("pair ({0}, {1}) is not a valid link")]
    InvalidPair(usize, usize),

    #[error("matching cannot be routed: {0}")]
    Unroutable(String),

    #[error("node {0} is not a single-MZI crossing")]
    NotACrossing(NodeAddr),

    #[error("no three-column span available around {0}")]
    SpanUnavailable(NodeAddr),

    #[error("node {target} unreachable from input {input}")]
    UnreachableTarget { input: usize, target: NodeAddr },

    #[error("isolation path uses uncalibrated node {0}")]
    PathNotCalibrated(NodeAddr),

    #[error("insufficient monitor contrast at {node}: {contrast_db:.2} dB")]
    InsufficientContrast { node: NodeAddr, contrast_db: f64 },

    #[error("ratio difference has no sign change at {0}")]
    NoSignChange(NodeAddr),

    #[error("uncalibrated nodes: {0:?}")]
    Uncalibrated(Vec<NodeAddr>),

    #[error("contrast {0} outside [0, 1]")]
    ContrastOutOfRange(f64),

    #[error("herald on detector {0} has zero probability")]
    ZeroHeraldProbability(usize),

    #[error("missing phase sweep for output pair ({0}, {1})")]
    MissingSweep(usize, usize),

    #[error("graph: {0}")]
    Graph(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
