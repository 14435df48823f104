use alloc::string::String;

/// Errors produced by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("edge ({0}, {1}) has an endpoint outside 0..{2}")]
    EdgeOutOfRange(usize, usize, usize),
    #[error("node {node} is outside 0..{num_nodes}")]
    NodeOutOfRange { node: usize, num_nodes: usize },
    #[error("shape mismatch in {op}: expected {expected:?}, found {found:?}")]
    Shape {
        op: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("{0}: batch is empty")]
    EmptyBatch(&'static str),
    #[error("{0}: distribution has zero total mass")]
    DegenerateDistribution(&'static str),
    #[error("layer-wise candidate pool is empty")]
    EmptyPool,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("label {label} is not below num_classes = {num_classes}")]
    LabelOutOfRange { label: usize, num_classes: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("attention over hops needs at least one propagated hop")]
    NoHops,
    #[error("plan depth {plan} does not match model depth {model}")]
    DepthMismatch { plan: usize, model: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
