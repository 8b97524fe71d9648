use thiserror::Error;

/// Errors raised by graph construction, entropy evaluation and the
/// abstraction pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("vertex index {index} out of range for a graph with {n} vertices")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("duplicate edge ({u}, {v})")]
    DuplicateEdge { u: usize, v: usize },

    #[error("non-finite weight on edge ({u}, {v})")]
    NonFiniteWeight { u: usize, v: usize },

    #[error("self-loop on vertex {v} is not allowed")]
    SelfLoop { v: usize },

    #[error("edge ({u}, {v}) has non-positive weight {w}")]
    NonPositiveWeight { u: usize, v: usize, w: f64 },

    #[error("graph has no vertices or zero volume")]
    EmptyGraph,

    #[error("operation requires a directed graph")]
    NotDirected,

    #[error("operation requires an undirected graph")]
    NotUndirected,

    #[error("the root node has no assigned entropy")]
    RootHasNoAssignedEntropy,

    #[error("node {0} does not exist in the tree")]
    UnknownNode(usize),

    #[error("exhaustive search limited to n <= {max_n} and K <= {max_k} (got n = {n}, K = {k})")]
    TooLarge {
        n: usize,
        k: usize,
        max_n: usize,
        max_k: usize,
    },

    #[error("row {row} has zero variance")]
    ZeroVariance { row: usize },

    #[error("similarity graph has already been reweighted")]
    AlreadyReweighted,

    #[error("similarity graph must be reweighted first")]
    NotReweighted,

    #[error("k = {k} outside 1..={max}")]
    KOutOfRange { k: usize, max: usize },

    #[error("node {0} is a leaf and cannot be stretched")]
    LeafNotStretchable(usize),

    #[error("layer {layer} has no children to restructure (tree height {height})")]
    InvalidLayer { layer: usize, height: usize },

    #[error("stationary system is singular")]
    SingularSystem,

    #[error("depth {depth} exceeds tree height {height}")]
    InvalidDepth { depth: usize, height: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("P has mass where Q is zero at ({row}, {col})")]
    SupportMismatch { row: usize, col: usize },

    #[error("{kind} id {id} is not covered by the abstraction inputs")]
    UnmappedId { kind: &'static str, id: usize },

    #[error("unknown abstract state {0}")]
    UnknownAbstractState(usize),

    #[error("empty log: no episodes, or an episode without steps")]
    EmptyLog,

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
