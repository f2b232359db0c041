use std::io;

use crate::graph::NodeType;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("no document survives filtering")]
    EmptyNetwork,

    #[error("node {node} ({node_type}) cannot join group {group} holding {group_type} nodes")]
    TypeMismatch {
        node: usize,
        node_type: NodeType,
        group: u32,
        group_type: NodeType,
    },

    #[error("node {0} has no group assignment")]
    UncoveredNode(usize),

    #[error("partitions cover different node sets ({0} vs {1} nodes)")]
    NodeSetMismatch(usize, usize),

    #[error("need at least two partitions, got {0}")]
    TooFewPartitions(usize),

    #[error("candidate edge {0} -> {1} is already present in the observed network")]
    CandidateAlreadyPresent(usize, usize),

    #[error("holdout removes no edges (or leaves none)")]
    EmptyHoldout,

    #[error("sample of {requested} documents exceeds corpus size {available}")]
    SampleTooLarge { requested: usize, available: usize },

    #[error("the text layer is required for a topic report")]
    MissingTextLayer,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed input at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
