use thiserror::Error;

use crate::tree::NodePath;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    Params(String),

    #[error("node {node} is a leaf in a depth-{depth} tree and has no children")]
    LeafHasNoChildren { node: NodePath, depth: usize },

    #[error("node {node} is not a node of a depth-{depth} tree")]
    InvalidNode { node: NodePath, depth: usize },

    #[error("transfer {index}: amount must be positive, got {amount}")]
    NonPositiveTransfer { index: usize, amount: String },

    #[error("transfer {index}: insufficient mass at {node} (has {available}, needs {needed})")]
    InsufficientMass {
        index: usize,
        node: NodePath,
        available: String,
        needed: String,
    },

    #[error("algorithm {algorithm} violated the serve contract at request {request}: {reason}")]
    ContractViolation {
        algorithm: String,
        request: NodePath,
        reason: String,
    },

    #[error("unknown algorithm {0:?} (expected greedy, proportional, dc-tree or hoarder)")]
    UnknownAlgorithm(String),

    #[error("brute-force state space {states} exceeds budget {budget}")]
    OracleBudget { states: u128, budget: u128 },

    #[error("malformed trace: {0}")]
    Trace(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
