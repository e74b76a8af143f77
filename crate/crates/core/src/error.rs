use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{location}: empty node id")]
    EmptyId { location: String },
    #[error("duplicate node id \"{id}\"")]
    DuplicateNode { id: String },
    #[error("{location}: unknown node \"{id}\"")]
    UnknownNode { id: String, location: String },
    #[error("{location}: unknown node kind \"{kind}\"")]
    UnknownKind { kind: String, location: String },
    #[error("self-loop on \"{id}\"")]
    SelfLoop { id: String },
    #[error("duplicate arc \"{from}\" -> \"{to}\"")]
    DuplicateArc { from: String, to: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ControlError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("control query has no targets")]
    NoTargets,
    #[error("target \"{0}\" listed more than once")]
    DuplicateTarget(String),
    #[error("\"{0}\" is not a decision node")]
    NotADecision(String),
    #[error("retry limit must be at least 1")]
    ZeroRetryLimit,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnrollError {
    #[error("pattern entry ({row}, {col}) outside a {rows}x{cols} matrix")]
    OutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("invalid unroll spec: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("diagram is cyclic")]
    Cyclic,
    #[error("rank decision is within tolerance noise (seeds {seeds:?})")]
    Indeterminate { seeds: Vec<u64> },
    #[error("\"{0}\" is both a decision and a target")]
    TargetIsDecision(String),
}
