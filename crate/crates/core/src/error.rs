use std::fmt;

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A single structural defect found while validating taxonomy records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// The same node id appears more than once.
    DuplicateId { id: String },
    /// A node id is empty.
    EmptyId { line: Option<usize> },
    /// More than one record has no parent.
    MultipleRoots { ids: Vec<String> },
    /// No record has an empty parent field.
    MissingRoot,
    /// A node names a parent id that does not exist.
    UnknownParent { id: String, parent: String },
    /// Following parent links from these nodes never reaches the root.
    ParentCycle { cycle: Vec<String> },
    /// A node lists itself as its own parent.
    SelfParent { id: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateId { id } => write!(f, "duplicate node id `{id}`"),
            Violation::EmptyId { line: Some(line) } => write!(f, "empty node id at line {line}"),
            Violation::EmptyId { line: None } => write!(f, "empty node id"),
            Violation::MultipleRoots { ids } => {
                write!(f, "multiple roots: {}", ids.join(", "))
            }
            Violation::MissingRoot => write!(f, "no root record (empty parent field) found"),
            Violation::UnknownParent { id, parent } => {
                write!(f, "node `{id}` references unknown parent `{parent}`")
            }
            Violation::ParentCycle { cycle } => {
                write!(f, "parent cycle: {}", cycle.join(" -> "))
            }
            Violation::SelfParent { id } => write!(f, "node `{id}` is its own parent"),
        }
    }
}

/// Errors produced by taxonomy construction, queries, measures, and file IO.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node id `{0}`")]
    UnknownNodeId(String),

    #[error("node reference does not belong to this taxonomy")]
    ForeignNodeRef,

    #[error("the root node has no parent")]
    RootHasNoParent,

    #[error("invalid taxonomy: {}", format_violations(.0))]
    InvalidTaxonomy(Vec<Violation>),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("cycle in subclass graph: {}", .cycle.join(" -> "))]
    GraphCycle { cycle: Vec<String> },

    #[error("node `{0}` is not reachable from the root")]
    Unreachable(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("undefined measure: {0}")]
    UndefinedMeasure(String),

    #[error("missing embedding for key `{0}`")]
    MissingEmbedding(String),

    #[error("missing pairwise scores for {} pair(s), e.g. {}", .missing.len(), format_pairs(.missing))]
    MissingScores { missing: Vec<(String, String)> },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("undefined tau-b: {0}")]
    UndefinedTau(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("duplicate sample_id `{0}` in predictions file")]
    DuplicateSampleId(String),

    #[error("{count} unresolvable gt_node id(s): {}", .ids.join(", "))]
    UnresolvableGtNodes { count: usize, ids: Vec<String> },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

fn format_pairs(pairs: &[(String, String)]) -> String {
    const SHOWN: usize = 10;
    let mut s = pairs
        .iter()
        .take(SHOWN)
        .map(|(a, b)| format!("({a}, {b})"))
        .collect::<Vec<_>>()
        .join(", ");
    if pairs.len() > SHOWN {
        s.push_str(", ...");
    }
    s
}
