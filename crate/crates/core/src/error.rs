// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed header: {0}")]
    Header(String),

    #[error("unsupported format code `{0}`")]
    UnsupportedFormat(String),

    #[error("node {node}: {msg}")]
    Parse { node: u64, msg: String },

    #[error("node {node}: neighbor {neighbor} out of range [1, {n}]")]
    NeighborOutOfRange { node: u64, neighbor: u64, n: u64 },

    #[error("node {0}: self-loop (enable sanitize to drop it)")]
    SelfLoop(u64),

    #[error("node {node}: parallel edge to {neighbor} (enable sanitize to merge)")]
    ParallelEdge { node: u64, neighbor: u64 },

    #[error("edge count mismatch: header declares {expected} edges, adjacency lists hold {found} entries")]
    EdgeCountMismatch { expected: u64, found: u64 },

    #[error("expected {expected} node lines, found {found}")]
    NodeCountMismatch { expected: u64, found: u64 },

    #[error("asymmetric adjacency between nodes {0} and {1}")]
    Asymmetric(u64, u64),

    #[error(
        "adjacency weights sum to the odd total {0}, so some edge weights differ between endpoints"
    )]
    OddWeightTotal(u64),

    #[error("node {id} out of range for a graph with {n} nodes")]
    NodeOutOfRange { id: u64, n: u64 },

    #[error("requested node ids are not in ascending order")]
    UnsortedIds,

    #[error("offset index is incomplete: the first pass stopped after {read} of {n} nodes")]
    IndexNotBuilt { read: u64, n: u64 },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// True for failures of the underlying file system rather than of the
    /// file contents.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }

    pub(crate) fn parse(node: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            node: node as u64,
            msg: msg.into(),
        }
    }
}
