// SPDX-License-Identifier: Apache-2.0

//! Disk-streaming modularity clustering.
//!
//! Nodes are read one at a time from a METIS file and assigned greedily to
//! the neighbouring cluster with the largest modularity gain. Two optional
//! refinements follow the first pass:
//!
//! * a quotient graph of the streamed clustering is built on the fly and
//!   optimised by a small memetic algorithm ([`memetic`]), whose best
//!   solution is projected back onto the input nodes;
//! * the file is re-streamed and nodes are moved between existing clusters
//!   until the per-round gain falls below a relative floor ([`restream`]).
//!
//! The four combinations of these refinements are exposed as [`Mode`]s and
//! driven by [`pipeline::run`].

pub mod error;
pub mod eval;
pub mod graph;
pub mod graph_io;
pub mod louvain;
pub mod memetic;
pub mod modularity;
pub mod pipeline;
pub mod quotient;
pub mod restream;

pub use error::{Error, Result};
pub use graph::Graph;
pub use graph_io::{GraphFile, GraphHeader, NodeRecord, NodeStream};
pub use modularity::ClusteringState;
pub use pipeline::{Mode, ModeConfig};
pub use quotient::{QuotientEdgeAccumulator, QuotientGraph};

/// Node index, 0-based.
pub type NodeId = u32;
/// Cluster label. During streaming a cluster is named after its founding node.
pub type ClusterId = u32;
/// Edge and volume weights. METIS weights are integral, so all volume
/// bookkeeping is exact.
pub type Weight = u64;
