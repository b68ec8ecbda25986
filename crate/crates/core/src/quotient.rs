// SPDX-License-Identifier: Apache-2.0

//! On-the-fly quotient graph of the streamed clustering.
//!
//! While the first pass runs, every edge is charged to the pair of clusters
//! holding its endpoints. An edge is recorded when its later endpoint
//! streams, since only then are both assignments final. Intra-cluster edges
//! are recorded with doubled weight, so a supernode's self-loop carries
//! `2·e_C` and its degree equals the cluster volume.

use std::path::Path;

use rustc_hash::FxHashMap;

use crate::error::Result;
use crate::graph::{canonicalize, Graph};
use crate::graph_io::{write_metis, NodeRecord};
use crate::modularity::ClusteringState;
use crate::{ClusterId, Weight};

#[inline]
fn pack(a: ClusterId, b: ClusterId) -> u64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    (u64::from(lo) << 32) | u64::from(hi)
}

#[inline]
fn unpack(key: u64) -> (ClusterId, ClusterId) {
    ((key >> 32) as ClusterId, key as ClusterId)
}

/// Cluster pair → accumulated weight, keyed by the packed `(min, max)` pair.
#[derive(Debug, Clone, Default)]
pub struct QuotientEdgeAccumulator {
    edges: FxHashMap<u64, Weight>,
}

impl QuotientEdgeAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `record`'s edges to already-streamed neighbours (`u < v`).
    pub fn accumulate(&mut self, record: &NodeRecord, assignments: &[ClusterId]) {
        let cv = assignments[record.id as usize];
        for &(u, w) in &record.neighbors {
            if u >= record.id {
                // Neighbours are sorted; the rest stream later.
                break;
            }
            let cu = assignments[u as usize];
            let w = if cu == cv { 2 * w } else { w };
            *self.edges.entry(pack(cu, cv)).or_insert(0) += w;
        }
    }

    pub fn get(&self, a: ClusterId, b: ClusterId) -> Weight {
        self.edges.get(&pack(a, b)).copied().unwrap_or(0)
    }

    /// Number of distinct cluster pairs, self-pairs included.
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Builds the compact quotient. Every non-empty cluster of `state`
    /// becomes a supernode, isolated or not; supernodes are numbered in
    /// ascending cluster id order.
    pub fn finalize(self, state: &ClusteringState) -> QuotientGraph {
        let clusters: Vec<ClusterId> = state.clusters().collect();
        let mut dense = vec![ClusterId::MAX; state.n()];
        for (i, &c) in clusters.iter().enumerate() {
            dense[c as usize] = i as ClusterId;
        }
        let k = clusters.len();
        let mut loops = vec![0; k];
        let mut adj = Vec::with_capacity(2 * self.edges.len());
        for (key, w) in self.edges {
            let (a, b) = unpack(key);
            let (da, db) = (dense[a as usize], dense[b as usize]);
            if da == db {
                loops[da as usize] += w;
            } else {
                adj.push((da, db, w));
                adj.push((db, da, w));
            }
        }
        let node_weights = clusters
            .iter()
            .map(|&c| Weight::from(state.size(c)))
            .collect();
        let graph = Graph::from_parts(adj, loops, node_weights);
        debug_assert!(clusters
            .iter()
            .enumerate()
            .all(|(i, &c)| graph.degree(i as ClusterId) == state.volume(c)));
        QuotientGraph {
            graph,
            clusters,
            dense,
        }
    }
}

/// One supernode per cluster, with self-loops for intra-cluster weight.
#[derive(Debug, Clone)]
pub struct QuotientGraph {
    graph: Graph,
    /// Dense supernode id → original cluster id.
    clusters: Vec<ClusterId>,
    /// Original cluster id → dense supernode id (`MAX` for empty clusters).
    dense: Vec<ClusterId>,
}

impl QuotientGraph {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn cluster_id(&self, supernode: ClusterId) -> ClusterId {
        self.clusters[supernode as usize]
    }

    pub fn supernode_of(&self, cluster: ClusterId) -> Option<ClusterId> {
        self.dense
            .get(cluster as usize)
            .copied()
            .filter(|&d| d != ClusterId::MAX)
    }

    /// Modularity of a partition of the supernodes.
    pub fn modularity(&self, partition: &[ClusterId]) -> f64 {
        self.graph.modularity(partition)
    }

    /// Applies a partition of the supernodes to the input nodes. Each block
    /// keeps the original id of its lowest-numbered supernode, so ids stay
    /// below `n`.
    pub fn project(&self, partition: &[ClusterId], state: &mut ClusteringState) {
        assert_eq!(
            partition.len(),
            self.n(),
            "partition must cover every supernode"
        );
        let (blocks, k) = canonicalize(partition);
        let mut representative = vec![ClusterId::MAX; k];
        for (i, &b) in blocks.iter().enumerate() {
            let slot = &mut representative[b as usize];
            if *slot == ClusterId::MAX {
                *slot = self.clusters[i];
            }
        }
        state.relabel(|c| {
            let supernode = self.dense[c as usize];
            representative[blocks[supernode as usize] as usize]
        });
    }

    /// Debug dump in METIS format with edge weights and self-loops.
    pub fn write_metis(&self, path: impl AsRef<Path>) -> Result<()> {
        write_metis(path, &self.graph)
    }
}
