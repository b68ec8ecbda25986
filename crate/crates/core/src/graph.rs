// SPDX-License-Identifier: Apache-2.0

//! In-memory weighted graphs with self-loops.
//!
//! Used for quotient graphs and for the generators in [`crate::eval`]. A
//! node's self-loop weight `ℓ` is stored as twice the intra-cluster weight it
//! stands for: it counts once towards the node's degree and `ℓ/2` towards the
//! intra-cluster weight of whichever cluster holds the node. Under that
//! convention contracting a clustering preserves modularity exactly.

use rustc_hash::FxHashMap;

use crate::graph_io::NodeRecord;
use crate::{ClusterId, NodeId, Weight};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<NodeId>,
    weights: Vec<Weight>,
    self_loops: Vec<Weight>,
    node_weights: Vec<Weight>,
    degrees: Vec<Weight>,
    total_degree: Weight,
}

impl Graph {
    /// Builds an undirected graph. Parallel edges are merged by summing
    /// weights; an edge `(v, v, w)` adds `2w` to `v`'s self-loop.
    pub fn from_edges(n: usize, edges: &[(NodeId, NodeId, Weight)]) -> Self {
        let mut loops = vec![0; n];
        let mut adj: Vec<(NodeId, NodeId, Weight)> = Vec::with_capacity(2 * edges.len());
        for &(u, v, w) in edges {
            assert!(
                (u as usize) < n && (v as usize) < n,
                "edge ({u}, {v}) out of range"
            );
            if u == v {
                loops[u as usize] += 2 * w;
            } else {
                adj.push((u, v, w));
                adj.push((v, u, w));
            }
        }
        Self::from_directed(n, adj, loops, vec![1; n])
    }

    /// `adj` must list every undirected edge in both directions.
    fn from_directed(
        n: usize,
        mut adj: Vec<(NodeId, NodeId, Weight)>,
        self_loops: Vec<Weight>,
        node_weights: Vec<Weight>,
    ) -> Self {
        adj.sort_unstable_by_key(|&(u, v, _)| (u, v));
        let mut offsets = vec![0usize; n + 1];
        let mut targets = Vec::with_capacity(adj.len());
        let mut weights = Vec::with_capacity(adj.len());
        let mut last: Option<(NodeId, NodeId)> = None;
        for (u, v, w) in adj {
            if last == Some((u, v)) {
                *weights.last_mut().unwrap() += w;
                continue;
            }
            last = Some((u, v));
            targets.push(v);
            weights.push(w);
            offsets[u as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut g = Graph {
            offsets,
            targets,
            weights,
            self_loops,
            node_weights,
            degrees: Vec::new(),
            total_degree: 0,
        };
        g.degrees = (0..n as NodeId)
            .map(|v| g.neighbors(v).map(|(_, w)| w).sum::<Weight>() + g.self_loops[v as usize])
            .collect();
        g.total_degree = g.degrees.iter().sum();
        g
    }

    pub(crate) fn from_parts(
        adj: Vec<(NodeId, NodeId, Weight)>,
        self_loops: Vec<Weight>,
        node_weights: Vec<Weight>,
    ) -> Self {
        let n = self_loops.len();
        debug_assert_eq!(node_weights.len(), n);
        Self::from_directed(n, adj, self_loops, node_weights)
    }

    pub fn n(&self) -> usize {
        self.self_loops.len()
    }

    /// Number of undirected edges between distinct nodes.
    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn neighbors(&self, v: NodeId) -> impl Iterator<Item = (NodeId, Weight)> + '_ {
        let range = self.offsets[v as usize]..self.offsets[v as usize + 1];
        self.targets[range.clone()]
            .iter()
            .copied()
            .zip(self.weights[range].iter().copied())
    }

    pub fn self_loop(&self, v: NodeId) -> Weight {
        self.self_loops[v as usize]
    }

    pub fn node_weight(&self, v: NodeId) -> Weight {
        self.node_weights[v as usize]
    }

    pub fn degree(&self, v: NodeId) -> Weight {
        self.degrees[v as usize]
    }

    pub fn degrees(&self) -> &[Weight] {
        &self.degrees
    }

    /// Twice the total edge weight, `2m`.
    pub fn total_degree(&self) -> Weight {
        self.total_degree
    }

    /// Total edge weight `m`, self-loops counted as `ℓ/2`.
    pub fn total_weight(&self) -> Weight {
        self.total_degree / 2
    }

    /// Undirected edges `(u, v, w)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, Weight)> + '_ {
        (0..self.n() as NodeId).flat_map(move |u| {
            self.neighbors(u)
                .filter(move |&(v, _)| u < v)
                .map(move |(v, w)| (u, v, w))
        })
    }

    /// Node records in id order, as a stream reader would produce them.
    /// Self-loops are not representable in a record and are omitted.
    pub fn records(&self) -> impl Iterator<Item = NodeRecord> + '_ {
        (0..self.n() as NodeId).map(move |v| {
            let neighbors: Vec<_> = self.neighbors(v).collect();
            NodeRecord {
                id: v,
                weighted_degree: neighbors.iter().map(|&(_, w)| w).sum(),
                neighbors,
            }
        })
    }

    /// Modularity of `partition`, labels arbitrary.
    pub fn modularity(&self, partition: &[ClusterId]) -> f64 {
        assert_eq!(partition.len(), self.n());
        let (labels, k) = canonicalize(partition);
        let mut intra2 = vec![0u128; k];
        let mut volume = vec![0u128; k];
        for v in 0..self.n() as NodeId {
            let c = labels[v as usize] as usize;
            volume[c] += self.degree(v) as u128;
            intra2[c] += self.self_loop(v) as u128;
            for (u, w) in self.neighbors(v) {
                if labels[u as usize] as usize == c {
                    intra2[c] += w as u128;
                }
            }
        }
        exact_modularity(
            intra2.iter().sum(),
            volume.iter().map(|&x| x * x).sum(),
            self.total_degree as u128,
        )
    }

    /// Contracts `partition` into one node per cluster. Returns the coarse
    /// graph and the dense coarse id of every node.
    pub fn contract(&self, partition: &[ClusterId]) -> (Graph, Vec<ClusterId>) {
        assert_eq!(partition.len(), self.n());
        let (labels, k) = canonicalize(partition);
        let mut loops = vec![0; k];
        let mut node_weights = vec![0; k];
        let mut between: FxHashMap<(ClusterId, ClusterId), Weight> = FxHashMap::default();
        for v in 0..self.n() as NodeId {
            let cv = labels[v as usize];
            loops[cv as usize] += self.self_loop(v);
            node_weights[cv as usize] += self.node_weight(v);
            for (u, w) in self.neighbors(v) {
                let cu = labels[u as usize];
                if cu == cv {
                    // Each intra edge is seen from both ends: 2w in total.
                    loops[cv as usize] += w;
                } else {
                    *between.entry((cv, cu)).or_insert(0) += w;
                }
            }
        }
        let adj = between.into_iter().map(|((a, b), w)| (a, b, w)).collect();
        (Graph::from_parts(adj, loops, node_weights), labels)
    }
}

/// Relabels `partition` densely in order of first occurrence.
pub fn canonicalize(partition: &[ClusterId]) -> (Vec<ClusterId>, usize) {
    if partition.iter().all(|&c| (c as usize) < partition.len()) {
        let mut map = vec![ClusterId::MAX; partition.len()];
        let mut k = 0;
        let labels = partition
            .iter()
            .map(|&c| {
                let slot = &mut map[c as usize];
                if *slot == ClusterId::MAX {
                    *slot = k;
                    k += 1;
                }
                *slot
            })
            .collect();
        return (labels, k as usize);
    }
    let mut map: FxHashMap<ClusterId, ClusterId> = FxHashMap::default();
    let labels = partition
        .iter()
        .map(|&c| {
            let next = map.len() as ClusterId;
            *map.entry(c).or_insert(next)
        })
        .collect();
    (labels, map.len())
}

/// `Q = Σ_C e_C/m − (vol_C/2m)²` from integer aggregates: `intra2 = Σ_C 2e_C`,
/// `sum_vol_sq = Σ_C vol_C²`, `two_m = 2m`. The numerator is formed exactly,
/// so equal clusterings give bit-identical values regardless of labelling.
pub fn exact_modularity(intra2: u128, sum_vol_sq: u128, two_m: u128) -> f64 {
    if two_m == 0 {
        return 0.0;
    }
    // Q = (2e·2m − Σ vol²) / (2m)²
    let numerator = (intra2 * two_m) as i128 - sum_vol_sq as i128;
    numerator as f64 / (two_m as f64 * two_m as f64)
}
