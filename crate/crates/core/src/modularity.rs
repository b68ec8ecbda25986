// SPDX-License-Identifier: Apache-2.0

//! Clustering state, the modularity objective and the one-pass assignment.
//!
//! Modularity is `Q = Σ_C [e_C/m − (vol_C/2m)²]` with `e_C` the undirected
//! intra-cluster weight. Moving node `v` from `cur` to `can` changes it by
//!
//! ```text
//! ΔQ = (K_can − K_cur)/m − d_v (d_v + vol_can − vol_cur) / (2m²)
//! ```
//!
//! where `K_C` is the weight from `v` into `C` (excluding `v`), `vol_cur`
//! includes `d_v` and `vol_can` does not. Multiplying by `2m²` gives an
//! integer, [`gain_numerator`], which is what every move decision compares.

use crate::error::Result;
use crate::graph::exact_modularity;
use crate::graph_io::NodeRecord;
use crate::quotient::QuotientEdgeAccumulator;
use crate::{ClusterId, NodeId, Weight};

/// Modularity change of a single move, in floating point.
pub fn delta_modularity(
    d_v: Weight,
    k_cur: Weight,
    k_can: Weight,
    vol_cur: Weight,
    vol_can: Weight,
    m: Weight,
) -> f64 {
    assert!(
        vol_cur >= d_v,
        "current volume must include the moving node"
    );
    assert!(m > 0, "gain is undefined on an edgeless graph");
    let (d, m) = (d_v as f64, m as f64);
    (k_can as f64 - k_cur as f64) / m - d / (2.0 * m * m) * (d + vol_can as f64 - vol_cur as f64)
}

/// `2m² · ΔQ` computed exactly; `two_m` is `2m`.
#[inline]
pub fn gain_numerator(
    d_v: Weight,
    k_cur: Weight,
    k_can: Weight,
    vol_cur: Weight,
    vol_can: Weight,
    two_m: Weight,
) -> i128 {
    let d = d_v as i128;
    two_m as i128 * (k_can as i128 - k_cur as i128) - d * (d + vol_can as i128 - vol_cur as i128)
}

/// Converts a [`gain_numerator`] back to a modularity difference.
#[inline]
pub fn gain_value(numerator: i128, two_m: Weight) -> f64 {
    let t = two_m as f64;
    2.0 * numerator as f64 / (t * t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub cluster: ClusterId,
    /// Exact gain numerator of the move; zero when staying.
    pub numerator: i128,
}

/// Per-node accumulator of `K_{v→C}` over the clusters of `v`'s neighbours.
/// Dense scratch array of one word per cluster id plus a touched list.
#[derive(Debug, Clone, Default)]
pub struct NeighborTally {
    weight: Vec<Weight>,
    touched: Vec<ClusterId>,
}

impl NeighborTally {
    pub fn new(capacity: usize) -> Self {
        NeighborTally {
            weight: vec![0; capacity],
            touched: Vec::new(),
        }
    }

    pub fn fill(&mut self, record: &NodeRecord, assignments: &[ClusterId]) {
        self.clear();
        for &(u, w) in &record.neighbors {
            self.add(assignments[u as usize], w);
        }
    }

    #[inline]
    pub(crate) fn add(&mut self, c: ClusterId, w: Weight) {
        let slot = &mut self.weight[c as usize];
        if *slot == 0 {
            self.touched.push(c);
        }
        *slot += w;
    }

    pub fn get(&self, c: ClusterId) -> Weight {
        self.weight[c as usize]
    }

    /// Candidate clusters in first-touch order.
    pub fn clusters(&self) -> &[ClusterId] {
        &self.touched
    }

    pub fn total(&self) -> Weight {
        self.touched.iter().map(|&c| self.weight[c as usize]).sum()
    }

    pub fn clear(&mut self) {
        for &c in &self.touched {
            self.weight[c as usize] = 0;
        }
        self.touched.clear();
    }
}

/// Assignments plus per-cluster volume and size. Cluster ids are always node
/// ids (`< n`), so both tables are flat arrays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusteringState {
    assignments: Vec<ClusterId>,
    volume: Vec<Weight>,
    size: Vec<u32>,
    total_weight: Weight,
    num_clusters: usize,
}

impl ClusteringState {
    /// Every node in its own cluster, named after the node.
    pub fn singletons(degrees: &[Weight], total_weight: Weight) -> Self {
        let n = degrees.len();
        debug_assert_eq!(degrees.iter().sum::<Weight>(), 2 * total_weight);
        ClusteringState {
            assignments: (0..n as ClusterId).collect(),
            volume: degrees.to_vec(),
            size: vec![1; n],
            total_weight,
            num_clusters: n,
        }
    }

    /// State for arbitrary labels in `[0, n)`.
    pub fn from_assignments(
        assignments: Vec<ClusterId>,
        degrees: &[Weight],
        total_weight: Weight,
    ) -> Self {
        let n = degrees.len();
        assert_eq!(assignments.len(), n);
        let mut volume = vec![0; n];
        let mut size = vec![0u32; n];
        for (v, &c) in assignments.iter().enumerate() {
            assert!((c as usize) < n, "cluster id {c} out of range");
            volume[c as usize] += degrees[v];
            size[c as usize] += 1;
        }
        let num_clusters = size.iter().filter(|&&s| s > 0).count();
        ClusteringState {
            assignments,
            volume,
            size,
            total_weight,
            num_clusters,
        }
    }

    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    pub fn assignments(&self) -> &[ClusterId] {
        &self.assignments
    }

    pub fn into_assignments(self) -> Vec<ClusterId> {
        self.assignments
    }

    pub fn cluster_of(&self, v: NodeId) -> ClusterId {
        self.assignments[v as usize]
    }

    pub fn volume(&self, c: ClusterId) -> Weight {
        self.volume[c as usize]
    }

    pub fn size(&self, c: ClusterId) -> u32 {
        self.size[c as usize]
    }

    pub fn total_weight(&self) -> Weight {
        self.total_weight
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    /// Ids of non-empty clusters, ascending.
    pub fn clusters(&self) -> impl Iterator<Item = ClusterId> + '_ {
        (0..self.n() as ClusterId).filter(|&c| self.size[c as usize] > 0)
    }

    pub fn total_volume(&self) -> Weight {
        self.volume.iter().sum()
    }

    /// Renames clusters through `rename`, merging those mapped to the same
    /// id. Volumes and sizes are carried over without touching the graph.
    pub fn relabel(&mut self, rename: impl Fn(ClusterId) -> ClusterId) {
        let n = self.n();
        let mut volume = vec![0; n];
        let mut size = vec![0u32; n];
        for c in 0..n {
            if self.size[c] > 0 {
                let to = rename(c as ClusterId) as usize;
                volume[to] += self.volume[c];
                size[to] += self.size[c];
            }
        }
        for c in &mut self.assignments {
            *c = rename(*c);
        }
        self.num_clusters = size.iter().filter(|&&s| s > 0).count();
        self.volume = volume;
        self.size = size;
    }

    /// Picks the gain-maximising cluster among the clusters of `record`'s
    /// neighbours. Ties go to the lower cluster id; with no positive gain the
    /// node stays put. No fresh cluster is ever opened: in the first pass a
    /// node's current cluster is still the one founded under its own id.
    pub fn compute_cluster(&self, record: &NodeRecord, tally: &mut NeighborTally) -> Decision {
        let v = record.id;
        let cur = self.assignments[v as usize];
        let stay = Decision {
            cluster: cur,
            numerator: 0,
        };
        if self.total_weight == 0 || record.neighbors.is_empty() {
            return stay;
        }
        tally.fill(record, &self.assignments);
        let d = record.weighted_degree;
        let two_m = 2 * self.total_weight;
        let k_cur = tally.get(cur);
        let vol_cur = self.volume[cur as usize];
        let mut best = stay;
        for &c in tally.clusters() {
            if c == cur {
                continue;
            }
            let g = gain_numerator(
                d,
                k_cur,
                tally.get(c),
                vol_cur,
                self.volume[c as usize],
                two_m,
            );
            if g > best.numerator || (g == best.numerator && g > 0 && c < best.cluster) {
                best = Decision {
                    cluster: c,
                    numerator: g,
                };
            }
        }
        best
    }

    /// Moves `v` from `from` to `to`, keeping volumes and sizes current.
    pub fn apply_move(&mut self, v: NodeId, from: ClusterId, to: ClusterId, d_v: Weight) {
        assert_eq!(
            self.assignments[v as usize], from,
            "node {v} is not in cluster {from}"
        );
        if from == to {
            return;
        }
        let vol = &mut self.volume[from as usize];
        assert!(*vol >= d_v, "volume underflow in cluster {from}");
        *vol -= d_v;
        self.size[from as usize] -= 1;
        if self.size[from as usize] == 0 {
            self.num_clusters -= 1;
        }
        if self.size[to as usize] == 0 {
            self.num_clusters += 1;
        }
        self.volume[to as usize] += d_v;
        self.size[to as usize] += 1;
        self.assignments[v as usize] = to;
    }

    /// Modularity recomputed from a full pass over the graph. Volumes are
    /// rebuilt from the records rather than taken from the state.
    pub fn modularity<I>(&self, records: I) -> Result<f64>
    where
        I: IntoIterator<Item = Result<NodeRecord>>,
    {
        let n = self.n();
        let mut volume = vec![0 as Weight; n];
        let mut intra2: u128 = 0;
        let mut two_m: u128 = 0;
        for record in records {
            let record = record?;
            let c = self.assignments[record.id as usize];
            volume[c as usize] += record.weighted_degree;
            two_m += record.weighted_degree as u128;
            for &(u, w) in &record.neighbors {
                if self.assignments[u as usize] == c {
                    intra2 += w as u128;
                }
            }
        }
        if two_m == 0 {
            log::warn!("modularity of an edgeless graph is taken as 0");
        }
        let sum_sq = volume.iter().map(|&x| x as u128 * x as u128).sum();
        Ok(exact_modularity(intra2, sum_sq, two_m))
    }
}

/// Outcome of the first streaming pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PassReport {
    pub nodes: u64,
    pub moves: u64,
    /// Smallest accepted gain numerator; `None` when nothing moved.
    pub min_gain_numerator: Option<i128>,
}

/// One pass in stream order: each node joins the neighbouring cluster of
/// maximal positive gain, or keeps its founding cluster. When `quotient` is
/// given, the node's edges to already-streamed neighbours are accumulated
/// right after its assignment is fixed.
pub fn stream_pass_assign<I>(
    records: I,
    state: &mut ClusteringState,
    mut quotient: Option<&mut QuotientEdgeAccumulator>,
) -> Result<PassReport>
where
    I: IntoIterator<Item = Result<NodeRecord>>,
{
    let mut tally = NeighborTally::new(state.n());
    let mut report = PassReport::default();
    for record in records {
        let record = record?;
        let from = state.cluster_of(record.id);
        let choice = state.compute_cluster(&record, &mut tally);
        if choice.cluster != from {
            state.apply_move(record.id, from, choice.cluster, record.weighted_degree);
            report.moves += 1;
            report.min_gain_numerator = Some(
                report
                    .min_gain_numerator
                    .map_or(choice.numerator, |g| g.min(choice.numerator)),
            );
        }
        if let Some(acc) = quotient.as_deref_mut() {
            acc.accumulate(&record, state.assignments());
        }
        report.nodes += 1;
    }
    Ok(report)
}
