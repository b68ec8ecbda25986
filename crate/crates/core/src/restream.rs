// SPDX-License-Identifier: Apache-2.0

//! Re-streaming local search.
//!
//! Round one re-reads every node; later rounds read back only the nodes
//! whose neighbourhood changed in the previous round, seeking to them
//! through the offset index. Nodes only ever move into clusters that
//! already exist. The loop stops when no node is active, when a round's
//! gain drops below `floor · Q_total`, or when the time budget runs out.

use std::time::{Duration, Instant};

use crate::error::Result;
use crate::graph_io::{GraphFile, NodeRecord};
use crate::modularity::{gain_value, ClusteringState, NeighborTally};
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsConfig {
    /// Relative gain floor `X ∈ [0, 1]`.
    pub floor: f64,
    pub cutoff: Duration,
}

impl Default for LsConfig {
    fn default() -> Self {
        LsConfig {
            floor: 0.05,
            cutoff: Duration::from_secs(600),
        }
    }
}

impl LsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.floor) {
            return Err(crate::Error::Config(format!(
                "local search floor {} is outside [0, 1]",
                self.floor
            )));
        }
        if self.cutoff.is_zero() {
            return Err(crate::Error::Config(
                "local search time limit must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Nodes to revisit next round.
#[derive(Debug, Clone)]
pub struct ActiveSet {
    marked: Vec<bool>,
    ids: Vec<NodeId>,
}

impl ActiveSet {
    pub fn new(n: usize) -> Self {
        ActiveSet {
            marked: vec![false; n],
            ids: Vec::new(),
        }
    }

    pub fn insert(&mut self, v: NodeId) {
        if !std::mem::replace(&mut self.marked[v as usize], true) {
            self.ids.push(v);
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Drains the set into ascending order.
    pub fn take_sorted(&mut self) -> Vec<NodeId> {
        let mut ids = std::mem::take(&mut self.ids);
        for &v in &ids {
            self.marked[v as usize] = false;
        }
        ids.sort_unstable();
        ids
    }
}

/// Whether another round should run after one that gained `delta_q`.
/// A non-positive `q_total` gives no meaningful relative floor; then any
/// positive gain continues.
pub fn round_gain_check(delta_q: f64, q_total: f64, floor: f64) -> bool {
    if q_total <= 0.0 {
        delta_q > 0.0
    } else {
        delta_q >= floor * q_total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub round: usize,
    /// Nodes scheduled for this round.
    pub visited: usize,
    /// Node records actually read from disk.
    pub records_read: u64,
    pub moves: usize,
    pub gain: f64,
    /// Accumulated modularity after the round.
    pub q_total: f64,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsReport {
    pub initial_modularity: f64,
    pub rounds: Vec<RoundReport>,
}

impl LsReport {
    pub fn final_modularity(&self) -> f64 {
        self.rounds
            .last()
            .map_or(self.initial_modularity, |r| r.q_total)
    }
}

fn visit(
    record: &NodeRecord,
    state: &mut ClusteringState,
    tally: &mut NeighborTally,
    next: &mut ActiveSet,
    round: &mut RoundReport,
) {
    let from = state.cluster_of(record.id);
    let choice = state.compute_cluster(record, tally);
    if choice.cluster == from {
        return;
    }
    state.apply_move(record.id, from, choice.cluster, record.weighted_degree);
    round.moves += 1;
    round.gain += gain_value(choice.numerator, 2 * state.total_weight());
    next.insert(record.id);
    for &(u, _) in &record.neighbors {
        next.insert(u);
    }
}

pub fn restream_local_search(
    state: &mut ClusteringState,
    graph: &GraphFile,
    cfg: &LsConfig,
) -> Result<LsReport> {
    cfg.validate()?;
    let start = Instant::now();
    let initial = state.modularity(graph.stream()?)?;
    let mut q_total = initial;
    let mut tally = NeighborTally::new(state.n());
    let mut next = ActiveSet::new(state.n());
    let mut record = NodeRecord::default();
    let mut rounds: Vec<RoundReport> = Vec::new();
    let mut active: Option<Vec<NodeId>> = None;

    loop {
        let mut round = RoundReport {
            round: rounds.len() + 1,
            visited: 0,
            records_read: 0,
            moves: 0,
            gain: 0.0,
            q_total,
            elapsed: Duration::ZERO,
        };
        match &active {
            None => {
                let mut stream = graph.stream()?;
                while stream.next_into(&mut record)? {
                    visit(&record, state, &mut tally, &mut next, &mut round);
                }
                round.visited = state.n();
                round.records_read = stream.records_read();
            }
            Some(ids) => {
                let mut reader = graph.read_nodes_at(ids)?;
                while reader.next_into(&mut record)? {
                    visit(&record, state, &mut tally, &mut next, &mut round);
                }
                round.visited = ids.len();
                round.records_read = reader.records_read();
            }
        }
        q_total += round.gain;
        round.q_total = q_total;
        round.elapsed = start.elapsed();
        log::info!(
            "ls round {}: visited {}, moves {}, gain {:.6}, Q {:.6}, {:.3}s",
            round.round,
            round.visited,
            round.moves,
            round.gain,
            round.q_total,
            round.elapsed.as_secs_f64()
        );
        let gain = round.gain;
        rounds.push(round);

        if next.is_empty()
            || !round_gain_check(gain, q_total, cfg.floor)
            || start.elapsed() >= cfg.cutoff
        {
            break;
        }
        active = Some(next.take_sorted());
    }
    Ok(LsReport {
        initial_modularity: initial,
        rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_floor() {
        assert!(round_gain_check(0.06, 1.0, 0.05));
        assert!(!round_gain_check(0.04, 1.0, 0.05));
        assert!(round_gain_check(0.01, -0.2, 0.05));
        assert!(!round_gain_check(0.0, -0.2, 0.05));
        assert!(!round_gain_check(0.3, 0.5, 1.0));
    }

    #[test]
    fn active_set_dedups_and_sorts() {
        let mut s = ActiveSet::new(10);
        for v in [7, 3, 7, 1, 3] {
            s.insert(v);
        }
        assert_eq!(s.len(), 3);
        assert_eq!(s.take_sorted(), vec![1, 3, 7]);
        assert!(s.is_empty());
        s.insert(7);
        assert_eq!(s.take_sorted(), vec![7]);
    }

    #[test]
    fn config_validation() {
        let bad = LsConfig {
            floor: 1.5,
            ..LsConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = LsConfig {
            cutoff: Duration::ZERO,
            ..LsConfig::default()
        };
        assert!(bad.validate().is_err());
        LsConfig::default().validate().unwrap();
    }
}
