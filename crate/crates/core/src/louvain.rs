// SPDX-License-Identifier: Apache-2.0

//! In-memory modularity optimisation for quotient-sized graphs.
//!
//! [`louvain`] alternates local-move sweeps with contraction, starting from
//! an arbitrary partition. Only strictly improving moves are applied and
//! contraction preserves modularity, so the result is never worse than the
//! starting partition. [`label_propagation`] is a cheap, seed-dependent
//! source of starting partitions.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{canonicalize, Graph};
use crate::modularity::{gain_numerator, gain_value, NeighborTally};
use crate::{ClusterId, NodeId};

#[derive(Debug, Clone, Copy)]
pub struct LouvainConfig {
    pub max_levels: usize,
    /// A sweep cycle on one level stops once a full sweep gains less.
    pub min_sweep_gain: f64,
    /// Hard cap on sweeps per level.
    pub max_sweeps: usize,
}

impl Default for LouvainConfig {
    fn default() -> Self {
        LouvainConfig {
            max_levels: 10,
            min_sweep_gain: 1e-12,
            max_sweeps: 100,
        }
    }
}

/// Local moving on one level. Returns whether any node moved.
fn local_moves(
    g: &Graph,
    labels: &mut [ClusterId],
    rng: &mut ChaCha8Rng,
    cfg: &LouvainConfig,
) -> bool {
    let n = g.n();
    let two_m = g.total_degree();
    if two_m == 0 {
        return false;
    }
    let mut volume = vec![0; n];
    for v in 0..n {
        volume[labels[v] as usize] += g.degree(v as NodeId);
    }
    let mut order: Vec<NodeId> = (0..n as NodeId).collect();
    let mut tally = NeighborTally::new(n);
    let mut moved_any = false;

    for _ in 0..cfg.max_sweeps {
        order.shuffle(rng);
        let mut sweep_gain = 0.0;
        let mut moves = 0usize;
        for &v in &order {
            let cur = labels[v as usize];
            let d = g.degree(v);
            tally.clear();
            for (u, w) in g.neighbors(v) {
                tally.add(labels[u as usize], w);
            }
            let k_cur = tally.get(cur);
            let vol_cur = volume[cur as usize];
            let mut best = (cur, 0i128);
            for &c in tally.clusters() {
                if c == cur {
                    continue;
                }
                let gain =
                    gain_numerator(d, k_cur, tally.get(c), vol_cur, volume[c as usize], two_m);
                if gain > best.1 || (gain == best.1 && gain > 0 && c < best.0) {
                    best = (c, gain);
                }
            }
            if best.0 != cur {
                volume[cur as usize] -= d;
                volume[best.0 as usize] += d;
                labels[v as usize] = best.0;
                sweep_gain += gain_value(best.1, two_m);
                moves += 1;
            }
        }
        moved_any |= moves > 0;
        if moves == 0 || sweep_gain < cfg.min_sweep_gain {
            break;
        }
    }
    moved_any
}

/// Multi-level Louvain from `init`. The returned labels are dense.
pub fn louvain(g: &Graph, init: &[ClusterId], seed: u64, cfg: &LouvainConfig) -> Vec<ClusterId> {
    assert_eq!(init.len(), g.n());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Node of the current level that each original node belongs to.
    let mut membership: Vec<ClusterId> = (0..g.n() as ClusterId).collect();
    let mut level_graph: Option<Graph> = None;
    // Labels of the current level's nodes; the first level starts from
    // `init`, later ones from singletons of the contracted graph.
    let (mut labels, _) = canonicalize(init);

    for level in 0..cfg.max_levels.max(1) {
        let current = level_graph.as_ref().unwrap_or(g);
        let moved = local_moves(current, &mut labels, &mut rng, cfg);
        let (coarse, dense) = current.contract(&labels);
        for c in membership.iter_mut() {
            *c = dense[*c as usize];
        }
        if (!moved && level > 0) || coarse.n() == current.n() || coarse.n() == 1 {
            break;
        }
        labels = (0..coarse.n() as ClusterId).collect();
        level_graph = Some(coarse);
    }
    membership
}

/// Sequential label propagation in a fresh random order each round. A node
/// adopts the neighbouring label of largest incident weight; ties are broken
/// uniformly at random. Isolated nodes keep their label.
pub fn label_propagation(g: &Graph, rounds: usize, seed: u64) -> Vec<ClusterId> {
    assert!(rounds >= 1, "label propagation needs at least one round");
    let n = g.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<ClusterId> = (0..n as ClusterId).collect();
    let mut order: Vec<NodeId> = (0..n as NodeId).collect();
    let mut tally = NeighborTally::new(n);
    for _ in 0..rounds {
        order.shuffle(&mut rng);
        let mut changed = 0usize;
        for &v in &order {
            tally.clear();
            for (u, w) in g.neighbors(v) {
                tally.add(labels[u as usize], w);
            }
            let mut best = labels[v as usize];
            let mut best_w = 0;
            let mut ties = 0u32;
            for &c in tally.clusters() {
                let w = tally.get(c);
                if w > best_w {
                    best = c;
                    best_w = w;
                    ties = 1;
                } else if w == best_w {
                    ties += 1;
                    if rng.random_range(0..ties) == 0 {
                        best = c;
                    }
                }
            }
            if best != labels[v as usize] {
                labels[v as usize] = best;
                changed += 1;
            }
        }
        if changed == 0 {
            break;
        }
    }
    labels
}
