// SPDX-License-Identifier: Apache-2.0

//! Cross-checks against independent oracles: brute-force optima, full
//! modularity recomputation, and round trips through METIS files.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::NamedTempFile;

use streamclust::eval::{audit_modularity, random_weighted_graph, ring_of_cliques};
use streamclust::graph_io::write_metis;
use streamclust::louvain::{louvain, LouvainConfig};
use streamclust::modularity::{delta_modularity, gain_numerator, stream_pass_assign};
use streamclust::restream::{restream_local_search, LsConfig};
use streamclust::{ClusterId, ClusteringState, Graph, GraphFile, NodeId, QuotientEdgeAccumulator};

fn to_file(g: &Graph) -> NamedTempFile {
    let f = NamedTempFile::new().unwrap();
    write_metis(f.path(), g).unwrap();
    f
}

fn random_labels(n: usize, k: u32, seed: u64) -> Vec<ClusterId> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(0..k.max(1))).collect()
}

/// Every set partition of `0..n` as a restricted growth string.
fn for_each_partition(n: usize, mut f: impl FnMut(&[ClusterId])) {
    let mut a = vec![0 as ClusterId; n];
    let mut max = vec![0 as ClusterId; n];
    loop {
        f(&a);
        // Rightmost position that can still grow.
        let Some(i) = (1..n).rev().find(|&i| a[i] <= max[i - 1]) else {
            return;
        };
        a[i] += 1;
        max[i] = max[i - 1].max(a[i]);
        for j in i + 1..n {
            a[j] = 0;
            max[j] = max[i];
        }
    }
}

#[test]
fn partition_enumeration_counts_bell_numbers() {
    for (n, bell) in [(1, 1), (3, 5), (5, 52), (7, 877)] {
        let mut count = 0;
        for_each_partition(n, |_| count += 1);
        assert_eq!(count, bell);
    }
}

#[test]
fn louvain_restarts_find_small_optima() {
    let cases = 10;
    let mut hits = 0;
    for seed in 0..cases {
        let n = 6 + (seed as usize % 3);
        let g = random_weighted_graph(n, 0.45, 1..=3, 100 + seed);
        let mut best = f64::NEG_INFINITY;
        for_each_partition(n, |p| best = best.max(g.modularity(p)));
        let singletons: Vec<ClusterId> = (0..n as ClusterId).collect();
        let found = (0..10)
            .map(|s| g.modularity(&louvain(&g, &singletons, s, &LouvainConfig::default())))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(found <= best + 1e-12);
        if (found - best).abs() < 1e-12 {
            hits += 1;
        }
    }
    assert!(hits >= 9, "{hits}/{cases} optima found");
}

#[test]
fn two_triangles_optimum_by_enumeration() {
    let g = Graph::from_edges(
        6,
        &[
            (0, 1, 1),
            (1, 2, 1),
            (0, 2, 1),
            (3, 4, 1),
            (4, 5, 1),
            (3, 5, 1),
            (2, 3, 1),
        ],
    );
    let mut best = (f64::NEG_INFINITY, vec![]);
    for_each_partition(6, |p| {
        let q = g.modularity(p);
        if q > best.0 {
            best = (q, p.to_vec());
        }
    });
    assert!((best.0 - 5.0 / 14.0).abs() < 1e-15);
    assert_eq!(best.1, vec![0, 0, 0, 1, 1, 1]);
}

/// Quotient built by streaming the file with a fixed clustering.
fn streamed_quotient(
    file: &GraphFile,
    labels: Vec<ClusterId>,
) -> (ClusteringState, streamclust::QuotientGraph) {
    let state = ClusteringState::from_assignments(labels, file.degrees(), file.total_weight());
    let mut acc = QuotientEdgeAccumulator::new();
    for r in file.stream().unwrap() {
        acc.accumulate(&r.unwrap(), state.assignments());
    }
    let q = acc.finalize(&state);
    (state, q)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn contraction_preserves_modularity(
        seed in any::<u64>(),
        n in 2usize..120,
        p in 0.05f64..0.3,
        k in 1u32..12,
    ) {
        let g = random_weighted_graph(n, p, 1..=5, seed);
        let labels = random_labels(n, k.min(n as u32), seed ^ 1);
        let q_fine = g.modularity(&labels);

        let (coarse, _) = g.contract(&labels);
        let ids: Vec<ClusterId> = (0..coarse.n() as ClusterId).collect();
        prop_assert!((coarse.modularity(&ids) - q_fine).abs() <= 1e-9);

        let f = to_file(&g);
        let file = GraphFile::scan(f.path(), false).unwrap();
        let (state, quotient) = streamed_quotient(&file, labels.clone());
        let qg = quotient.graph();
        let ids: Vec<ClusterId> = (0..qg.n() as ClusterId).collect();
        prop_assert!((qg.modularity(&ids) - q_fine).abs() <= 1e-9);
        prop_assert_eq!(qg.total_weight(), g.total_weight());
        for s in 0..qg.n() as ClusterId {
            prop_assert_eq!(qg.degree(s), state.volume(quotient.cluster_id(s)));
        }
    }

    #[test]
    fn expansion_preserves_modularity(
        seed in any::<u64>(),
        n in 2usize..120,
        p in 0.05f64..0.3,
        k in 1u32..12,
    ) {
        let g = random_weighted_graph(n, p, 1..=5, seed);
        let labels = random_labels(n, k.min(n as u32), seed ^ 2);
        let f = to_file(&g);
        let file = GraphFile::scan(f.path(), false).unwrap();
        let (mut state, quotient) = streamed_quotient(&file, labels);
        let coarse = random_labels(quotient.n(), 4, seed ^ 3);
        let q_coarse = quotient.modularity(&coarse);
        quotient.project(&coarse, &mut state);
        prop_assert!((g.modularity(state.assignments()) - q_coarse).abs() <= 1e-9);
        prop_assert!((state.modularity(file.stream().unwrap()).unwrap() - q_coarse).abs() <= 1e-9);
    }

    #[test]
    fn move_gain_matches_recomputation(seed in any::<u64>(), n in 2usize..64, p in 0.05f64..0.4) {
        let g = random_weighted_graph(n, p, 1..=5, seed);
        prop_assume!(g.total_weight() > 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 4);
        let labels: Vec<ClusterId> = (0..n).map(|_| rng.random_range(0..n as u32)).collect();
        let mut state = ClusteringState::from_assignments(labels, g.degrees(), g.total_weight());
        let m = g.total_weight();
        for _ in 0..25 {
            let v = rng.random_range(0..n as NodeId);
            let to = rng.random_range(0..n as ClusterId);
            let from = state.cluster_of(v);
            let k = |c: ClusterId, a: &[ClusterId]| -> u64 {
                g.neighbors(v).filter(|&(u, _)| a[u as usize] == c).map(|(_, w)| w).sum()
            };
            let (k_cur, k_can) = (k(from, state.assignments()), k(to, state.assignments()));
            let (vol_cur, vol_can) = (state.volume(from), state.volume(to));
            let d = g.degree(v);
            let before = g.modularity(state.assignments());
            if to == from {
                continue;
            }
            let predicted = delta_modularity(d, k_cur, k_can, vol_cur, vol_can, m);
            let num = gain_numerator(d, k_cur, k_can, vol_cur, vol_can, 2 * m);
            state.apply_move(v, from, to, d);
            let after = g.modularity(state.assignments());
            prop_assert!((predicted - (after - before)).abs() <= 1e-9);
            prop_assert_eq!(num.signum(), if (after - before).abs() < 1e-15 { 0 } else { (after - before).signum() as i128 });
        }
    }

    #[test]
    fn stream_pass_never_loses_modularity(seed in any::<u64>(), n in 1usize..150, p in 0.01f64..0.3) {
        let g = random_weighted_graph(n, p, 1..=4, seed);
        let singletons: Vec<ClusterId> = (0..n as ClusterId).collect();
        let mut state = ClusteringState::singletons(g.degrees(), g.total_weight());
        let report = stream_pass_assign(g.records().map(Ok), &mut state, None).unwrap();
        prop_assert!(report.min_gain_numerator.is_none_or(|x| x > 0));
        prop_assert!(g.modularity(state.assignments()) >= g.modularity(&singletons));
    }
}

#[test]
fn scaling_weights_changes_nothing() {
    for seed in 0..10 {
        let g = random_weighted_graph(80, 0.1, 1..=3, seed);
        let scaled = Graph::from_edges(
            g.n(),
            &g.edges().map(|(u, v, w)| (u, v, 7 * w)).collect::<Vec<_>>(),
        );
        let run = |g: &Graph| {
            let mut s = ClusteringState::singletons(g.degrees(), g.total_weight());
            stream_pass_assign(g.records().map(Ok), &mut s, None).unwrap();
            s.into_assignments()
        };
        let a = run(&g);
        assert_eq!(a, run(&scaled));
        assert_eq!(g.modularity(&a), scaled.modularity(&a));
    }
}

#[test]
fn streamed_quotient_degrees_match_volumes() {
    let g = random_weighted_graph(300, 0.03, 1..=4, 77);
    let f = to_file(&g);
    let file = GraphFile::scan(f.path(), false).unwrap();
    let mut state = ClusteringState::singletons(file.degrees(), file.total_weight());
    let mut acc = QuotientEdgeAccumulator::new();
    stream_pass_assign(file.stream().unwrap(), &mut state, Some(&mut acc)).unwrap();
    let quotient = acc.finalize(&state);
    assert_eq!(quotient.n(), state.num_clusters());
    for s in 0..quotient.n() as ClusterId {
        assert_eq!(
            quotient.graph().degree(s),
            state.volume(quotient.cluster_id(s))
        );
    }
    let ids: Vec<ClusterId> = (0..quotient.n() as ClusterId).collect();
    assert_eq!(quotient.modularity(&ids), g.modularity(state.assignments()));
}

fn ls_state(file: &GraphFile, labels: &[ClusterId]) -> ClusteringState {
    // Labels must be node ids: name each cluster after its first member.
    let mut first = vec![ClusterId::MAX; file.n()];
    let named = labels
        .iter()
        .enumerate()
        .map(|(v, &c)| {
            if first[c as usize] == ClusterId::MAX {
                first[c as usize] = v as ClusterId;
            }
            first[c as usize]
        })
        .collect();
    ClusteringState::from_assignments(named, file.degrees(), file.total_weight())
}

#[test]
fn local_search_leaves_optimum_alone() {
    let (g, truth) = ring_of_cliques(8, 4);
    let f = to_file(&g);
    let file = GraphFile::scan(f.path(), false).unwrap();
    let mut state = ls_state(&file, &truth);
    let report = restream_local_search(&mut state, &file, &LsConfig::default()).unwrap();
    assert_eq!(report.rounds.len(), 1);
    assert_eq!(report.rounds[0].moves, 0);
    assert_eq!(report.final_modularity(), report.initial_modularity);
}

#[test]
fn full_floor_stops_after_first_round() {
    let g = random_weighted_graph(200, 0.05, 1..=3, 5);
    let f = to_file(&g);
    let file = GraphFile::scan(f.path(), false).unwrap();
    // From a clustering of positive modularity a round can never gain the
    // whole running total.
    let mut state = ClusteringState::singletons(file.degrees(), file.total_weight());
    stream_pass_assign(file.stream().unwrap(), &mut state, None).unwrap();
    assert!(g.modularity(state.assignments()) > 0.0);
    let cfg = LsConfig {
        floor: 1.0,
        ..LsConfig::default()
    };
    let report = restream_local_search(&mut state, &file, &cfg).unwrap();
    assert_eq!(report.rounds.len(), 1);
    assert!(report.rounds[0].moves > 0);
}

#[test]
fn local_search_merges_a_split_clique() {
    let (g, truth) = ring_of_cliques(20, 6);
    let f = to_file(&g);
    let file = GraphFile::scan(f.path(), false).unwrap();
    let mut split = truth.clone();
    split[3..6].fill(20);
    let mut state = ls_state(&file, &split);
    let cfg = LsConfig {
        floor: 0.0,
        ..LsConfig::default()
    };
    let report = restream_local_search(&mut state, &file, &cfg).unwrap();
    let q = g.modularity(state.assignments());
    assert!((q - 0.8875).abs() < 1e-9, "{q}");
    assert!((report.final_modularity() - q).abs() < 1e-9);
    assert!((audit_modularity(state.assignments(), f.path()).unwrap() - q).abs() < 1e-9);
    for r in &report.rounds[1..] {
        assert_eq!(r.records_read, r.visited as u64);
    }
    assert!(report
        .rounds
        .windows(2)
        .all(|w| w[1].q_total >= w[0].q_total));
}
