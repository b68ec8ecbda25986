// SPDX-License-Identifier: Apache-2.0

//! Quality measures, synthetic benchmark graphs and run statistics.

use std::collections::HashMap;
use std::fs::File;
use std::hash::Hash;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::{ClusterId, NodeId};

/// Normalisation used by [`nmi`], reported alongside scores.
pub const NMI_NORMALIZATION: &str = "arithmetic";

fn entropy<K>(counts: &HashMap<K, u64>, n: f64) -> f64 {
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalised mutual information `I(X;Y) / ((H(X) + H(Y)) / 2)`, natural log.
/// Two single-cluster partitions are identical and score 1.
pub fn nmi<A, B>(predicted: &[A], truth: &[B]) -> Result<f64>
where
    A: Copy + Eq + Hash,
    B: Copy + Eq + Hash,
{
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::Config("NMI of empty partitions".into()));
    }
    let n = predicted.len() as f64;
    let mut joint: HashMap<(A, B), u64> = HashMap::new();
    let mut rows: HashMap<A, u64> = HashMap::new();
    let mut cols: HashMap<B, u64> = HashMap::new();
    for (&a, &b) in predicted.iter().zip(truth) {
        *joint.entry((a, b)).or_default() += 1;
        *rows.entry(a).or_default() += 1;
        *cols.entry(b).or_default() += 1;
    }
    let (hx, hy) = (entropy(&rows, n), entropy(&cols, n));
    if hx + hy == 0.0 {
        return Ok(1.0);
    }
    let mutual: f64 = joint
        .iter()
        .map(|(&(a, b), &c)| {
            let pxy = c as f64 / n;
            let px = rows[&a] as f64 / n;
            let py = cols[&b] as f64 / n;
            pxy * (pxy / (px * py)).ln()
        })
        .sum();
    Ok((2.0 * mutual / (hx + hy)).clamp(0.0, 1.0))
}

/// `k` cliques of `s` nodes; clique `i`'s last node is joined to clique
/// `i + 1`'s first, closing a ring. Returns the graph and clique labels.
pub fn ring_of_cliques(k: usize, s: usize) -> (Graph, Vec<ClusterId>) {
    assert!(k >= 3 && s >= 3, "ring of cliques needs k ≥ 3 and s ≥ 3");
    let mut edges = Vec::with_capacity(k * (s * (s - 1) / 2 + 1));
    for c in 0..k {
        let base = (c * s) as NodeId;
        for i in 0..s as NodeId {
            for j in (i + 1)..s as NodeId {
                edges.push((base + i, base + j, 1));
            }
        }
        let next = (((c + 1) % k) * s) as NodeId;
        edges.push((base + s as NodeId - 1, next, 1));
    }
    let truth = (0..k * s).map(|v| (v / s) as ClusterId).collect();
    (Graph::from_edges(k * s, &edges), truth)
}

/// Calls `emit` for each index in `0..total` independently with probability
/// `p`, jumping over the gaps with geometric skips.
fn sample_pairs(total: u64, p: f64, rng: &mut ChaCha8Rng, mut emit: impl FnMut(u64)) {
    if p <= 0.0 || total == 0 {
        return;
    }
    if p >= 1.0 {
        (0..total).for_each(emit);
        return;
    }
    let skip = Geometric::new(p).expect("0 < p < 1");
    let mut idx = skip.sample(rng);
    while idx < total {
        emit(idx);
        idx = idx.saturating_add(1).saturating_add(skip.sample(rng));
    }
}

/// Index of the `idx`-th pair `(i, j)`, `i < j < s`, in row-major order.
fn triangular_pair(idx: u64, s: u64) -> (u64, u64) {
    // Row i starts at i·s − i(i+1)/2; solve for the last row start ≤ idx.
    let sf = s as f64;
    let mut i = ((2.0 * sf
        - 1.0
        - ((2.0 * sf - 1.0).powi(2) - 8.0 * idx as f64)
            .max(0.0)
            .sqrt())
        / 2.0)
        .floor() as u64;
    let row_start = |i: u64| i * s - i * (i + 1) / 2;
    while i > 0 && row_start(i) > idx {
        i -= 1;
    }
    while i + 1 < s && row_start(i + 1) <= idx {
        i += 1;
    }
    let j = i + 1 + (idx - row_start(i));
    (i, j)
}

/// Planted partition: `k` equal blocks over `n` nodes, node `v` in block
/// `v mod k`; intra-block pairs are edges with probability `p_in`, others
/// with `p_out`.
pub fn planted_partition(
    k: usize,
    n: usize,
    p_in: f64,
    p_out: f64,
    seed: u64,
) -> Result<(Graph, Vec<ClusterId>)> {
    if k == 0 || !n.is_multiple_of(k) {
        return Err(Error::Config(format!("{k} blocks do not divide {n} nodes")));
    }
    if !(0.0 <= p_out && p_out < p_in && p_in <= 1.0) {
        return Err(Error::Config(format!(
            "need 0 ≤ p_out < p_in ≤ 1, got p_in={p_in}, p_out={p_out}"
        )));
    }
    let s = (n / k) as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let node = |block: u64, i: u64| (i * k as u64 + block) as NodeId;
    let mut edges = Vec::new();
    for a in 0..k as u64 {
        sample_pairs(s * (s - 1) / 2, p_in, &mut rng, |idx| {
            let (i, j) = triangular_pair(idx, s);
            edges.push((node(a, i), node(a, j), 1));
        });
        for b in (a + 1)..k as u64 {
            sample_pairs(s * s, p_out, &mut rng, |idx| {
                edges.push((node(a, idx / s), node(b, idx % s), 1));
            });
        }
    }
    let truth = (0..n).map(|v| (v % k) as ClusterId).collect();
    Ok((Graph::from_edges(n, &edges), truth))
}

/// Erdős–Rényi graph with integer weights in `weights`; used by tests.
pub fn random_weighted_graph(
    n: usize,
    p: f64,
    weights: std::ops::RangeInclusive<u64>,
    seed: u64,
) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n as NodeId {
        for v in (u + 1)..n as NodeId {
            if rng.random_bool(p) {
                edges.push((u, v, rng.random_range(weights.clone())));
            }
        }
    }
    Graph::from_edges(n, &edges)
}

/// Recomputes modularity straight from a METIS file with its own minimal
/// reader and floating-point accumulation, as a cross-check on
/// [`crate::ClusteringState::modularity`]. Expects a clean file (no
/// self-loops or parallel edges).
pub fn audit_modularity(assignments: &[ClusterId], graph: impl AsRef<Path>) -> Result<f64> {
    let reader = BufReader::new(File::open(graph)?);
    let mut lines = reader
        .lines()
        .filter(|l| !matches!(l, Ok(s) if s.starts_with('%')));
    let header = lines
        .next()
        .ok_or_else(|| Error::Header("empty file".into()))??;
    let fields: Vec<u64> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Header(header.clone())))
        .collect::<Result<_>>()?;
    let n = *fields
        .first()
        .ok_or_else(|| Error::Header(header.clone()))? as usize;
    let fmt = fields.get(2).copied().unwrap_or(0);
    let skip = (fmt / 100 % 10) as usize
        + if fmt / 10 % 10 == 1 {
            fields.get(3).copied().unwrap_or(1) as usize
        } else {
            0
        };
    let weighted = fmt % 10 == 1;
    if assignments.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: assignments.len(),
        });
    }

    let mut intra: HashMap<ClusterId, f64> = HashMap::new();
    let mut volume: HashMap<ClusterId, f64> = HashMap::new();
    let mut total = 0.0;
    for v in 0..n {
        let line = lines.next().ok_or(Error::NodeCountMismatch {
            expected: n as u64,
            found: v as u64,
        })??;
        let nums: Vec<u64> = line
            .split_whitespace()
            .skip(skip)
            .map(|t| t.parse().map_err(|_| Error::parse(v, t)))
            .collect::<Result<_>>()?;
        let step = if weighted { 2 } else { 1 };
        let cv = assignments[v];
        for entry in nums.chunks(step) {
            let u = entry[0] as usize - 1;
            let w = if weighted { entry[1] as f64 } else { 1.0 };
            total += w;
            *volume.entry(cv).or_default() += w;
            if assignments[u] == cv {
                // Seen from both endpoints.
                *intra.entry(cv).or_default() += w / 2.0;
            }
        }
    }
    let m = total / 2.0;
    if m == 0.0 {
        return Ok(0.0);
    }
    Ok(volume
        .iter()
        .map(|(c, &vol)| intra.get(c).copied().unwrap_or(0.0) / m - (vol / (2.0 * m)).powi(2))
        .sum())
}

/// Wall time per pipeline phase; phases the mode skips stay `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PhaseSeconds {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stream: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ls: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunStats {
    pub mode: String,
    pub n: usize,
    pub m: u64,
    pub modularity: f64,
    pub clusters: usize,
    pub phase_seconds: PhaseSeconds,
    pub total_seconds: f64,
    pub peak_memory_bytes: Option<u64>,
    pub ls_rounds: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nmi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nmi_normalization: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit_modularity: Option<f64>,
}

impl RunStats {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }

    /// Single-line `key=value` record.
    pub fn to_kv_line(&self) -> String {
        let mut parts = vec![
            format!("mode={}", self.mode),
            format!("n={}", self.n),
            format!("m={}", self.m),
            format!("modularity={:.6}", self.modularity),
            format!("clusters={}", self.clusters),
        ];
        let p = &self.phase_seconds;
        for (name, t) in [("stream", p.stream), ("evo", p.evo), ("ls", p.ls)] {
            if let Some(t) = t {
                parts.push(format!("{name}_s={t:.3}"));
            }
        }
        parts.push(format!("total_s={:.3}", self.total_seconds));
        if let Some(b) = self.peak_memory_bytes {
            parts.push(format!("peak_memory_bytes={b}"));
        }
        parts.push(format!("ls_rounds={}", self.ls_rounds));
        if let Some(x) = self.nmi {
            parts.push(format!("nmi={x:.6}"));
        }
        if let Some(q) = self.audit_modularity {
            parts.push(format!("audit_modularity={q:.6}"));
        }
        parts.join(" ")
    }
}

/// Peak resident set size of this process, where the platform reports it.
pub fn peak_resident_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_io::write_metis;
    use crate::ClusteringState;

    #[test]
    fn nmi_cases() {
        assert_eq!(nmi(&[0, 0, 1, 1], &[5, 5, 2, 2]).unwrap(), 1.0);
        assert_eq!(nmi(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap(), 0.0);
        // Contingency-table oracle: I = ln 2, H(X) = ln 2, H(Y) = 1.5 ln 2.
        let v = nmi(&[0, 0, 1, 1], &[0, 0, 1, 2]).unwrap();
        assert!((v - 0.8).abs() < 1e-12, "{v}");
        assert_eq!(nmi(&[3, 3], &[1, 1]).unwrap(), 1.0);
        assert!(nmi(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn nmi_symmetry() {
        let a = [0, 1, 1, 2, 2, 2, 0, 3];
        let b = [1, 1, 0, 0, 2, 2, 2, 2];
        let ab = nmi(&a, &b).unwrap();
        assert!((ab - nmi(&b, &a).unwrap()).abs() < 1e-15);
        let relabeled: Vec<_> = a.iter().map(|x| 10 - x).collect();
        assert!((ab - nmi(&relabeled, &b).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn ring_counts() {
        let (g, truth) = ring_of_cliques(3, 3);
        assert_eq!((g.n(), g.total_weight()), (9, 12));
        assert_eq!(truth, vec![0, 0, 0, 1, 1, 1, 2, 2, 2]);
        let (g, truth) = ring_of_cliques(20, 6);
        assert_eq!(g.total_weight(), 320);
        assert!((g.modularity(&truth) - 0.8875).abs() < 1e-12);
    }

    #[test]
    fn ring_round_trips() {
        let (g, _) = ring_of_cliques(5, 4);
        let f = tempfile::NamedTempFile::new().unwrap();
        write_metis(f.path(), &g).unwrap();
        let file = crate::GraphFile::scan(f.path(), false).unwrap();
        assert_eq!(file.degrees().iter().sum::<u64>(), 2 * file.header().m);
        file.validate_symmetry().unwrap();
    }

    #[test]
    fn triangular_indexing() {
        for s in [2u64, 3, 7, 40] {
            let mut idx = 0;
            for i in 0..s {
                for j in (i + 1)..s {
                    assert_eq!(triangular_pair(idx, s), (i, j));
                    idx += 1;
                }
            }
        }
    }

    #[test]
    fn planted_disjoint_blocks() {
        let (g, truth) = planted_partition(4, 40, 0.5, 0.0, 3).unwrap();
        for (u, v, _) in g.edges() {
            assert_eq!(truth[u as usize], truth[v as usize]);
        }
        assert!(planted_partition(3, 40, 0.5, 0.1, 0).is_err());
        assert!(planted_partition(4, 40, 0.1, 0.5, 0).is_err());
    }

    #[test]
    fn planted_edge_count_within_three_sigma() {
        let (k, n, p_in, p_out) = (8usize, 512usize, 0.3, 0.01);
        let s = (n / k) as f64;
        let intra = k as f64 * s * (s - 1.0) / 2.0;
        let inter = (n * (n - 1) / 2) as f64 - intra;
        let mean = intra * p_in + inter * p_out;
        let sd = (intra * p_in * (1.0 - p_in) + inter * p_out * (1.0 - p_out)).sqrt();
        for seed in 0..5 {
            let (g, _) = planted_partition(k, n, p_in, p_out, seed).unwrap();
            let m = g.edge_count() as f64;
            assert!(
                (m - mean).abs() <= 3.0 * sd,
                "seed {seed}: m={m}, mean={mean}, sd={sd}"
            );
        }
    }

    #[test]
    fn planted_is_seed_deterministic() {
        let a = planted_partition(4, 100, 0.2, 0.02, 9).unwrap();
        let b = planted_partition(4, 100, 0.2, 0.02, 9).unwrap();
        let c = planted_partition(4, 100, 0.2, 0.02, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn audit_matches_core() {
        let f = tempfile::NamedTempFile::new().unwrap();
        let t = Graph::from_edges(3, &[(0, 1, 1), (1, 2, 1), (0, 2, 1)]);
        write_metis(f.path(), &t).unwrap();
        assert_eq!(audit_modularity(&[4, 4, 4], f.path()).unwrap(), 0.0);
        assert!((audit_modularity(&[0, 1, 2], f.path()).unwrap() + 1.0 / 3.0).abs() < 1e-12);

        for seed in 0..20 {
            let g = random_weighted_graph(30, 0.2, 1..=5, seed);
            write_metis(f.path(), &g).unwrap();
            let file = crate::GraphFile::scan(f.path(), false).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let labels: Vec<ClusterId> = (0..30).map(|_| rng.random_range(0..30)).collect();
            let state = ClusteringState::from_assignments(
                labels.clone(),
                file.degrees(),
                file.total_weight(),
            );
            let core = state.modularity(file.stream().unwrap()).unwrap();
            let audit = audit_modularity(&labels, f.path()).unwrap();
            assert!((core - audit).abs() < 1e-9);
        }
    }

    #[test]
    fn stats_rendering() {
        let stats = RunStats {
            mode: "light".into(),
            n: 3,
            m: 3,
            modularity: 0.0,
            clusters: 1,
            phase_seconds: PhaseSeconds {
                stream: Some(0.5),
                ..Default::default()
            },
            total_seconds: 0.6,
            peak_memory_bytes: None,
            ls_rounds: 0,
            nmi: None,
            nmi_normalization: None,
            audit_modularity: None,
        };
        let json: serde_json::Value = serde_json::from_str(&stats.to_json()).unwrap();
        assert_eq!(json["phase_seconds"]["stream"], 0.5);
        assert!(json["phase_seconds"].get("evo").is_none());
        assert!(json.get("nmi").is_none());
        assert!(stats.to_kv_line().starts_with("mode=light n=3 m=3"));
    }
}
