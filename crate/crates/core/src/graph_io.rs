// SPDX-License-Identifier: Apache-2.0

//! METIS node streams.
//!
//! A [`NodeStream`] yields one [`NodeRecord`] per adjacency line and records
//! the byte offset of every line it passes. [`GraphFile::scan`] runs that
//! first pass to completion, keeping only Θ(n) state (offsets and weighted
//! degrees), after which any subset of nodes can be re-read by seeking
//! ([`GraphFile::read_nodes_at`]).
//!
//! On disk node ids are 1-based; everything in memory is 0-based.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::{ClusterId, NodeId, Weight};

const READ_BUFFER: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphHeader {
    pub n: usize,
    pub m: u64,
    /// Raw format code; `None` when the header has only two fields.
    pub fmt: Option<u16>,
    /// Number of node weights per line when node weights are present.
    pub ncon: usize,
}

impl GraphHeader {
    pub fn has_node_sizes(&self) -> bool {
        self.fmt.is_some_and(|f| f / 100 % 10 == 1)
    }

    pub fn has_node_weights(&self) -> bool {
        self.fmt.is_some_and(|f| f / 10 % 10 == 1)
    }

    pub fn has_edge_weights(&self) -> bool {
        self.fmt.is_some_and(|f| f % 10 == 1)
    }

    fn parse(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split_ascii_whitespace().collect();
        if fields.len() < 2 || fields.len() > 4 {
            return Err(Error::Header(format!(
                "expected `n m [fmt [ncon]]`, got `{}`",
                line.trim()
            )));
        }
        let n: usize = fields[0]
            .parse()
            .map_err(|_| Error::Header(format!("node count `{}` is not a number", fields[0])))?;
        let m: u64 = fields[1]
            .parse()
            .map_err(|_| Error::Header(format!("edge count `{}` is not a number", fields[1])))?;
        if n == 0 {
            return Err(Error::Header("graph has no nodes".into()));
        }
        if n > NodeId::MAX as usize {
            return Err(Error::Header(format!(
                "{n} nodes exceed the 32-bit id space"
            )));
        }
        let fmt = match fields.get(2) {
            None => None,
            Some(code) => {
                let valid = code.len() <= 3 && code.bytes().all(|b| b == b'0' || b == b'1');
                if !valid {
                    return Err(Error::UnsupportedFormat((*code).to_string()));
                }
                Some(code.parse::<u16>().expect("binary digits"))
            }
        };
        let mut header = GraphHeader { n, m, fmt, ncon: 0 };
        if header.has_node_weights() {
            header.ncon = match fields.get(3) {
                None => 1,
                Some(c) => c
                    .parse()
                    .ok()
                    .filter(|&c: &usize| c >= 1)
                    .ok_or_else(|| Error::Header(format!("invalid ncon `{c}`")))?,
            };
        } else if fields.len() == 4 {
            return Err(Error::Header("ncon given without node weights".into()));
        }
        Ok(header)
    }
}

/// One streamed node and its neighbourhood. Neighbours are sorted by id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NodeRecord {
    pub id: NodeId,
    pub neighbors: Vec<(NodeId, Weight)>,
    pub weighted_degree: Weight,
}

impl NodeRecord {
    pub fn degree(&self) -> usize {
        self.neighbors.len()
    }
}

/// Counters for what sanitization changed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SanitizeStats {
    pub self_loops_dropped: u64,
    pub parallel_edges_merged: u64,
}

/// Byte offset of every adjacency line, one machine word per node.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeOffsetIndex {
    offsets: Vec<u64>,
}

impl NodeOffsetIndex {
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn offset(&self, v: NodeId) -> Option<u64> {
        self.offsets.get(v as usize).copied()
    }

    pub fn offsets(&self) -> &[u64] {
        &self.offsets
    }
}

/// Per-line counts that feed the edge-count consistency check.
#[derive(Debug, Clone, Copy, Default)]
struct LineCounts {
    raw_entries: u64,
    self_loops: u64,
    merged: u64,
}

/// Parses one adjacency line into `record`, reusing its neighbour buffer.
fn parse_adjacency(
    line: &str,
    id: usize,
    header: &GraphHeader,
    sanitize: bool,
    record: &mut NodeRecord,
) -> Result<LineCounts> {
    let n = header.n as u64;
    let mut tokens = line.split_ascii_whitespace();
    let mut skip = usize::from(header.has_node_sizes());
    if header.has_node_weights() {
        skip += header.ncon;
    }
    // Node sizes and weights are validated as numbers and otherwise ignored.
    for _ in 0..skip {
        let tok = tokens
            .next()
            .ok_or_else(|| Error::parse(id, "missing node weight"))?;
        tok.parse::<u64>()
            .map_err(|_| Error::parse(id, format!("non-numeric node weight `{tok}`")))?;
    }

    record.id = id as NodeId;
    record.neighbors.clear();
    let mut counts = LineCounts::default();
    let weighted = header.has_edge_weights();
    while let Some(tok) = tokens.next() {
        let neighbor: u64 = tok
            .parse()
            .map_err(|_| Error::parse(id, format!("non-numeric token `{tok}`")))?;
        let weight: Weight = if weighted {
            let wtok = tokens.next().ok_or_else(|| {
                Error::parse(id, format!("neighbor {neighbor} has no edge weight"))
            })?;
            wtok.parse()
                .map_err(|_| Error::parse(id, format!("non-numeric edge weight `{wtok}`")))?
        } else {
            1
        };
        if neighbor == 0 || neighbor > n {
            return Err(Error::NeighborOutOfRange {
                node: id as u64,
                neighbor,
                n,
            });
        }
        if weight == 0 {
            return Err(Error::parse(
                id,
                format!("zero weight on edge to {neighbor}"),
            ));
        }
        counts.raw_entries += 1;
        let neighbor = (neighbor - 1) as NodeId;
        if neighbor as usize == id {
            if !sanitize {
                return Err(Error::SelfLoop(id as u64));
            }
            counts.self_loops += 1;
            continue;
        }
        record.neighbors.push((neighbor, weight));
    }

    record.neighbors.sort_unstable_by_key(|&(u, _)| u);
    let mut write = 0;
    for read in 0..record.neighbors.len() {
        let (u, w) = record.neighbors[read];
        if write > 0 && record.neighbors[write - 1].0 == u {
            if !sanitize {
                return Err(Error::ParallelEdge {
                    node: id as u64,
                    neighbor: u as u64 + 1,
                });
            }
            record.neighbors[write - 1].1 += w;
            counts.merged += 1;
        } else {
            record.neighbors[write] = (u, w);
            write += 1;
        }
    }
    record.neighbors.truncate(write);
    record.weighted_degree = record.neighbors.iter().map(|&(_, w)| w).sum();
    Ok(counts)
}

/// Reads lines and tracks the byte position of the next unread byte.
struct LineReader {
    reader: BufReader<File>,
    pos: u64,
    buf: String,
}

impl LineReader {
    fn open(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        Ok(LineReader {
            reader: BufReader::with_capacity(READ_BUFFER, file),
            pos: 0,
            buf: String::new(),
        })
    }

    /// Returns the offset of the line now in `buf`, or `None` at EOF.
    fn next_line(&mut self) -> Result<Option<u64>> {
        self.buf.clear();
        let start = self.pos;
        let read = self.reader.read_line(&mut self.buf)?;
        if read == 0 {
            return Ok(None);
        }
        self.pos += read as u64;
        Ok(Some(start))
    }

    fn seek_to(&mut self, offset: u64) -> Result<()> {
        let delta = offset as i64 - self.pos as i64;
        if delta != 0 {
            // Forward seeks within the buffer keep it.
            self.reader.seek_relative(delta)?;
            self.pos = offset;
        }
        Ok(())
    }

    fn is_comment(&self) -> bool {
        self.buf.starts_with('%')
    }
}

/// Sequential pass over a METIS file.
pub struct NodeStream {
    lines: LineReader,
    header: GraphHeader,
    sanitize: bool,
    next_id: usize,
    offsets: Vec<u64>,
    record_offsets: bool,
    raw_entries: u64,
    clean_entries: u64,
    stats: SanitizeStats,
    finished: bool,
}

impl NodeStream {
    /// Opens `path` and parses its header. The stream is positioned at node 0.
    pub fn open(path: impl AsRef<Path>, sanitize: bool) -> Result<Self> {
        let mut lines = LineReader::open(path.as_ref())?;
        let header = loop {
            match lines.next_line()? {
                None => return Err(Error::Header("file has no header line".into())),
                Some(_) if lines.is_comment() || lines.buf.trim().is_empty() => continue,
                Some(_) => break GraphHeader::parse(&lines.buf)?,
            }
        };
        Ok(NodeStream {
            lines,
            header,
            sanitize,
            next_id: 0,
            offsets: Vec::new(),
            record_offsets: true,
            raw_entries: 0,
            clean_entries: 0,
            stats: SanitizeStats::default(),
            finished: false,
        })
    }

    fn without_offsets(mut self) -> Self {
        self.record_offsets = false;
        self
    }

    pub fn header(&self) -> &GraphHeader {
        &self.header
    }

    pub fn sanitize_stats(&self) -> SanitizeStats {
        self.stats
    }

    /// Number of node records returned so far.
    pub fn records_read(&self) -> u64 {
        self.next_id as u64
    }

    /// Reads the next node into `record`. Returns `false` at end of stream,
    /// after validating the node and edge counts against the header.
    pub fn next_into(&mut self, record: &mut NodeRecord) -> Result<bool> {
        if self.finished {
            return Ok(false);
        }
        loop {
            let Some(offset) = self.lines.next_line()? else {
                return self.finish().map(|_| false);
            };
            if self.lines.is_comment() {
                continue;
            }
            if self.next_id == self.header.n {
                if self.lines.buf.trim().is_empty() {
                    continue;
                }
                return Err(Error::NodeCountMismatch {
                    expected: self.header.n as u64,
                    found: self.header.n as u64 + 1,
                });
            }
            let id = self.next_id;
            let counts = parse_adjacency(&self.lines.buf, id, &self.header, self.sanitize, record)?;
            self.raw_entries += counts.raw_entries;
            self.clean_entries += record.neighbors.len() as u64;
            self.stats.self_loops_dropped += counts.self_loops;
            self.stats.parallel_edges_merged += counts.merged;
            if self.record_offsets {
                self.offsets.push(offset);
            }
            self.next_id += 1;
            return Ok(true);
        }
    }

    /// Allocating convenience wrapper over [`NodeStream::next_into`].
    pub fn next_node(&mut self) -> Result<Option<NodeRecord>> {
        let mut record = NodeRecord::default();
        Ok(self.next_into(&mut record)?.then_some(record))
    }

    fn finish(&mut self) -> Result<()> {
        if self.next_id != self.header.n {
            return Err(Error::NodeCountMismatch {
                expected: self.header.n as u64,
                found: self.next_id as u64,
            });
        }
        let expected = 2 * self.header.m;
        // A sanitized file may count its edges before or after cleaning.
        let consistent =
            self.raw_entries == expected || (self.sanitize && self.clean_entries == expected);
        if !consistent {
            return Err(Error::EdgeCountMismatch {
                expected: self.header.m,
                found: self.raw_entries,
            });
        }
        if self.stats.self_loops_dropped > 0 || self.stats.parallel_edges_merged > 0 {
            log::warn!(
                "sanitized input: dropped {} self-loops, merged {} parallel edges",
                self.stats.self_loops_dropped,
                self.stats.parallel_edges_merged
            );
        }
        self.finished = true;
        Ok(())
    }

    /// Hands over the offset index. Fails unless the pass reached the end.
    pub fn into_index(self) -> Result<NodeOffsetIndex> {
        if !self.finished || !self.record_offsets {
            return Err(Error::IndexNotBuilt {
                read: self.offsets.len() as u64,
                n: self.header.n as u64,
            });
        }
        Ok(NodeOffsetIndex {
            offsets: self.offsets,
        })
    }
}

impl Iterator for NodeStream {
    type Item = Result<NodeRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_node().transpose()
    }
}

/// A METIS file after one validating pass: header, offset index, weighted
/// degrees and total edge weight.
#[derive(Debug, Clone)]
pub struct GraphFile {
    path: PathBuf,
    header: GraphHeader,
    sanitize: bool,
    index: NodeOffsetIndex,
    degrees: Vec<Weight>,
    total_weight: Weight,
    stats: SanitizeStats,
}

impl GraphFile {
    pub fn scan(path: impl AsRef<Path>, sanitize: bool) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut stream = NodeStream::open(&path, sanitize)?;
        let header = *stream.header();
        let mut degrees = Vec::with_capacity(header.n);
        let mut record = NodeRecord::default();
        while stream.next_into(&mut record)? {
            degrees.push(record.weighted_degree);
        }
        let stats = stream.sanitize_stats();
        let index = stream.into_index()?;
        let twice: Weight = degrees.iter().sum();
        if !twice.is_multiple_of(2) {
            return Err(Error::OddWeightTotal(twice));
        }
        Ok(GraphFile {
            path,
            header,
            sanitize,
            index,
            degrees,
            total_weight: twice / 2,
            stats,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn header(&self) -> &GraphHeader {
        &self.header
    }

    pub fn n(&self) -> usize {
        self.header.n
    }

    /// Total undirected edge weight `m`.
    pub fn total_weight(&self) -> Weight {
        self.total_weight
    }

    pub fn degrees(&self) -> &[Weight] {
        &self.degrees
    }

    pub fn index(&self) -> &NodeOffsetIndex {
        &self.index
    }

    pub fn sanitize_stats(&self) -> SanitizeStats {
        self.stats
    }

    /// A fresh sequential pass over every node.
    pub fn stream(&self) -> Result<NodeStream> {
        Ok(NodeStream::open(&self.path, self.sanitize)?.without_offsets())
    }

    /// Re-reads the given nodes by seeking to their stored offsets. `ids`
    /// must be strictly ascending.
    pub fn read_nodes_at<'a>(&'a self, ids: &'a [NodeId]) -> Result<NodeReader<'a>> {
        if let Some(&bad) = ids.iter().find(|&&v| v as usize >= self.header.n) {
            return Err(Error::NodeOutOfRange {
                id: bad as u64,
                n: self.header.n as u64,
            });
        }
        if ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::UnsortedIds);
        }
        Ok(NodeReader {
            file: self,
            lines: LineReader::open(&self.path)?,
            ids,
            next: 0,
        })
    }

    /// Checks that every edge is listed at both endpoints with equal weight.
    /// Holds all edges in memory; intended for small files.
    pub fn validate_symmetry(&self) -> Result<()> {
        let mut forward = Vec::new();
        let mut stream = self.stream()?;
        let mut record = NodeRecord::default();
        while stream.next_into(&mut record)? {
            for &(u, w) in &record.neighbors {
                forward.push((record.id, u, w));
            }
        }
        let mut backward: Vec<_> = forward.iter().map(|&(v, u, w)| (u, v, w)).collect();
        forward.sort_unstable();
        backward.sort_unstable();
        match forward.iter().zip(&backward).find(|(a, b)| a != b) {
            None => Ok(()),
            Some((a, _)) => Err(Error::Asymmetric(a.0 as u64, a.1 as u64)),
        }
    }
}

/// Iterator over selectively re-read node records.
pub struct NodeReader<'a> {
    file: &'a GraphFile,
    lines: LineReader,
    ids: &'a [NodeId],
    next: usize,
}

impl NodeReader<'_> {
    /// Records returned so far.
    pub fn records_read(&self) -> u64 {
        self.next as u64
    }

    pub fn next_into(&mut self, record: &mut NodeRecord) -> Result<bool> {
        let Some(&id) = self.ids.get(self.next) else {
            return Ok(false);
        };
        let offset = self.file.index.offsets[id as usize];
        self.lines.seek_to(offset)?;
        if self.lines.next_line()?.is_none() {
            return Err(Error::parse(id as usize, "offset points past end of file"));
        }
        parse_adjacency(
            &self.lines.buf,
            id as usize,
            &self.file.header,
            self.file.sanitize,
            record,
        )?;
        self.next += 1;
        Ok(true)
    }
}

impl Iterator for NodeReader<'_> {
    type Item = Result<NodeRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut record = NodeRecord::default();
        self.next_into(&mut record)
            .map(|more| more.then_some(record))
            .transpose()
    }
}

/// Writes one cluster id per line; line `v` holds the cluster of node `v`.
pub fn write_clustering(path: impl AsRef<Path>, assignments: &[ClusterId]) -> Result<()> {
    assert!(!assignments.is_empty(), "graphs have at least one node");
    let mut out = BufWriter::new(File::create(path)?);
    for c in assignments {
        writeln!(out, "{c}")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a clustering or ground-truth file: one integer label per line.
pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<u64>> {
    let reader = BufReader::new(File::open(path)?);
    let mut labels = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        labels.push(
            t.parse()
                .map_err(|_| Error::parse(i, format!("label `{t}` is not an integer")))?,
        );
    }
    Ok(labels)
}

/// Reads a clustering written by [`write_clustering`].
pub fn read_clustering(path: impl AsRef<Path>) -> Result<Vec<ClusterId>> {
    read_labels(path)?
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            ClusterId::try_from(c).map_err(|_| Error::parse(i, format!("cluster id {c} too large")))
        })
        .collect()
}

/// Writes an in-memory graph in METIS format. Unit-weight graphs without
/// self-loops are written unweighted; otherwise edge weights are emitted and
/// each self-loop appears once in its own node's line with its stored weight.
/// Files with self-loops are for inspection; reading them back needs sanitize.
pub fn write_metis(path: impl AsRef<Path>, graph: &Graph) -> Result<()> {
    let n = graph.n();
    let has_loops = (0..n).any(|v| graph.self_loop(v as NodeId) > 0);
    let weighted = has_loops || (0..n).any(|v| graph.neighbors(v as NodeId).any(|(_, w)| w != 1));
    let loops = (0..n).filter(|&v| graph.self_loop(v as NodeId) > 0).count();
    let m = graph.edge_count() + loops;

    let mut out = BufWriter::with_capacity(READ_BUFFER, File::create(path)?);
    if weighted {
        writeln!(out, "{n} {m} 1")?;
    } else {
        writeln!(out, "{n} {m}")?;
    }
    let mut line = String::new();
    for v in 0..n as NodeId {
        line.clear();
        let mut entries = graph.neighbors(v).collect::<Vec<_>>();
        if graph.self_loop(v) > 0 {
            entries.push((v, graph.self_loop(v)));
            entries.sort_unstable();
        }
        for (i, (u, w)) in entries.into_iter().enumerate() {
            if i > 0 {
                line.push(' ');
            }
            if weighted {
                line.push_str(&format!("{} {}", u + 1, w));
            } else {
                line.push_str(&(u + 1).to_string());
            }
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}
