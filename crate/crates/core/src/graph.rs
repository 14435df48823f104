//! Compressed sparse row graph storage.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

const ABSENT: usize = usize::MAX;

/// Immutable CSR adjacency. Column indices within a row are sorted and
/// unique. Node ids are `usize`, 64 bits wide on every supported target.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    num_nodes: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    is_symmetric: bool,
}

impl Graph {
    /// Builds a graph from an edge list. With `symmetrize`, the reverse of
    /// every edge is added before deduplication.
    pub fn from_edges(edges: &[(usize, usize)], num_nodes: usize, symmetrize: bool) -> Result<Self> {
        if let Some(&(u, v)) = edges.iter().find(|&&(u, v)| u >= num_nodes || v >= num_nodes) {
            return Err(Error::EdgeOutOfRange(u, v, num_nodes));
        }
        let mut degree = vec![0usize; num_nodes];
        for &(u, v) in edges {
            degree[u] += 1;
            if symmetrize && u != v {
                degree[v] += 1;
            }
        }
        let mut row_offsets = Vec::with_capacity(num_nodes + 1);
        row_offsets.push(0);
        for d in &degree {
            row_offsets.push(row_offsets.last().unwrap() + d);
        }
        let mut fill = row_offsets[..num_nodes].to_vec();
        let mut cols = vec![0usize; *row_offsets.last().unwrap()];
        for &(u, v) in edges {
            cols[fill[u]] = v;
            fill[u] += 1;
            if symmetrize && u != v {
                cols[fill[v]] = u;
                fill[v] += 1;
            }
        }
        Ok(Self::from_unsorted_rows(num_nodes, &row_offsets, cols))
    }

    /// Sorts and deduplicates every row of a raw CSR buffer.
    fn from_unsorted_rows(num_nodes: usize, offsets: &[usize], mut cols: Vec<usize>) -> Self {
        let mut row_offsets = Vec::with_capacity(num_nodes + 1);
        row_offsets.push(0);
        let mut write = 0;
        for v in 0..num_nodes {
            let row = &mut cols[offsets[v]..offsets[v + 1]];
            row.sort_unstable();
            let mut last = ABSENT;
            for k in offsets[v]..offsets[v + 1] {
                let c = cols[k];
                if c != last {
                    cols[write] = c;
                    write += 1;
                    last = c;
                }
            }
            row_offsets.push(write);
        }
        cols.truncate(write);
        let mut g = Self {
            num_nodes,
            row_offsets,
            col_indices: cols,
            is_symmetric: false,
        };
        g.is_symmetric = g.check_symmetric();
        g
    }

    /// Wraps an already sorted, deduplicated CSR buffer.
    pub fn from_csr(num_nodes: usize, row_offsets: Vec<usize>, col_indices: Vec<usize>) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidConfig(alloc::format!("CSR: {msg}"));
        if row_offsets.len() != num_nodes + 1 || row_offsets[0] != 0 {
            return Err(bad("row_offsets must have num_nodes + 1 entries starting at 0"));
        }
        if *row_offsets.last().unwrap() != col_indices.len() {
            return Err(bad("row_offsets must end at num_edges"));
        }
        for v in 0..num_nodes {
            if row_offsets[v] > row_offsets[v + 1] {
                return Err(bad("row_offsets must be non-decreasing"));
            }
            let row = &col_indices[row_offsets[v]..row_offsets[v + 1]];
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(bad("rows must be strictly increasing"));
            }
            if let Some(&c) = row.last() {
                if c >= num_nodes {
                    return Err(Error::EdgeOutOfRange(v, c, num_nodes));
                }
            }
        }
        let mut g = Self {
            num_nodes,
            row_offsets,
            col_indices,
            is_symmetric: false,
        };
        g.is_symmetric = g.check_symmetric();
        Ok(g)
    }

    pub fn empty(num_nodes: usize) -> Self {
        Self {
            num_nodes,
            row_offsets: vec![0; num_nodes + 1],
            col_indices: Vec::new(),
            is_symmetric: true,
        }
    }

    fn check_symmetric(&self) -> bool {
        (0..self.num_nodes).all(|u| self.neighbors(u).iter().all(|&v| self.has_edge(v, u)))
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of stored (directed) entries.
    #[inline]
    pub fn num_edges(&self) -> usize {
        self.col_indices.len()
    }

    #[inline]
    pub fn is_symmetric(&self) -> bool {
        self.is_symmetric
    }

    #[inline]
    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    #[inline]
    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[v]..self.row_offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.row_offsets[v + 1] - self.row_offsets[v]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.num_nodes).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Position of `(u, v)` in `col_indices`, if stored.
    pub fn edge_index(&self, u: usize, v: usize) -> Option<usize> {
        self.neighbors(u)
            .binary_search(&v)
            .ok()
            .map(|k| self.row_offsets[u] + k)
    }

    /// Iterates over stored `(u, v)` entries in CSR order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes).flat_map(move |u| self.neighbors(u).iter().map(move |&v| (u, v)))
    }

    /// Number of stored entries with `u == v`.
    pub fn num_self_loops(&self) -> usize {
        (0..self.num_nodes).filter(|&v| self.has_edge(v, v)).count()
    }

    /// Returns a copy where every node has the edge `(v, v)`. Idempotent.
    pub fn add_self_loops(&self) -> Graph {
        let n = self.num_nodes;
        let mut row_offsets = Vec::with_capacity(n + 1);
        row_offsets.push(0);
        let mut cols = Vec::with_capacity(self.num_edges() + n);
        for v in 0..n {
            let row = self.neighbors(v);
            let split = row.partition_point(|&c| c < v);
            cols.extend_from_slice(&row[..split]);
            cols.push(v);
            let rest = &row[split..];
            cols.extend_from_slice(if rest.first() == Some(&v) { &rest[1..] } else { rest });
            row_offsets.push(cols.len());
        }
        Graph {
            num_nodes: n,
            row_offsets,
            col_indices: cols,
            is_symmetric: self.is_symmetric,
        }
    }

    /// Subgraph on `nodes` (deduplicated and sorted), keeping exactly the
    /// edges with both endpoints inside. Returns the subgraph and the
    /// new-to-old index map.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<(Graph, Vec<usize>)> {
        let mut keep = nodes.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if let Some(&v) = keep.last() {
            if v >= self.num_nodes {
                return Err(Error::NodeOutOfRange {
                    node: v,
                    num_nodes: self.num_nodes,
                });
            }
        }
        let mut old_to_new = vec![ABSENT; self.num_nodes];
        for (new, &old) in keep.iter().enumerate() {
            old_to_new[old] = new;
        }
        let mut row_offsets = Vec::with_capacity(keep.len() + 1);
        row_offsets.push(0);
        let mut cols = Vec::new();
        for &old in &keep {
            // neighbors are sorted and the relabeling is monotone, so rows stay sorted
            cols.extend(
                self.neighbors(old)
                    .iter()
                    .map(|&c| old_to_new[c])
                    .filter(|&c| c != ABSENT),
            );
            row_offsets.push(cols.len());
        }
        let mut g = Graph {
            num_nodes: keep.len(),
            row_offsets,
            col_indices: cols,
            is_symmetric: self.is_symmetric,
        };
        if !self.is_symmetric {
            g.is_symmetric = g.check_symmetric();
        }
        Ok((g, keep))
    }
}
