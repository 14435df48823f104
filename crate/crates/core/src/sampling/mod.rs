//! Mini-batch samplers and the batch plans they produce.
//!
//! A plan lists node sets `B_0 .. B_K` (global ids) and one sparse block per
//! layer. Block `l` aggregates rows of `B_{l+1}` into rows of `B_l`.
//! Subgraph plans keep a single node set and a single block shared by every
//! layer.

mod layer_wise;
mod node_wise;
mod partition;
mod saint;
mod sampler;
mod subgraph;

pub use layer_wise::{fastgcn_layer_probs, inclusion_probabilities, layer_wise_sample, LayerWiseVariant};
pub use node_wise::node_wise_sample;
pub use partition::{partition_graph, Partitioning};
pub use saint::{random_walk_sample, saint_node_probs, saint_node_sample, EdgeSampler};
pub use sampler::{Sampler, SamplerConfig, SamplerKind};
pub use subgraph::subgraph_batch;

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Sparse aggregation from a source node list into a target node list.
/// Column indices are positions in the source list.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    num_sources: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
    /// Position of each target inside the source list, when every target
    /// is also a source.
    self_index: Option<Vec<usize>>,
}

impl Block {
    pub fn new(
        num_sources: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
        self_index: Option<Vec<usize>>,
    ) -> Result<Self> {
        let bad = row_offsets.first() != Some(&0)
            || row_offsets.last() != Some(&col_indices.len())
            || row_offsets.windows(2).any(|w| w[0] > w[1])
            || values.len() != col_indices.len()
            || col_indices.iter().any(|&c| c >= num_sources)
            || self_index
                .as_ref()
                .is_some_and(|s| s.len() + 1 != row_offsets.len() || s.iter().any(|&c| c >= num_sources));
        if bad {
            return Err(Error::InvalidConfig("malformed sampled block".into()));
        }
        Ok(Self {
            num_sources,
            row_offsets,
            col_indices,
            values,
            self_index,
        })
    }

    #[inline]
    pub fn num_targets(&self) -> usize {
        self.row_offsets.len() - 1
    }

    #[inline]
    pub fn num_sources(&self) -> usize {
        self.num_sources
    }

    #[inline]
    pub fn num_entries(&self) -> usize {
        self.col_indices.len()
    }

    #[inline]
    pub fn self_index(&self) -> Option<&[usize]> {
        self.self_index.as_deref()
    }

    /// Source positions and weights of target row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[a..b], &self.values[a..b])
    }

    /// `block · h`, with `h` holding one row per source.
    pub fn aggregate(&self, h: &Matrix) -> Result<Matrix> {
        if h.rows() != self.num_sources {
            return Err(Error::Shape {
                op: "Block::aggregate",
                expected: (self.num_sources, h.cols()),
                found: h.shape(),
            });
        }
        let mut out = Matrix::zeros(self.num_targets(), h.cols());
        for i in 0..self.num_targets() {
            let (cols, vals) = self.row(i);
            let o = out.row_mut(i);
            for (&c, &w) in cols.iter().zip(vals) {
                for (x, &y) in o.iter_mut().zip(h.row(c)) {
                    *x += w * y;
                }
            }
        }
        Ok(out)
    }

    /// `blockᵀ · g`, with `g` holding one row per target.
    pub fn aggregate_transpose(&self, g: &Matrix) -> Result<Matrix> {
        if g.rows() != self.num_targets() {
            return Err(Error::Shape {
                op: "Block::aggregate_transpose",
                expected: (self.num_targets(), g.cols()),
                found: g.shape(),
            });
        }
        let mut out = Matrix::zeros(self.num_sources, g.cols());
        for i in 0..self.num_targets() {
            let (cols, vals) = self.row(i);
            let src = g.row(i);
            for (&c, &w) in cols.iter().zip(vals) {
                for (x, &y) in out.row_mut(c).iter_mut().zip(src) {
                    *x += w * y;
                }
            }
        }
        Ok(out)
    }

    /// Dense `targets × sources` copy.
    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.num_targets(), self.num_sources);
        for i in 0..self.num_targets() {
            let (cols, vals) = self.row(i);
            for (&c, &w) in cols.iter().zip(vals) {
                m.set(i, c, m.get(i, c) + w);
            }
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Layout {
    /// `nodes[l]` is `B_l`, `blocks[l]` maps `B_{l+1}` to `B_l`.
    Stacked { nodes: Vec<Vec<usize>>, blocks: Vec<Block> },
    /// One node set and one block reused for `depth` layers.
    Shared { nodes: Vec<usize>, block: Block, depth: usize },
}

/// Per-layer node sets and weighted blocks for one mini-batch.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchPlan {
    layout: Layout,
}

impl BatchPlan {
    /// A stacked plan. `nodes` has one more entry than `blocks`.
    pub fn stacked(nodes: Vec<Vec<usize>>, blocks: Vec<Block>) -> Result<Self> {
        if nodes.len() != blocks.len() + 1 {
            return Err(Error::InvalidConfig("plan needs one more node set than blocks".into()));
        }
        for (l, b) in blocks.iter().enumerate() {
            if b.num_targets() != nodes[l].len() || b.num_sources() != nodes[l + 1].len() {
                return Err(Error::Shape {
                    op: "BatchPlan::stacked",
                    expected: (nodes[l].len(), nodes[l + 1].len()),
                    found: (b.num_targets(), b.num_sources()),
                });
            }
        }
        Ok(Self {
            layout: Layout::Stacked { nodes, blocks },
        })
    }

    /// A subgraph plan: every layer shares `nodes` and `block`.
    pub fn shared(nodes: Vec<usize>, block: Block, depth: usize) -> Result<Self> {
        if block.num_targets() != nodes.len() || block.num_sources() != nodes.len() {
            return Err(Error::Shape {
                op: "BatchPlan::shared",
                expected: (nodes.len(), nodes.len()),
                found: (block.num_targets(), block.num_sources()),
            });
        }
        Ok(Self {
            layout: Layout::Shared { nodes, block, depth },
        })
    }

    pub fn depth(&self) -> usize {
        match &self.layout {
            Layout::Stacked { blocks, .. } => blocks.len(),
            Layout::Shared { depth, .. } => *depth,
        }
    }

    pub fn is_shared(&self) -> bool {
        matches!(self.layout, Layout::Shared { .. })
    }

    /// `B_l` as global node ids.
    pub fn nodes(&self, l: usize) -> &[usize] {
        match &self.layout {
            Layout::Stacked { nodes, .. } => &nodes[l],
            Layout::Shared { nodes, .. } => nodes,
        }
    }

    /// Block aggregating `B_{l+1}` into `B_l`.
    pub fn block(&self, l: usize) -> &Block {
        match &self.layout {
            Layout::Stacked { blocks, .. } => &blocks[l],
            Layout::Shared { block, .. } => block,
        }
    }

    /// `B_0`, the nodes whose outputs the plan produces.
    pub fn targets(&self) -> &[usize] {
        self.nodes(0)
    }

    /// `B_K`, the nodes whose input features are read.
    pub fn inputs(&self) -> &[usize] {
        self.nodes(self.depth())
    }

    /// Number of distinct node rows touched across all layers.
    pub fn active_nodes(&self) -> usize {
        match &self.layout {
            Layout::Stacked { nodes, .. } => nodes.iter().map(Vec::len).sum(),
            Layout::Shared { nodes, depth, .. } => nodes.len() * (depth + 1),
        }
    }

    /// Every stored block entry as a global `(target, source)` pair.
    pub fn global_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let layers = match &self.layout {
            Layout::Stacked { blocks, .. } => blocks.len(),
            Layout::Shared { .. } => 1,
        };
        for l in 0..layers {
            let (t, s, b) = (self.nodes(l), self.nodes(l + 1), self.block(l));
            for i in 0..b.num_targets() {
                out.extend(b.row(i).0.iter().map(|&c| (t[i], s[c])));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn block_products_match_dense() {
        let b = Block::new(3, vec![0, 2, 3], vec![0, 2, 1], vec![0.5, 2.0, -1.0], Some(vec![0, 1])).unwrap();
        let h = Matrix::from_fn(3, 2, |i, j| (i * 2 + j) as f64);
        let dense = b.to_dense();
        assert!(b.aggregate(&h).unwrap().max_abs_diff(&dense.matmul(&h).unwrap()) < 1e-15);
        let g = Matrix::from_fn(2, 2, |i, j| i as f64 + j as f64 * 0.1);
        assert!(b.aggregate_transpose(&g).unwrap().max_abs_diff(&dense.t_matmul(&g).unwrap()) < 1e-15);
    }

    #[test]
    fn malformed_blocks_and_plans_are_rejected() {
        assert!(Block::new(2, vec![0, 1], vec![2], vec![1.0], None).is_err());
        assert!(Block::new(2, vec![0, 2], vec![0], vec![1.0], None).is_err());
        let b = Block::new(2, vec![0, 1], vec![1], vec![1.0], None).unwrap();
        assert!(BatchPlan::stacked(vec![vec![0], vec![1, 2]], vec![b.clone()]).is_ok());
        assert!(BatchPlan::stacked(vec![vec![0], vec![1]], vec![b.clone()]).is_err());
        assert!(BatchPlan::shared(vec![0], b, 2).is_err());
    }
}
