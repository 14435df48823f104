//! Subgraph plans: one induced, renormalized block shared by all layers.

use alloc::vec::Vec;

use super::{BatchPlan, Block};
use crate::adjacency::NormSpec;
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Induces `nodes` in `g`, renormalizes the subgraph with `norm` and shares
/// the result across `depth` layers. Node ids in the plan are sorted.
pub fn subgraph_batch(g: &Graph, norm: NormSpec, nodes: &[usize], depth: usize) -> Result<BatchPlan> {
    if nodes.is_empty() {
        return Err(Error::EmptyBatch("subgraph_batch"));
    }
    let (sub, ids) = g.induced_subgraph(nodes)?;
    let a = norm.apply(&sub);
    let s = a.structure();
    let block = Block::new(
        ids.len(),
        s.row_offsets().to_vec(),
        s.col_indices().to_vec(),
        a.values().to_vec(),
        Some((0..ids.len()).collect::<Vec<_>>()),
    )?;
    BatchPlan::shared(ids, block, depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjacency::{NormKind, NormalizedAdjacency};

    fn graph() -> Graph {
        Graph::from_edges(&[(0, 1), (1, 2), (2, 3), (3, 0), (1, 3), (4, 2)], 5, true).unwrap()
    }

    #[test]
    fn whole_node_set_reproduces_full_adjacency() {
        let g = graph();
        let plan = subgraph_batch(&g, NormSpec::GCN, &[4, 3, 2, 1, 0], 3).unwrap();
        assert_eq!(plan.depth(), 3);
        assert_eq!(plan.nodes(0), &[0, 1, 2, 3, 4]);
        let full = NormalizedAdjacency::new(&g, NormKind::Sym, true).to_dense();
        assert_eq!(plan.block(0).to_dense(), full);
    }

    #[test]
    fn layers_share_nodes_and_block_values_are_renormalized() {
        let g = graph();
        let spec = NormSpec {
            kind: NormKind::Row,
            self_loops: false,
        };
        let plan = subgraph_batch(&g, spec, &[1, 2, 3], 2).unwrap();
        assert!(plan.is_shared());
        for l in 0..=2 {
            assert_eq!(plan.nodes(l), &[1, 2, 3]);
        }
        let (sub, _) = g.induced_subgraph(&[1, 2, 3]).unwrap();
        let oracle = NormalizedAdjacency::new(&sub, NormKind::Row, false).to_dense();
        assert!(plan.block(1).to_dense().max_abs_diff(&oracle) < 1e-12);
        assert!(subgraph_batch(&g, spec, &[], 2).is_err());
        assert_eq!(plan.global_edges().len(), sub.num_edges());
    }
}
