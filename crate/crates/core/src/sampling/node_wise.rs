//! Fixed-fanout uniform neighbor sampling.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{BatchPlan, Block};
use crate::adjacency::NormalizedAdjacency;
use crate::error::{Error, Result};

const ABSENT: usize = usize::MAX;

/// Samples a depth-`depth` plan rooted at `seeds`.
///
/// Every node of `B_l` keeps up to `fanout` of its neighbors in `a`, drawn
/// uniformly without replacement (all of them when the degree is at most
/// `fanout`). `B_{l+1}` starts with `B_l` in order, followed by newly reached
/// neighbors in first-seen order. Block weights are the entries of `a`.
pub fn node_wise_sample<R: Rng + ?Sized>(
    a: &NormalizedAdjacency,
    seeds: &[usize],
    fanout: usize,
    depth: usize,
    rng: &mut R,
) -> Result<BatchPlan> {
    if seeds.is_empty() {
        return Err(Error::EmptyBatch("node_wise_sample"));
    }
    let n = a.num_nodes();
    if let Some(&v) = seeds.iter().find(|&&v| v >= n) {
        return Err(Error::NodeOutOfRange { node: v, num_nodes: n });
    }
    let mut position = vec![ABSENT; n];
    let mut nodes = Vec::with_capacity(depth + 1);
    let mut blocks = Vec::with_capacity(depth);
    let mut current: Vec<usize> = Vec::with_capacity(seeds.len());
    for &v in seeds {
        if position[v] == ABSENT {
            position[v] = current.len();
            current.push(v);
        }
    }
    let mut picked = Vec::new();
    for _ in 0..depth {
        let mut next = current.clone();
        let mut row_offsets = Vec::with_capacity(current.len() + 1);
        row_offsets.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for &u in &current {
            let (nbrs, weights) = a.row(u);
            picked.clear();
            if nbrs.len() <= fanout {
                picked.extend(0..nbrs.len());
            } else {
                picked.extend(rand::seq::index::sample(rng, nbrs.len(), fanout).iter());
                picked.sort_unstable();
            }
            for &k in &picked {
                let v = nbrs[k];
                if position[v] == ABSENT {
                    position[v] = next.len();
                    next.push(v);
                }
                cols.push(position[v]);
                vals.push(weights[k]);
            }
            row_offsets.push(cols.len());
        }
        let self_index = (0..current.len()).collect();
        blocks.push(Block::new(next.len(), row_offsets, cols, vals, Some(self_index))?);
        // positions are relative to `next`, which extends `current`
        nodes.push(core::mem::replace(&mut current, next));
    }
    nodes.push(current);
    BatchPlan::stacked(nodes, blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjacency::NormKind;
    use crate::graph::Graph;
    use crate::rng;

    fn star(leaves: usize) -> Graph {
        let e: Vec<_> = (1..=leaves).map(|v| (0, v)).collect();
        Graph::from_edges(&e, leaves + 1, true).unwrap()
    }

    #[test]
    fn star_center_draws_exactly_fanout_leaves() {
        let a = NormalizedAdjacency::new(&star(6), NormKind::Row, false);
        let mut r = rng::stream(3, 0);
        let plan = node_wise_sample(&a, &[0], 2, 1, &mut r).unwrap();
        assert_eq!(plan.nodes(1).len(), 3);
        assert_eq!(plan.nodes(1)[0], 0);
        assert!(plan.nodes(1)[1..].iter().all(|&v| v >= 1));
        assert_eq!(plan.block(0).num_entries(), 2);
    }

    #[test]
    fn large_fanout_takes_whole_neighborhood() {
        let g = Graph::from_edges(&[(0, 1), (1, 2), (2, 3), (3, 4), (1, 4)], 5, true).unwrap();
        let a = NormalizedAdjacency::new(&g, NormKind::Sym, true);
        let mut r = rng::stream(1, 0);
        let plan = node_wise_sample(&a, &[0], g.max_degree() + 1, 2, &mut r).unwrap();
        let mut b1 = plan.nodes(1).to_vec();
        b1.sort_unstable();
        assert_eq!(b1, vec![0, 1]);
        let mut b2 = plan.nodes(2).to_vec();
        b2.sort_unstable();
        assert_eq!(b2, vec![0, 1, 2, 4]);
        for (t, s) in plan.global_edges() {
            assert!(a.structure().has_edge(t, s));
        }
    }

    #[test]
    fn uniform_inclusion_frequency() {
        let a = NormalizedAdjacency::new(&star(5), NormKind::Row, false);
        let mut r = rng::stream(17, 0);
        let trials = 100_000;
        let mut hits = [0usize; 6];
        for _ in 0..trials {
            let plan = node_wise_sample(&a, &[0], 2, 1, &mut r).unwrap();
            for &v in &plan.nodes(1)[1..] {
                hits[v] += 1;
            }
        }
        for &h in &hits[1..] {
            let f = h as f64 / trials as f64;
            assert!((f - 0.4).abs() < 0.01, "{f}");
        }
    }

    #[test]
    fn empty_seeds_are_rejected() {
        let a = NormalizedAdjacency::new(&star(2), NormKind::Row, false);
        assert!(node_wise_sample(&a, &[], 2, 1, &mut rng::stream(0, 0)).is_err());
    }
}
