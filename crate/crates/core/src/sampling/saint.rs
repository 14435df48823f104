//! Subgraph samplers: node, edge and random-walk.

use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use super::layer_wise::normalize;
use crate::adjacency::NormalizedAdjacency;
use crate::error::{Error, Result};
use crate::graph::Graph;

/// `P(u) ∝ ||Â(:, u)||²`, normalized to sum to one.
pub fn saint_node_probs(a: &NormalizedAdjacency) -> Result<Vec<f64>> {
    normalize(a.col_sq_norms(), "saint_node_probs")
}

/// Draws `batch_size` nodes independently from `probs` and returns the
/// distinct ones, sorted.
pub fn saint_node_sample<R: Rng + ?Sized>(probs: &[f64], batch_size: usize, rng: &mut R) -> Result<Vec<usize>> {
    let dist = WeightedIndex::new(probs).map_err(|_| Error::DegenerateDistribution("saint_node_sample"))?;
    let mut nodes: Vec<usize> = (0..batch_size).map(|_| dist.sample(rng)).collect();
    nodes.sort_unstable();
    nodes.dedup();
    Ok(nodes)
}

/// Edge sampler with `P(u, v) ∝ 1/deg(u) + 1/deg(v)` over the non-loop
/// edges of a graph, each undirected edge counted once.
#[derive(Clone, Debug)]
pub struct EdgeSampler {
    edges: Vec<(usize, usize)>,
    probs: Vec<f64>,
    dist: WeightedIndex<f64>,
}

impl EdgeSampler {
    pub fn new(g: &Graph) -> Result<Self> {
        let edges: Vec<(usize, usize)> = g
            .edges()
            .filter(|&(u, v)| u != v && (!g.is_symmetric() || u < v))
            .collect();
        let weights: Vec<f64> = edges
            .iter()
            .map(|&(u, v)| 1.0 / g.degree(u) as f64 + 1.0 / g.degree(v).max(1) as f64)
            .collect();
        let dist = WeightedIndex::new(&weights).map_err(|_| Error::DegenerateDistribution("EdgeSampler"))?;
        let probs = normalize(weights, "EdgeSampler")?;
        Ok(Self { edges, probs, dist })
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Normalized edge probabilities, aligned with [`EdgeSampler::edges`].
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample_edge<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.dist.sample(rng)
    }

    /// Draws `batch_size` edges independently and returns all endpoints,
    /// distinct and sorted.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Vec<usize> {
        let mut nodes = Vec::with_capacity(2 * batch_size);
        for _ in 0..batch_size {
            let (u, v) = self.edges[self.sample_edge(rng)];
            nodes.push(u);
            nodes.push(v);
        }
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }
}

/// `num_roots` uniform roots, each followed by `walk_length` uniform
/// neighbor steps. A walk stops early at a node without neighbors. Returns
/// the distinct visited nodes, sorted.
pub fn random_walk_sample<R: Rng + ?Sized>(g: &Graph, num_roots: usize, walk_length: usize, rng: &mut R) -> Vec<usize> {
    let n = g.num_nodes();
    if n == 0 {
        return Vec::new();
    }
    let mut nodes = Vec::with_capacity(num_roots * (walk_length + 1));
    for _ in 0..num_roots {
        let mut v = rng.random_range(0..n);
        nodes.push(v);
        for _ in 0..walk_length {
            let nbrs = g.neighbors(v);
            if nbrs.is_empty() {
                break;
            }
            v = nbrs[rng.random_range(0..nbrs.len())];
            nodes.push(v);
        }
    }
    nodes.sort_unstable();
    nodes.dedup();
    nodes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjacency::NormKind;
    use crate::rng;
    use alloc::vec;
    use alloc::vec::Vec;

    fn tv(counts: &[usize], probs: &[f64], total: usize) -> f64 {
        0.5 * counts
            .iter()
            .zip(probs)
            .map(|(&c, &p)| (c as f64 / total as f64 - p).abs())
            .sum::<f64>()
    }

    #[test]
    fn node_probs_equal_row_probs_under_symmetry() {
        let g = Graph::from_edges(&[(0, 1), (1, 2), (2, 3), (1, 3)], 4, true).unwrap();
        let a = NormalizedAdjacency::new(&g, NormKind::Sym, true);
        let p = saint_node_probs(&a).unwrap();
        let q = super::super::fastgcn_layer_probs(&a).unwrap();
        for (x, y) in p.iter().zip(&q) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn directed_column_norms_by_hand() {
        // 0->1, 0->2, 1->2, row norm: row 0 = [_, 1/2, 1/2], row 1 = [_, _, 1]
        // column squared norms: 0, 1/4, 1/4 + 1 -> normalized 0, 1/6, 5/6
        let g = Graph::from_edges(&[(0, 1), (0, 2), (1, 2)], 3, false).unwrap();
        let p = saint_node_probs(&NormalizedAdjacency::new(&g, NormKind::Row, false)).unwrap();
        let expect = [0.0, 1.0 / 6.0, 5.0 / 6.0];
        for (a, b) in p.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn node_sampler_frequencies() {
        let g = Graph::from_edges(&[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (4, 0)], 5, true).unwrap();
        let a = NormalizedAdjacency::new(&g, NormKind::Row, false);
        let p = saint_node_probs(&a).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let dist = WeightedIndex::new(&p).unwrap();
        let mut r = rng::stream(2, 0);
        let mut counts = vec![0; 5];
        for _ in 0..100_000 {
            counts[dist.sample(&mut r)] += 1;
        }
        assert!(tv(&counts, &p, 100_000) < 0.01);
        let batch = saint_node_sample(&p, 3, &mut r).unwrap();
        assert!(!batch.is_empty() && batch.len() <= 3);
    }

    #[test]
    fn edge_ratio_by_hand() {
        // edge A = (0,1): both degree 1. edge B = (2,3): both degree 2 via self-loops.
        let g = Graph::from_edges(&[(0, 1), (2, 3), (2, 2), (3, 3)], 4, true).unwrap();
        let s = EdgeSampler::new(&g).unwrap();
        assert_eq!(s.edges(), &[(0, 1), (2, 3)]);
        assert!((s.probs()[0] / s.probs()[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn regular_graph_edges_are_uniform_and_frequencies_match() {
        let e: Vec<_> = (0..8).map(|v| (v, (v + 1) % 8)).collect();
        let g = Graph::from_edges(&e, 8, true).unwrap();
        let s = EdgeSampler::new(&g).unwrap();
        assert!(s.probs().iter().all(|&p| (p - 1.0 / 8.0).abs() < 1e-12));
        let mut r = rng::stream(4, 0);
        let mut counts = vec![0; 8];
        for _ in 0..100_000 {
            counts[s.sample_edge(&mut r)] += 1;
        }
        assert!(tv(&counts, s.probs(), 100_000) < 0.01);
    }

    #[test]
    fn edgeless_graph_has_no_edge_sampler() {
        assert!(EdgeSampler::new(&Graph::empty(3)).is_err());
    }

    #[test]
    fn walks() {
        let g = Graph::from_edges(&[(0, 1), (1, 2), (2, 3)], 4, true).unwrap();
        let mut r = rng::stream(6, 0);
        let roots = random_walk_sample(&g, 3, 0, &mut r);
        assert!(roots.len() <= 3);
        for _ in 0..100 {
            let v = random_walk_sample(&g, 2, 3, &mut r);
            assert!(v.len() <= 2 * 4);
        }
        let path = Graph::from_edges(&[(0, 1)], 2, true).unwrap();
        for _ in 0..20 {
            assert_eq!(random_walk_sample(&path, 1, 1, &mut r), vec![0, 1]);
        }
        let lonely = Graph::empty(1);
        assert_eq!(random_walk_sample(&lonely, 1, 5, &mut r), vec![0]);
    }
}
