//! Layer-wise importance sampling (FastGCN and LADIES pools).
//!
//! Each layer draws a fixed-size node set from a candidate pool with
//! probabilities proportional to squared row norms of `Â`. Selection is
//! without replacement and uses exact inclusion probabilities `π(v)`: nodes
//! whose share would exceed one are taken with certainty and the rest are
//! drawn by randomized systematic sampling with `π(v) = m·q(v)`. Block
//! weights are `Â(u, v) / π(v)`, which makes the sampled aggregation an
//! unbiased estimate of `ÂX` on the target rows.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{BatchPlan, Block};
use crate::adjacency::NormalizedAdjacency;
use crate::error::{Error, Result};

const ABSENT: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerWiseVariant {
    /// Pool is `N(B_l)`.
    FastGcn,
    /// Pool is `N(B_l) ∪ B_l`.
    Ladies,
}

/// `p(u) ∝ ||Â(u, :)||²`, normalized to sum to one.
pub fn fastgcn_layer_probs(a: &NormalizedAdjacency) -> Result<Vec<f64>> {
    normalize(a.row_sq_norms(), "fastgcn_layer_probs")
}

pub(crate) fn normalize(mut w: Vec<f64>, op: &'static str) -> Result<Vec<f64>> {
    let total: f64 = w.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::DegenerateDistribution(op));
    }
    for x in &mut w {
        *x /= total;
    }
    Ok(w)
}

/// Inclusion probabilities for drawing `budget` items without replacement
/// with sizes proportional to `weights` (all positive). Items whose
/// proportional share reaches one get `π = 1`; the rest share the remaining
/// budget in proportion to their weights. The result sums to
/// `min(budget, len)`.
pub fn inclusion_probabilities(weights: &[f64], budget: usize) -> Vec<f64> {
    let n = weights.len();
    if budget >= n {
        return vec![1.0; n];
    }
    let mut pi = vec![0.0; n];
    let mut certain = vec![false; n];
    let mut remaining = budget as f64;
    loop {
        let total: f64 = (0..n).filter(|&i| !certain[i]).map(|i| weights[i]).sum();
        let mut changed = false;
        for i in 0..n {
            if !certain[i] && remaining * weights[i] / total >= 1.0 {
                certain[i] = true;
                remaining -= 1.0;
                changed = true;
            }
        }
        if !changed || remaining <= 0.0 {
            let total: f64 = (0..n).filter(|&i| !certain[i]).map(|i| weights[i]).sum();
            for i in 0..n {
                pi[i] = if certain[i] {
                    1.0
                } else if total > 0.0 {
                    remaining.max(0.0) * weights[i] / total
                } else {
                    0.0
                };
            }
            return pi;
        }
    }
}

/// Draws a sample whose inclusion probabilities are `pi` (summing to an
/// integer `m`): certainties first, then randomized systematic selection.
fn systematic_sample<R: Rng + ?Sized>(pi: &[f64], rng: &mut R) -> Vec<usize> {
    let mut out: Vec<usize> = (0..pi.len()).filter(|&i| pi[i] >= 1.0).collect();
    let mut rest: Vec<usize> = (0..pi.len()).filter(|&i| pi[i] < 1.0 && pi[i] > 0.0).collect();
    rest.shuffle(rng);
    let mass: f64 = rest.iter().map(|&i| pi[i]).sum();
    let draws = libm::round(mass) as usize;
    if draws == 0 {
        out.sort_unstable();
        return out;
    }
    let start: f64 = rng.random::<f64>();
    let mut point = start;
    let mut taken = 0;
    let mut cum = 0.0;
    for &i in &rest {
        cum += pi[i];
        // one point per unit of mass; pi < 1 means at most one point per item
        if taken < draws && point < cum {
            out.push(i);
            taken += 1;
            point = start + taken as f64;
        }
    }
    out.sort_unstable();
    out
}

/// Samples a depth-`depth` layer-wise plan rooted at `batch`.
///
/// `probs` is [`fastgcn_layer_probs`] of `a`; it is restricted to the pool
/// and renormalized at every layer. Nodes with zero probability are never
/// drawn. When `fanout` covers the whole pool, the pool is taken with
/// `π = 1` and the block carries `Â` unchanged.
pub fn layer_wise_sample<R: Rng + ?Sized>(
    a: &NormalizedAdjacency,
    probs: &[f64],
    batch: &[usize],
    fanout: usize,
    depth: usize,
    variant: LayerWiseVariant,
    rng: &mut R,
) -> Result<BatchPlan> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch("layer_wise_sample"));
    }
    let n = a.num_nodes();
    if probs.len() != n {
        return Err(Error::Shape {
            op: "layer_wise_sample probs",
            expected: (n, 1),
            found: (probs.len(), 1),
        });
    }
    if let Some(&v) = batch.iter().find(|&&v| v >= n) {
        return Err(Error::NodeOutOfRange { node: v, num_nodes: n });
    }
    let mut current = batch.to_vec();
    current.sort_unstable();
    current.dedup();
    let mut nodes = Vec::with_capacity(depth + 1);
    let mut blocks = Vec::with_capacity(depth);
    let mut in_pool = vec![false; n];
    let mut position = vec![ABSENT; n];
    for _ in 0..depth {
        let mut pool = Vec::new();
        let mut push = |v: usize, pool: &mut Vec<usize>| {
            if !in_pool[v] && probs[v] > 0.0 {
                in_pool[v] = true;
                pool.push(v);
            }
        };
        for &u in &current {
            for &v in a.row(u).0 {
                push(v, &mut pool);
            }
        }
        if variant == LayerWiseVariant::Ladies {
            for &u in &current {
                push(u, &mut pool);
            }
        }
        for &v in &pool {
            in_pool[v] = false;
        }
        if pool.is_empty() {
            return Err(Error::EmptyPool);
        }
        pool.sort_unstable();
        let weights: Vec<f64> = pool.iter().map(|&v| probs[v]).collect();
        let pi = inclusion_probabilities(&weights, fanout);
        let chosen = systematic_sample(&pi, rng);
        let next: Vec<usize> = chosen.iter().map(|&k| pool[k]).collect();
        let inv_pi: Vec<f64> = chosen.iter().map(|&k| 1.0 / pi[k]).collect();
        for (j, &v) in next.iter().enumerate() {
            position[v] = j;
        }
        let mut row_offsets = Vec::with_capacity(current.len() + 1);
        row_offsets.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for &u in &current {
            let (nbrs, w) = a.row(u);
            for (&v, &auv) in nbrs.iter().zip(w) {
                let j = position[v];
                if j != ABSENT {
                    cols.push(j);
                    vals.push(auv * inv_pi[j]);
                }
            }
            row_offsets.push(cols.len());
        }
        for &v in &next {
            position[v] = ABSENT;
        }
        blocks.push(Block::new(next.len(), row_offsets, cols, vals, None)?);
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
    use crate::matrix::Matrix;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn cycle_probs_are_uniform() {
        let e: Vec<_> = (0..6).map(|v| (v, (v + 1) % 6)).collect();
        let g = Graph::from_edges(&e, 6, true).unwrap();
        let p = fastgcn_layer_probs(&NormalizedAdjacency::new(&g, NormKind::Row, false)).unwrap();
        assert!(p.iter().all(|&x| (x - 1.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn three_node_probs_by_hand() {
        // path 0-1-2, row norm: rows [1], [1/2, 1/2], [1] -> squared norms 1, 1/2, 1
        let g = Graph::from_edges(&[(0, 1), (1, 2)], 3, true).unwrap();
        let p = fastgcn_layer_probs(&NormalizedAdjacency::new(&g, NormKind::Row, false)).unwrap();
        let expect = [0.4, 0.2, 0.4];
        for (a, b) in p.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_adjacency_is_degenerate() {
        let a = NormalizedAdjacency::new(&Graph::empty(3), NormKind::Row, false);
        assert_eq!(
            fastgcn_layer_probs(&a).unwrap_err(),
            Error::DegenerateDistribution("fastgcn_layer_probs")
        );
    }

    #[test]
    fn exhaustive_pool_keeps_adjacency_values() {
        let g = Graph::from_edges(&[(0, 1), (1, 2), (2, 3)], 4, true).unwrap();
        let a = NormalizedAdjacency::new(&g, NormKind::Sym, true);
        let p = fastgcn_layer_probs(&a).unwrap();
        let mut r = rng::stream(0, 0);
        let plan = layer_wise_sample(&a, &p, &[1], 10, 1, LayerWiseVariant::FastGcn, &mut r).unwrap();
        assert_eq!(plan.nodes(1), &[0, 1, 2]);
        let (_, vals) = plan.block(0).row(0);
        assert_eq!(vals, &[a.value(1, 0), a.value(1, 1), a.value(1, 2)]);
    }

    #[test]
    fn isolated_seed_is_rescued_by_its_self_loop() {
        let g = Graph::from_edges(&[(0, 1)], 3, true).unwrap();
        let a = NormalizedAdjacency::new(&g, NormKind::Sym, true);
        let p = fastgcn_layer_probs(&a).unwrap();
        let mut r = rng::stream(0, 0);
        let plan = layer_wise_sample(&a, &p, &[2], 2, 2, LayerWiseVariant::Ladies, &mut r).unwrap();
        assert_eq!(plan.nodes(1), &[2]);
        assert_eq!(plan.nodes(2), &[2]);
    }

    #[test]
    fn empty_pool_is_an_error() {
        let g = Graph::from_edges(&[(0, 1)], 3, true).unwrap();
        let a = NormalizedAdjacency::new(&g, NormKind::Sym, false);
        let p = fastgcn_layer_probs(&a).unwrap();
        let mut r = rng::stream(0, 0);
        assert_eq!(
            layer_wise_sample(&a, &p, &[2], 2, 1, LayerWiseVariant::FastGcn, &mut r).unwrap_err(),
            Error::EmptyPool
        );
    }

    #[test]
    fn inclusion_probabilities_hit_the_budget() {
        let pi = inclusion_probabilities(&[10.0, 1.0, 1.0, 1.0, 1.0], 3);
        assert_eq!(pi[0], 1.0);
        assert!(pi[1..].iter().all(|&x| (x - 0.5).abs() < 1e-15));
        assert!((pi.iter().sum::<f64>() - 3.0).abs() < 1e-12);
        assert_eq!(inclusion_probabilities(&[1.0, 2.0], 5), vec![1.0, 1.0]);
    }

    #[test]
    fn systematic_sample_matches_inclusion_probabilities() {
        let pi = inclusion_probabilities(&[4.0, 3.0, 1.0, 1.0, 0.5, 0.5], 3);
        let mut r = rng::stream(5, 0);
        let trials = 100_000;
        let mut hits = vec![0usize; pi.len()];
        for _ in 0..trials {
            let s = systematic_sample(&pi, &mut r);
            assert_eq!(s.len(), 3);
            for i in s {
                hits[i] += 1;
            }
        }
        for (h, p) in hits.iter().zip(&pi) {
            assert!((*h as f64 / trials as f64 - p).abs() < 0.01);
        }
    }

    #[test]
    fn sampled_aggregation_is_unbiased() {
        let g = Graph::from_edges(&[(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (1, 4)], 5, true).unwrap();
        let a = NormalizedAdjacency::new(&g, NormKind::Row, true);
        let p = fastgcn_layer_probs(&a).unwrap();
        let x = Matrix::from_fn(5, 2, |i, j| 1.0 + i as f64 + 0.5 * j as f64);
        let batch = [0, 3];
        let exact = a.spmm(&x).unwrap().gather_rows(&batch);
        let mut r = rng::stream(9, 0);
        let trials = 50_000;
        let mut mean = Matrix::zeros(2, 2);
        for _ in 0..trials {
            let plan = layer_wise_sample(&a, &p, &batch, 2, 1, LayerWiseVariant::Ladies, &mut r).unwrap();
            let h = x.gather_rows(plan.nodes(1));
            mean.add_assign(&plan.block(0).aggregate(&h).unwrap()).unwrap();
        }
        mean.scale(1.0 / trials as f64);
        let rel = mean.sub(&exact).unwrap().frobenius_norm() / exact.frobenius_norm();
        assert!(rel < 0.01, "{rel}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn plans_respect_budget_and_edges(
            n in 2usize..25,
            seed in any::<u64>(),
            fanout in 1usize..6,
            ladies in any::<bool>(),
        ) {
            let mut r = rng::stream(seed, 1);
            let mut e = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    if r.random::<f64>() < 0.2 {
                        e.push((u, v));
                    }
                }
            }
            let g = Graph::from_edges(&e, n, true).unwrap();
            let a = NormalizedAdjacency::new(&g, NormKind::Sym, true);
            let p = fastgcn_layer_probs(&a).unwrap();
            let variant = if ladies { LayerWiseVariant::Ladies } else { LayerWiseVariant::FastGcn };
            let batch: Vec<usize> = (0..n).step_by(3).collect();
            let plan = layer_wise_sample(&a, &p, &batch, fanout, 2, variant, &mut r).unwrap();
            for l in 1..=2 {
                prop_assert!(plan.nodes(l).len() <= fanout);
            }
            for (t, s) in plan.global_edges() {
                prop_assert!(a.structure().has_edge(t, s));
            }
        }
    }
}
