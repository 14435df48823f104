//! Deterministic BFS partitioner used to form ClusterGCN batches.
//!
//! Seeds come from a farthest-point sweep (the first one drawn from the
//! seed, each next one the node farthest from all previous seeds, with
//! unreachable nodes counted as infinitely far). A multi-source BFS assigns
//! every node to the first frontier that reaches it. Components without a
//! seed join the smallest cluster. Finally, clusters larger than
//! `2·⌈n / k⌉` shed boundary nodes to their smallest under-cap neighbor.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng;

const UNSET: usize = usize::MAX;

/// Cluster id per node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partitioning {
    assignment: Vec<usize>,
    num_clusters: usize,
}

impl Partitioning {
    pub fn new(assignment: Vec<usize>, num_clusters: usize) -> Result<Self> {
        if assignment.iter().any(|&c| c >= num_clusters) {
            return Err(Error::InvalidConfig("cluster id out of range".into()));
        }
        Ok(Self {
            assignment,
            num_clusters,
        })
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.num_clusters];
        for &c in &self.assignment {
            s[c] += 1;
        }
        s
    }

    /// Members of every cluster, each list sorted.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_clusters];
        for (v, &c) in self.assignment.iter().enumerate() {
            out[c].push(v);
        }
        out
    }

    /// Stored edges whose endpoints lie in different clusters.
    pub fn cut_edges(&self, g: &Graph) -> usize {
        g.edges()
            .filter(|&(u, v)| self.assignment[u] != self.assignment[v])
            .count()
    }
}

/// Splits `g` into `num_clusters` disjoint clusters covering every node.
pub fn partition_graph(g: &Graph, num_clusters: usize, seed: u64) -> Result<Partitioning> {
    let n = g.num_nodes();
    if num_clusters == 0 || num_clusters > n {
        return Err(Error::InvalidConfig(alloc::format!(
            "num_clusters must lie in 1..={n}, got {num_clusters}"
        )));
    }
    let seeds = farthest_point_seeds(g, num_clusters, seed);
    let mut assignment = vec![UNSET; n];
    let mut queue = VecDeque::with_capacity(n);
    for (c, &s) in seeds.iter().enumerate() {
        assignment[s] = c;
        queue.push_back(s);
    }
    bfs_assign(g, &mut assignment, &mut queue);

    let mut sizes = vec![0usize; num_clusters];
    for &c in &assignment {
        if c != UNSET {
            sizes[c] += 1;
        }
    }
    for v in 0..n {
        if assignment[v] == UNSET {
            let c = smallest(&sizes, |_| true).expect("at least one cluster");
            let before = count_unset_reached(g, &mut assignment, v, c);
            sizes[c] += before;
        }
    }
    rebalance(g, &mut assignment, &mut sizes, 2 * n.div_ceil(num_clusters));
    Partitioning::new(assignment, num_clusters)
}

fn farthest_point_seeds(g: &Graph, k: usize, seed: u64) -> Vec<usize> {
    let n = g.num_nodes();
    let mut r = rng::stream(seed, rng::streams::PARTITION);
    let mut dist = vec![usize::MAX; n];
    let mut seeds = Vec::with_capacity(k);
    let mut queue = VecDeque::new();
    let mut next = r.random_range(0..n);
    loop {
        seeds.push(next);
        // pruned BFS: only nodes that get closer are revisited
        dist[next] = 0;
        queue.push_back(next);
        while let Some(u) = queue.pop_front() {
            let d = dist[u] + 1;
            for &v in g.neighbors(u) {
                if d < dist[v] {
                    dist[v] = d;
                    queue.push_back(v);
                }
            }
        }
        if seeds.len() == k {
            return seeds;
        }
        let mut best = UNSET;
        for v in 0..n {
            if dist[v] > 0 && (best == UNSET || dist[v] > dist[best]) {
                best = v;
            }
        }
        next = best;
    }
}

fn bfs_assign(g: &Graph, assignment: &mut [usize], queue: &mut VecDeque<usize>) {
    while let Some(u) = queue.pop_front() {
        let c = assignment[u];
        for &v in g.neighbors(u) {
            if assignment[v] == UNSET {
                assignment[v] = c;
                queue.push_back(v);
            }
        }
    }
}

/// Assigns the unassigned component containing `start` to `c` and returns
/// its size.
fn count_unset_reached(g: &Graph, assignment: &mut [usize], start: usize, c: usize) -> usize {
    let mut queue = VecDeque::new();
    assignment[start] = c;
    queue.push_back(start);
    let mut count = 0;
    while let Some(u) = queue.pop_front() {
        count += 1;
        for &v in g.neighbors(u) {
            if assignment[v] == UNSET {
                assignment[v] = c;
                queue.push_back(v);
            }
        }
    }
    count
}

fn smallest(sizes: &[usize], allowed: impl Fn(usize) -> bool) -> Option<usize> {
    (0..sizes.len())
        .filter(|&c| allowed(c))
        .min_by_key(|&c| (sizes[c], c))
}

fn rebalance(g: &Graph, assignment: &mut [usize], sizes: &mut [usize], cap: usize) {
    let n = assignment.len();
    loop {
        if sizes.iter().all(|&s| s <= cap) {
            return;
        }
        let mut moved = false;
        for v in 0..n {
            let c = assignment[v];
            if sizes[c] <= cap {
                continue;
            }
            let target = g
                .neighbors(v)
                .iter()
                .map(|&u| assignment[u])
                .filter(|&d| d != c && sizes[d] < cap)
                .min_by_key(|&d| (sizes[d], d));
            if let Some(d) = target {
                assignment[v] = d;
                sizes[c] -= 1;
                sizes[d] += 1;
                moved = true;
            }
        }
        if !moved {
            // no boundary exit left: move arbitrary members to the smallest cluster
            for v in 0..n {
                let c = assignment[v];
                if sizes[c] > cap {
                    let d = smallest(sizes, |d| d != c).expect("more than one cluster when oversized");
                    assignment[v] = d;
                    sizes[c] -= 1;
                    sizes[d] += 1;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn clique(range: core::ops::Range<usize>) -> Vec<(usize, usize)> {
        let v: Vec<usize> = range.collect();
        let mut e = Vec::new();
        for (i, &a) in v.iter().enumerate() {
            for &b in &v[i + 1..] {
                e.push((a, b));
            }
        }
        e
    }

    #[test]
    fn extreme_cluster_counts() {
        let g = Graph::from_edges(&clique(0..6), 6, true).unwrap();
        let one = partition_graph(&g, 1, 3).unwrap();
        assert_eq!(one.sizes(), vec![6]);
        let all = partition_graph(&g, 6, 3).unwrap();
        assert_eq!(all.sizes(), vec![1; 6]);
        assert!(partition_graph(&g, 0, 3).is_err());
        assert!(partition_graph(&g, 7, 3).is_err());
    }

    #[test]
    fn disconnected_cliques_are_separated() {
        let mut e = clique(0..5);
        e.extend(clique(5..10));
        let g = Graph::from_edges(&e, 10, true).unwrap();
        for seed in 0..10 {
            let p = partition_graph(&g, 2, seed).unwrap();
            assert_eq!(p.cut_edges(&g), 0);
            assert_eq!(p.sizes(), vec![5, 5]);
        }
    }

    #[test]
    fn unseeded_components_join_the_smallest_cluster() {
        let mut e = clique(0..4);
        e.push((4, 5));
        e.push((6, 7));
        let g = Graph::from_edges(&e, 8, true).unwrap();
        let p = partition_graph(&g, 2, 0).unwrap();
        assert_eq!(p.sizes().iter().sum::<usize>(), 8);
        assert_eq!(p.cut_edges(&g), 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn cover_balance_and_determinism(n in 1usize..60, k_frac in 0.0f64..1.0, seed in any::<u64>(), p in 0.0f64..0.3) {
            let mut r = rng::stream(seed, 0);
            let mut e = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    if r.random::<f64>() < p {
                        e.push((u, v));
                    }
                }
            }
            let g = Graph::from_edges(&e, n, true).unwrap();
            let k = 1 + (k_frac * (n - 1) as f64) as usize;
            let part = partition_graph(&g, k, seed).unwrap();
            let sizes = part.sizes();
            prop_assert_eq!(sizes.iter().sum::<usize>(), n);
            prop_assert!(sizes.iter().all(|&s| s >= 1 && s <= 2 * n.div_ceil(k)));
            prop_assert_eq!(part, partition_graph(&g, k, seed).unwrap());
        }
    }
}
