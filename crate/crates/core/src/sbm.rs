//! Stochastic block model graphs with Gaussian class-mean features and a
//! stratified split.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::{DataSplit, Dataset, LabelVector};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::math;
use crate::matrix::Matrix;
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub num_nodes: usize,
    pub num_classes: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    /// Scale of the per-class mean vectors.
    pub mean_separation: f64,
    /// Standard deviation of the per-node feature noise.
    pub noise: f64,
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// The benchmark fixture: 3000 nodes, 5 classes, `p_in = 0.05`,
    /// `p_out = 0.005`, a 10% training split.
    pub fn fixture(seed: u64) -> Self {
        Self {
            num_nodes: 3000,
            num_classes: 5,
            p_in: 0.05,
            p_out: 0.005,
            feature_dim: 32,
            mean_separation: 1.0,
            noise: 2.0,
            train_frac: 0.1,
            val_frac: 0.1,
            test_frac: 0.8,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.num_nodes < 2 || self.num_classes == 0 || self.num_classes > self.num_nodes {
            return bad("need at least 2 nodes and 1..=num_nodes classes");
        }
        if !(0.0 <= self.p_out && self.p_out <= self.p_in && self.p_in <= 1.0) {
            return bad("block probabilities must satisfy 0 <= p_out <= p_in <= 1");
        }
        let [a, b, c] = [self.train_frac, self.val_frac, self.test_frac];
        if a < 0.0 || b < 0.0 || c < 0.0 || (a + b + c - 1.0).abs() > 1e-9 {
            return bad("split fractions must be non-negative and sum to 1");
        }
        if self.noise < 0.0 || !self.mean_separation.is_finite() {
            return bad("noise must be non-negative and separation finite");
        }
        if self.expected_degree() <= 0.0 {
            return bad("expected degree is zero");
        }
        Ok(())
    }

    /// Mean degree implied by the block probabilities.
    pub fn expected_degree(&self) -> f64 {
        let n = self.num_nodes as f64;
        let block = n / self.num_classes as f64;
        self.p_in * (block - 1.0).max(0.0) + self.p_out * (n - block)
    }
}

/// Class sizes differ by at most one; node ids are shuffled across classes.
fn stratified_labels<R: Rng + ?Sized>(n: usize, c: usize, rng: &mut R) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..n).map(|v| v * c / n).collect();
    labels.shuffle(rng);
    labels
}

/// Calls `f(k)` for every index `k < total` kept by independent
/// Bernoulli(`p`) trials, using geometric skips.
fn bernoulli_indices<R: Rng + ?Sized>(total: u64, p: f64, rng: &mut R, mut f: impl FnMut(u64)) {
    if p <= 0.0 || total == 0 {
        return;
    }
    if p >= 1.0 {
        (0..total).for_each(f);
        return;
    }
    let log_q = math::ln(1.0 - p);
    let mut k: u64 = 0;
    loop {
        let u: f64 = 1.0 - rng.random::<f64>();
        let skip = math::floor(math::ln(u) / log_q);
        if skip >= (total - k) as f64 {
            return;
        }
        k += skip as u64;
        f(k);
        k += 1;
        if k >= total {
            return;
        }
    }
}

/// Draws an SBM dataset. Equal seeds give identical datasets. Features are
/// rounded to `f32` so they survive a single-precision bundle unchanged.
pub fn generate_sbm(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let (n, c) = (spec.num_nodes, spec.num_classes);
    let labels = stratified_labels(n, c, &mut rng::stream(spec.seed, rng::streams::SPLIT));
    let mut members = vec![Vec::new(); c];
    for (v, &y) in labels.iter().enumerate() {
        members[y].push(v);
    }

    let mut r = rng::stream(spec.seed, rng::streams::GRAPH);
    let mut edges = Vec::new();
    for a in 0..c {
        let m = members[a].len() as u64;
        let (mut row, mut row_start) = (0u64, 0u64);
        bernoulli_indices(m * m.saturating_sub(1) / 2, spec.p_in, &mut r, |k| {
            while k >= row_start + (m - 1 - row) {
                row_start += m - 1 - row;
                row += 1;
            }
            let j = row + 1 + (k - row_start);
            edges.push((members[a][row as usize], members[a][j as usize]));
        });
        for b in a + 1..c {
            let mb = members[b].len() as u64;
            bernoulli_indices(m * mb, spec.p_out, &mut r, |k| {
                edges.push((members[a][(k / mb) as usize], members[b][(k % mb) as usize]));
            });
        }
    }
    let graph = Graph::from_edges(&edges, n, true)?;

    let mut fr = rng::stream(spec.seed, rng::streams::FEATURES);
    let d = spec.feature_dim;
    let means = Matrix::from_fn(c, d, |_, _| spec.mean_separation * fr.sample::<f64, _>(StandardNormal));
    let features = Matrix::from_fn(n, d, |v, j| {
        let x = means.get(labels[v], j) + spec.noise * fr.sample::<f64, _>(StandardNormal);
        x as f32 as f64
    });

    let mut sr = rng::stream(spec.seed, rng::streams::SHUFFLE);
    let mut split = DataSplit::default();
    for class in &mut members {
        class.shuffle(&mut sr);
        let m = class.len() as f64;
        let n_train = math::floor(spec.train_frac * m + 0.5) as usize;
        let n_val = (math::floor((spec.train_frac + spec.val_frac) * m + 0.5) as usize).max(n_train);
        split.train.extend_from_slice(&class[..n_train]);
        split.val.extend_from_slice(&class[n_train..n_val.min(class.len())]);
        split.test.extend_from_slice(&class[n_val.min(class.len())..]);
    }
    for s in [&mut split.train, &mut split.val, &mut split.test] {
        s.sort_unstable();
    }
    Dataset::new(graph, features, LabelVector::new(labels, c)?, split)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            num_nodes: 40,
            num_classes: 2,
            feature_dim: 3,
            ..SyntheticSpec::fixture(seed)
        }
    }

    #[test]
    fn full_and_empty_blocks_give_disjoint_cliques() {
        let spec = SyntheticSpec { p_in: 1.0, p_out: 0.0, ..small(1) };
        let d = generate_sbm(&spec).unwrap();
        for (u, v) in d.graph.edges() {
            assert_eq!(d.labels.get(u), d.labels.get(v));
        }
        assert_eq!(d.graph.num_edges(), 2 * 2 * (20 * 19 / 2));
    }

    #[test]
    fn generation_is_deterministic_and_stratified() {
        let a = generate_sbm(&small(5)).unwrap();
        assert_eq!(a, generate_sbm(&small(5)).unwrap());
        assert_ne!(a, generate_sbm(&small(6)).unwrap());
        assert_eq!(a.labels.histogram(&(0..40).collect::<Vec<_>>()), vec![20, 20]);
        assert_eq!(a.split.train.len(), 4);
        assert_eq!(a.split.val.len(), 4);
        assert_eq!(a.split.test.len(), 32);
        assert_eq!(a.labels.histogram(&a.split.train), vec![2, 2]);
        assert!(a.features.data().iter().all(|&x| x == x as f32 as f64));
    }

    #[test]
    fn block_edge_counts_match_binomial_expectation() {
        let spec = SyntheticSpec {
            num_nodes: 1000,
            num_classes: 2,
            p_in: 0.1,
            p_out: 0.01,
            ..small(7)
        };
        let d = generate_sbm(&spec).unwrap();
        let (mut within, mut across) = (0.0, 0.0);
        for (u, v) in d.graph.edges().filter(|(u, v)| u < v) {
            if d.labels.get(u) == d.labels.get(v) {
                within += 1.0;
            } else {
                across += 1.0;
            }
        }
        let pairs_in = 2.0 * 500.0 * 499.0 / 2.0;
        let pairs_out = 500.0 * 500.0;
        let z = |count: f64, pairs: f64, p: f64| (count - pairs * p).abs() / math::sqrt(pairs * p * (1.0 - p));
        assert!(z(within, pairs_in, 0.1) < 3.0);
        assert!(z(across, pairs_out, 0.01) < 3.0);
    }

    #[test]
    fn infeasible_specs_are_rejected() {
        assert!(generate_sbm(&SyntheticSpec { p_in: 0.0, p_out: 0.0, ..small(0) }).is_err());
        assert!(generate_sbm(&SyntheticSpec { p_in: 0.1, p_out: 0.2, ..small(0) }).is_err());
        assert!(generate_sbm(&SyntheticSpec { train_frac: 0.5, ..small(0) }).is_err());
    }
}
