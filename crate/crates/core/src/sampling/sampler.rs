//! Seeded sampler instances that turn a training set into an epoch of plans.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::{
    fastgcn_layer_probs, layer_wise_sample, node_wise_sample, partition_graph, random_walk_sample, saint_node_probs,
    saint_node_sample, subgraph_batch, BatchPlan, EdgeSampler, LayerWiseVariant, Partitioning,
};
use crate::adjacency::{NormSpec, NormalizedAdjacency};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{self, StreamRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SamplerKind {
    NodeWise,
    FastGcn,
    Ladies,
    SaintNode,
    SaintEdge,
    SaintRw,
    Cluster,
}

impl SamplerKind {
    pub fn is_subgraph(self) -> bool {
        matches!(
            self,
            SamplerKind::SaintNode | SamplerKind::SaintEdge | SamplerKind::SaintRw | SamplerKind::Cluster
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    /// Neighbors per node (node-wise) or nodes per layer (layer-wise).
    pub fanout: usize,
    /// Seed nodes per batch (node- and layer-wise), sampled nodes (SAINT
    /// node) or sampled edges (SAINT edge).
    pub batch_size: usize,
    pub walk_length: usize,
    pub num_roots: usize,
    pub num_clusters: usize,
    pub clusters_per_batch: usize,
    /// Number of message-passing layers.
    pub depth: usize,
    pub norm: NormSpec,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(kind: SamplerKind, depth: usize, seed: u64) -> Self {
        Self {
            kind,
            fanout: 10,
            batch_size: 1000,
            walk_length: 2,
            num_roots: 1000,
            num_clusters: 50,
            clusters_per_batch: 5,
            depth,
            norm: NormSpec::GCN,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidConfig(alloc::format!("{:?} sampler needs a positive {what}", self.kind)))
            }
        };
        need(self.depth > 0, "depth")?;
        match self.kind {
            SamplerKind::NodeWise | SamplerKind::FastGcn | SamplerKind::Ladies => {
                need(self.fanout > 0, "fanout")?;
                need(self.batch_size > 0, "batch_size")
            }
            SamplerKind::SaintNode | SamplerKind::SaintEdge => need(self.batch_size > 0, "batch_size"),
            SamplerKind::SaintRw => need(self.num_roots > 0, "num_roots"),
            SamplerKind::Cluster => {
                need(self.num_clusters > 0, "num_clusters")?;
                need(self.clusters_per_batch > 0, "clusters_per_batch")
            }
        }
    }
}

/// A sampler bound to one graph. It owns its random stream, so two
/// instances with the same config produce the same plans.
pub struct Sampler<'g> {
    config: SamplerConfig,
    graph: &'g Graph,
    adj: &'g NormalizedAdjacency,
    probs: Vec<f64>,
    edges: Option<EdgeSampler>,
    partition: Option<Partitioning>,
    rng: StreamRng,
}

impl<'g> Sampler<'g> {
    /// `adj` must be `config.norm` applied to `graph`; node- and layer-wise
    /// plans read their weights from it.
    pub fn new(config: SamplerConfig, graph: &'g Graph, adj: &'g NormalizedAdjacency) -> Result<Self> {
        config.validate()?;
        if adj.num_nodes() != graph.num_nodes() {
            return Err(Error::Shape {
                op: "Sampler::new",
                expected: (graph.num_nodes(), graph.num_nodes()),
                found: (adj.num_nodes(), adj.num_nodes()),
            });
        }
        let probs = match config.kind {
            SamplerKind::FastGcn | SamplerKind::Ladies => fastgcn_layer_probs(adj)?,
            SamplerKind::SaintNode => saint_node_probs(adj)?,
            _ => Vec::new(),
        };
        let edges = match config.kind {
            SamplerKind::SaintEdge => Some(EdgeSampler::new(graph)?),
            _ => None,
        };
        let partition = match config.kind {
            SamplerKind::Cluster => Some(partition_graph(
                graph,
                config.num_clusters.min(graph.num_nodes()),
                config.seed,
            )?),
            _ => None,
        };
        let rng = rng::stream(config.seed, rng::streams::SAMPLER);
        Ok(Self {
            config,
            graph,
            adj,
            probs,
            edges,
            partition,
            rng,
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn partition(&self) -> Option<&Partitioning> {
        self.partition.as_ref()
    }

    /// Expected number of nodes in one subgraph batch.
    fn expected_subgraph_nodes(&self) -> usize {
        let c = &self.config;
        match c.kind {
            SamplerKind::SaintNode => c.batch_size,
            SamplerKind::SaintEdge => 2 * c.batch_size,
            SamplerKind::SaintRw => c.num_roots * (c.walk_length + 1),
            _ => c.batch_size,
        }
        .max(1)
    }

    /// Plans for one epoch. Node- and layer-wise samplers split a shuffled
    /// `train` into seed batches. SAINT samplers draw `⌈N / expected batch
    /// nodes⌉` subgraphs. The cluster sampler groups a shuffled cluster list
    /// so every cluster appears once.
    pub fn epoch(&mut self, train: &[usize]) -> Result<Vec<BatchPlan>> {
        if train.is_empty() {
            return Err(Error::EmptyBatch("Sampler::epoch"));
        }
        let c = self.config.clone();
        let mut plans = Vec::new();
        match c.kind {
            SamplerKind::NodeWise | SamplerKind::FastGcn | SamplerKind::Ladies => {
                let mut order = train.to_vec();
                order.shuffle(&mut self.rng);
                for seeds in order.chunks(c.batch_size) {
                    let plan = match c.kind {
                        SamplerKind::NodeWise => node_wise_sample(self.adj, seeds, c.fanout, c.depth, &mut self.rng)?,
                        SamplerKind::FastGcn => layer_wise_sample(
                            self.adj,
                            &self.probs,
                            seeds,
                            c.fanout,
                            c.depth,
                            LayerWiseVariant::FastGcn,
                            &mut self.rng,
                        )?,
                        _ => layer_wise_sample(
                            self.adj,
                            &self.probs,
                            seeds,
                            c.fanout,
                            c.depth,
                            LayerWiseVariant::Ladies,
                            &mut self.rng,
                        )?,
                    };
                    plans.push(plan);
                }
            }
            SamplerKind::SaintNode | SamplerKind::SaintEdge | SamplerKind::SaintRw => {
                let iters = self.graph.num_nodes().div_ceil(self.expected_subgraph_nodes()).max(1);
                for _ in 0..iters {
                    let nodes = match c.kind {
                        SamplerKind::SaintNode => saint_node_sample(&self.probs, c.batch_size, &mut self.rng)?,
                        SamplerKind::SaintEdge => self
                            .edges
                            .as_ref()
                            .expect("edge sampler built for SaintEdge")
                            .sample(c.batch_size, &mut self.rng),
                        _ => random_walk_sample(self.graph, c.num_roots, c.walk_length, &mut self.rng),
                    };
                    plans.push(subgraph_batch(self.graph, c.norm, &nodes, c.depth)?);
                }
            }
            SamplerKind::Cluster => {
                let clusters = self.partition.as_ref().expect("partition built for Cluster").clusters();
                let mut order: Vec<usize> = (0..clusters.len()).collect();
                order.shuffle(&mut self.rng);
                for group in order.chunks(c.clusters_per_batch) {
                    let nodes: Vec<usize> = group.iter().flat_map(|&k| clusters[k].iter().copied()).collect();
                    plans.push(subgraph_batch(self.graph, c.norm, &nodes, c.depth)?);
                }
            }
        }
        Ok(plans)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjacency::NormKind;

    fn ring(n: usize) -> Graph {
        let mut e: Vec<_> = (0..n).map(|v| (v, (v + 1) % n)).collect();
        e.extend((0..n).map(|v| (v, (v + 5) % n)));
        Graph::from_edges(&e, n, true).unwrap()
    }

    #[test]
    fn every_kind_yields_valid_plans() {
        let g = ring(40);
        let full = g.add_self_loops();
        let train: Vec<usize> = (0..40).step_by(2).collect();
        for kind in [
            SamplerKind::NodeWise,
            SamplerKind::FastGcn,
            SamplerKind::Ladies,
            SamplerKind::SaintNode,
            SamplerKind::SaintEdge,
            SamplerKind::SaintRw,
            SamplerKind::Cluster,
        ] {
            let mut cfg = SamplerConfig::new(kind, 2, 7);
            cfg.batch_size = 8;
            cfg.fanout = 3;
            cfg.num_roots = 5;
            cfg.num_clusters = 6;
            cfg.clusters_per_batch = 2;
            let adj = NormalizedAdjacency::new(&g, cfg.norm.kind, cfg.norm.self_loops);
            let mut s = Sampler::new(cfg.clone(), &g, &adj).unwrap();
            let plans = s.epoch(&train).unwrap();
            assert!(!plans.is_empty(), "{kind:?}");
            for p in &plans {
                assert_eq!(p.depth(), 2);
                assert_eq!(p.is_shared(), kind.is_subgraph());
                for (t, src) in p.global_edges() {
                    assert!(full.has_edge(t, src), "{kind:?}");
                }
            }
            if kind == SamplerKind::Cluster {
                let covered: usize = plans.iter().map(|p| p.targets().len()).sum();
                assert_eq!(covered, 40);
            }
            let again = Sampler::new(cfg, &g, &adj).unwrap().epoch(&train).unwrap();
            assert_eq!(plans, again, "{kind:?} is not deterministic");
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let g = ring(10);
        let adj = NormalizedAdjacency::new(&g, NormKind::Sym, true);
        let mut cfg = SamplerConfig::new(SamplerKind::NodeWise, 2, 0);
        cfg.fanout = 0;
        assert!(Sampler::new(cfg, &g, &adj).is_err());
        let cfg = SamplerConfig::new(SamplerKind::Cluster, 0, 0);
        assert!(Sampler::new(cfg, &g, &adj).is_err());
        let cfg = SamplerConfig::new(SamplerKind::NodeWise, 1, 0);
        assert!(Sampler::new(cfg, &g, &adj).unwrap().epoch(&[]).is_err());
    }
}
