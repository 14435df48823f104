//! Mini-batch training loops and per-epoch records.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::adjacency::NormalizedAdjacency;
use crate::data::{accuracy, argmax_rows, Dataset, LabelVector};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::{HopFeatures, HopModel, SampledGnn};
use crate::nn::{cross_entropy, AdamConfig, AdamState};
use crate::rng::{self, StreamRng};
use crate::sampling::{BatchPlan, Sampler};

/// Rows scored per forward pass when predicting every node.
pub const EVAL_CHUNK: usize = 8192;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig::new(self.lr, self.weight_decay)
    }
}

/// A model together with its data and optimizer.
pub trait Trainer {
    /// One optimizer step on the next mini-batch; starts a new epoch when the
    /// current one is exhausted. Returns the batch loss.
    fn train_step(&mut self) -> Result<f64>;
    /// Mini-batches left in the current epoch.
    fn remaining_in_epoch(&self) -> usize;
    /// Class scores for every node.
    fn predict(&self) -> Result<Matrix>;
    /// Largest per-step activation footprint seen so far.
    fn peak_activation_bytes(&self) -> usize;

    /// Runs the rest of the current epoch, or a full new one, and returns the
    /// mean batch loss.
    fn train_epoch(&mut self) -> Result<f64> {
        let mut total = 0.0;
        let mut steps = 0usize;
        loop {
            total += self.train_step()?;
            steps += 1;
            if self.remaining_in_epoch() == 0 {
                return Ok(total / steps as f64);
            }
        }
    }
}

/// Trains a [`HopModel`] on shuffled mini-batches of precomputed hop rows.
pub struct HopTrainer<'d, M: HopModel> {
    pub model: M,
    hops: &'d HopFeatures,
    labels: &'d LabelVector,
    train: Vec<usize>,
    batch_size: usize,
    adam: AdamState,
    shuffle: StreamRng,
    dropout: StreamRng,
    queue: VecDeque<Vec<usize>>,
    peak: usize,
}

impl<'d, M: HopModel> HopTrainer<'d, M> {
    pub fn new(model: M, hops: &'d HopFeatures, labels: &'d LabelVector, train: &[usize], config: &TrainConfig) -> Result<Self> {
        if train.is_empty() || config.batch_size == 0 {
            return Err(Error::EmptyBatch("HopTrainer"));
        }
        if *model.hop_range().end() > hops.k() {
            return Err(Error::InvalidConfig(alloc::format!(
                "model reads hop {} but only {} were precomputed",
                model.hop_range().end(),
                hops.k()
            )));
        }
        let adam = AdamState::new(config.adam(), model.params());
        Ok(Self {
            model,
            hops,
            labels,
            train: train.to_vec(),
            batch_size: config.batch_size,
            adam,
            shuffle: rng::stream(config.seed, rng::streams::SHUFFLE),
            dropout: rng::stream(config.seed, rng::streams::DROPOUT),
            queue: VecDeque::new(),
            peak: 0,
        })
    }

    fn refill(&mut self) {
        let mut order = self.train.clone();
        order.shuffle(&mut self.shuffle);
        self.queue.extend(order.chunks(self.batch_size).map(<[usize]>::to_vec));
    }
}

impl<M: HopModel> Trainer for HopTrainer<'_, M> {
    fn train_step(&mut self) -> Result<f64> {
        if self.queue.is_empty() {
            self.refill();
        }
        let batch = self.queue.pop_front().expect("refilled queue is non-empty");
        let inputs = self.hops.gather(self.model.hop_range(), &batch);
        let (logits, trace) = self.model.forward_train(&inputs, &mut self.dropout)?;
        self.peak = self.peak.max(M::activation_bytes(&trace));
        let (loss, grad) = cross_entropy(&logits, &self.labels.gather(&batch))?;
        let grads = self.model.backward(&trace, &grad)?;
        self.adam.step(self.model.params_mut(), &grads);
        self.model.update_running_stats(&trace);
        Ok(loss)
    }

    fn remaining_in_epoch(&self) -> usize {
        self.queue.len()
    }

    fn predict(&self) -> Result<Matrix> {
        let n = self.hops.num_rows();
        let all: Vec<usize> = (0..n).collect();
        let mut parts = Vec::new();
        for chunk in all.chunks(EVAL_CHUNK) {
            parts.push(self.model.forward_eval(&self.hops.gather(self.model.hop_range(), chunk))?);
        }
        stack_rows(&parts)
    }

    fn peak_activation_bytes(&self) -> usize {
        self.peak
    }
}

/// Stacks matrices with equal column counts vertically.
pub fn stack_rows(parts: &[Matrix]) -> Result<Matrix> {
    let cols = parts.first().map_or(0, Matrix::cols);
    let rows = parts.iter().map(Matrix::rows).sum();
    let mut data = Vec::with_capacity(rows * cols);
    for p in parts {
        if p.cols() != cols {
            return Err(Error::Shape {
                op: "stack_rows",
                expected: (p.rows(), cols),
                found: p.shape(),
            });
        }
        data.extend_from_slice(p.data());
    }
    Matrix::new(rows, cols, data)
}

/// Trains a [`SampledGnn`] on plans drawn by a [`Sampler`]. The loss covers
/// the plan's target nodes that belong to the training set.
pub struct GnnTrainer<'g> {
    pub model: SampledGnn,
    sampler: Sampler<'g>,
    features: &'g Matrix,
    full_adj: &'g NormalizedAdjacency,
    labels: &'g LabelVector,
    train: Vec<usize>,
    train_mask: Vec<bool>,
    adam: AdamState,
    dropout: StreamRng,
    queue: VecDeque<BatchPlan>,
    peak: usize,
}

impl<'g> GnnTrainer<'g> {
    /// `full_adj` is used only for full-graph evaluation.
    pub fn new(
        model: SampledGnn,
        sampler: Sampler<'g>,
        data: &'g Dataset,
        full_adj: &'g NormalizedAdjacency,
        config: &TrainConfig,
    ) -> Result<Self> {
        if data.split.train.is_empty() {
            return Err(Error::EmptyBatch("GnnTrainer"));
        }
        let adam = AdamState::new(config.adam(), &model.params);
        Ok(Self {
            model,
            sampler,
            features: &data.features,
            full_adj,
            labels: &data.labels,
            train: data.split.train.clone(),
            train_mask: data.split.train_mask(data.num_nodes()),
            adam,
            dropout: rng::stream(config.seed, rng::streams::DROPOUT),
            queue: VecDeque::new(),
            peak: 0,
        })
    }

    pub fn sampler(&self) -> &Sampler<'g> {
        &self.sampler
    }
}

impl Trainer for GnnTrainer<'_> {
    fn train_step(&mut self) -> Result<f64> {
        if self.queue.is_empty() {
            self.queue.extend(self.sampler.epoch(&self.train)?);
        }
        let plan = self.queue.pop_front().expect("refilled queue is non-empty");
        let targets = plan.targets();
        let rows: Vec<usize> = (0..targets.len()).filter(|&i| self.train_mask[targets[i]]).collect();
        if rows.is_empty() {
            return Ok(0.0);
        }
        let (logits, trace) = self.model.forward_train(&plan, self.features, &mut self.dropout)?;
        self.peak = self.peak.max(trace.activation_bytes());
        let picked_labels: Vec<usize> = rows.iter().map(|&i| self.labels.get(targets[i])).collect();
        let (loss, g) = cross_entropy(&logits.gather_rows(&rows), &picked_labels)?;
        let mut grad = Matrix::zeros(logits.rows(), logits.cols());
        grad.scatter_add_rows(&rows, &g);
        let grads = self.model.backward(&plan, &trace, &grad)?;
        self.adam.step(&mut self.model.params, &grads);
        Ok(loss)
    }

    fn remaining_in_epoch(&self) -> usize {
        self.queue.len()
    }

    fn predict(&self) -> Result<Matrix> {
        self.model.infer_full(self.full_adj, self.features)
    }

    fn peak_activation_bytes(&self) -> usize {
        self.peak
    }
}

/// Metrics after one epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    pub test_acc: f64,
    /// Wall-clock seconds of the epoch's training steps, when measured.
    pub seconds: f64,
}

/// Train, validation and test accuracy of `scores`.
pub fn split_accuracies(scores: &Matrix, data: &Dataset) -> (f64, f64, f64) {
    let pred = argmax_rows(scores);
    (
        accuracy(&pred, &data.labels, &data.split.train),
        accuracy(&pred, &data.labels, &data.split.val),
        accuracy(&pred, &data.labels, &data.split.test),
    )
}

/// Trains for `epochs` epochs, evaluating after each. `clock` returns
/// seconds from any fixed origin; pass `|| 0.0` when timing is not needed.
pub fn fit<T: Trainer + ?Sized>(
    trainer: &mut T,
    data: &Dataset,
    epochs: usize,
    mut clock: impl FnMut() -> f64,
) -> Result<Vec<EpochRecord>> {
    let mut out = Vec::with_capacity(epochs);
    for epoch in 1..=epochs {
        let start = clock();
        let loss = trainer.train_epoch()?;
        let seconds = clock() - start;
        let (train_acc, val_acc, test_acc) = split_accuracies(&trainer.predict()?, data);
        out.push(EpochRecord {
            epoch,
            loss,
            train_acc,
            val_acc,
            test_acc,
            seconds,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjacency::NormKind;
    use crate::models::{precompute_hops, Sgc, SampledGnnConfig};
    use crate::nn::Parameters;
    use crate::sampling::{SamplerConfig, SamplerKind};
    use crate::sbm::{generate_sbm, SyntheticSpec};

    fn data() -> Dataset {
        generate_sbm(&SyntheticSpec {
            num_nodes: 300,
            num_classes: 3,
            p_in: 0.05,
            p_out: 0.005,
            feature_dim: 8,
            noise: 1.0,
            train_frac: 0.3,
            val_frac: 0.2,
            test_frac: 0.5,
            ..SyntheticSpec::fixture(3)
        })
        .unwrap()
    }

    fn config() -> TrainConfig {
        TrainConfig {
            epochs: 20,
            lr: 0.05,
            weight_decay: 0.0,
            batch_size: 32,
            seed: 4,
        }
    }

    #[test]
    fn sgc_training_beats_chance_and_is_deterministic() {
        let d = data();
        let a = NormalizedAdjacency::new(&d.graph, NormKind::Sym, true);
        let hops = precompute_hops(&a, &d.features, 2, None).unwrap();
        let run = || {
            let mut t = HopTrainer::new(Sgc::new(8, 3, 2, 1).unwrap(), &hops, &d.labels, &d.split.train, &config()).unwrap();
            let records = fit(&mut t, &d, 20, || 0.0).unwrap();
            (records, t.model.params().clone(), t.peak_activation_bytes())
        };
        let (r1, p1, peak) = run();
        let (r2, p2, _) = run();
        assert_eq!(r1, r2);
        assert_eq!(p1, p2);
        assert_eq!(peak, 0);
        assert_eq!(r1.len(), 20);
        assert!(r1.last().unwrap().val_acc > 0.6, "{:?}", r1.last());
        assert!(r1.last().unwrap().loss < r1[0].loss);
    }

    #[test]
    fn epoch_covers_every_training_node_once() {
        let d = data();
        let hops = precompute_hops(&NormalizedAdjacency::identity(300), &d.features, 0, None).unwrap();
        let mut t = HopTrainer::new(Sgc::new(8, 3, 0, 1).unwrap(), &hops, &d.labels, &d.split.train, &config()).unwrap();
        t.train_step().unwrap();
        assert_eq!(t.remaining_in_epoch(), d.split.train.len().div_ceil(32) - 1);
        assert!(HopTrainer::new(Sgc::new(8, 3, 3, 1).unwrap(), &hops, &d.labels, &d.split.train, &config()).is_err());
    }

    #[test]
    fn sampled_gnn_trains_with_every_sampler() {
        let d = data();
        let a = NormalizedAdjacency::new(&d.graph, NormKind::Sym, true);
        for kind in [SamplerKind::NodeWise, SamplerKind::Ladies, SamplerKind::SaintRw, SamplerKind::Cluster] {
            let mut sc = SamplerConfig::new(kind, 2, 5);
            sc.batch_size = 32;
            sc.fanout = if kind == SamplerKind::Ladies { 64 } else { 5 };
            sc.num_roots = 40;
            sc.num_clusters = 10;
            sc.clusters_per_batch = 2;
            let sampler = Sampler::new(sc, &d.graph, &a).unwrap();
            let gc = SampledGnnConfig {
                use_self: !matches!(kind, SamplerKind::Ladies),
                ..SampledGnnConfig::with_depth(8, 16, 3, 2, 6)
            };
            let model = SampledGnn::new(gc).unwrap();
            let before = model.params.clone();
            let mut t = GnnTrainer::new(model, sampler, &d, &a, &config()).unwrap();
            let records = fit(&mut t, &d, 8, || 0.0).unwrap();
            assert!(t.model.params.max_abs() > 0.0 && t.model.params != before);
            assert!(records.last().unwrap().val_acc > 0.5, "{kind:?}: {:?}", records.last());
            assert!(t.peak_activation_bytes() > 0);
        }
    }
}
