//! Layer-wise ensembling trainer.
//!
//! Stage `l` propagates features and label embeddings once
//! (`X^l = Â X^{l-1}`, `Y^l = Â Y^{l-1}`), trains `Φ(X^l) + Ψ(Y^l)` on the
//! current pseudo-labelled set (Ψ is left out at stage 0), snapshots both
//! models, and admits confident predictions into the pseudo-labelled set.
//! Predictions are a vote over the centered log-softmax outputs of every
//! stage.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::adjacency::NormalizedAdjacency;
use crate::data::{accuracy, argmax_rows, Dataset, LabelVector};
use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;
use crate::meter::StorageMeter;
use crate::nn::{cross_entropy, log_softmax_rows, softmax, AdamConfig, AdamState, Mlp, MlpConfig};
use crate::rng;
use crate::train::{stack_rows, EpochRecord, EVAL_CHUNK};

#[derive(Clone, Debug, PartialEq)]
pub struct EngcnConfig {
    /// Propagation steps `K`; stages run for `l = 0..=K`.
    pub num_stages: usize,
    pub epochs_per_stage: usize,
    pub hidden: usize,
    /// Layers of both Φ and Ψ.
    pub mlp_layers: usize,
    pub dropout: f64,
    pub batchnorm: bool,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    /// Confidence a prediction needs to join the pseudo-labelled set.
    pub threshold: f64,
    /// Continue Φ and Ψ across stages instead of re-initializing them.
    pub warm_start: bool,
    pub seed: u64,
}

impl EngcnConfig {
    /// Flickr settings: four layers of features, 70 epochs per
    /// stage, hidden 256, batch 10000, threshold 0.9.
    pub fn flickr(seed: u64) -> Self {
        Self {
            num_stages: 3,
            epochs_per_stage: 70,
            hidden: 256,
            mlp_layers: 2,
            dropout: 0.2,
            batchnorm: false,
            lr: 1e-4,
            weight_decay: 1e-4,
            batch_size: 10_000,
            threshold: 0.9,
            warm_start: true,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::InvalidConfig("threshold must lie in (0, 1]".into()));
        }
        if self.batch_size == 0 || self.hidden == 0 || self.mlp_layers == 0 {
            return Err(Error::InvalidConfig("batch size, hidden width and depth must be positive".into()));
        }
        Ok(())
    }

    fn mlp(&self, input: usize, classes: usize, seed: u64) -> MlpConfig {
        MlpConfig::with_depth(input, self.hidden, classes, self.mlp_layers, seed)
            .dropout(self.dropout)
            .batchnorm(self.batchnorm)
    }
}

/// Propagated inputs and the pseudo-labelled training set of one stage.
#[derive(Clone, Debug, PartialEq)]
pub struct EngcnState {
    stage: usize,
    x: Matrix,
    y: Matrix,
    labels: LabelVector,
    train_mask: Vec<bool>,
    pseudo: Vec<Option<usize>>,
    pseudo_train: Vec<usize>,
}

impl EngcnState {
    /// Stage 0: raw features, one-hot training labels, pseudo set = train.
    pub fn init(x: &Matrix, labels: &LabelVector, train: &[usize]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyBatch("EngcnState::init"));
        }
        let n = x.rows();
        if labels.len() != n {
            return Err(Error::Shape {
                op: "EngcnState::init",
                expected: (n, labels.num_classes()),
                found: (labels.len(), labels.num_classes()),
            });
        }
        let mut train_mask = vec![false; n];
        let mut pseudo = vec![None; n];
        for &v in train {
            if v >= n {
                return Err(Error::NodeOutOfRange { node: v, num_nodes: n });
            }
            train_mask[v] = true;
            pseudo[v] = Some(labels.get(v));
        }
        let mut pseudo_train = train.to_vec();
        pseudo_train.sort_unstable();
        pseudo_train.dedup();
        Ok(Self {
            stage: 0,
            x: x.clone(),
            y: labels.one_hot_rows(train),
            labels: labels.clone(),
            train_mask,
            pseudo,
            pseudo_train,
        })
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn features(&self) -> &Matrix {
        &self.x
    }

    pub fn label_embedding(&self) -> &Matrix {
        &self.y
    }

    pub fn pseudo_labels(&self) -> &[Option<usize>] {
        &self.pseudo
    }

    /// Sorted members of the pseudo-labelled training set.
    pub fn pseudo_train(&self) -> &[usize] {
        &self.pseudo_train
    }

    pub fn num_classes(&self) -> usize {
        self.labels.num_classes()
    }

    /// Moves to the next stage with one propagation of features and labels.
    /// Each product is counted in `spmm_count`; the meter sees the new
    /// matrices before the old ones are dropped.
    pub fn propagate(&mut self, a: &NormalizedAdjacency, spmm_count: &mut usize, meter: &mut StorageMeter) -> Result<()> {
        let x = a.spmm(&self.x)?;
        meter.acquire(x.bytes());
        let y = a.spmm(&self.y)?;
        meter.acquire(y.bytes());
        *spmm_count += 2;
        meter.release(self.x.bytes() + self.y.bytes());
        self.x = x;
        self.y = y;
        self.stage += 1;
        Ok(())
    }

    /// Admits every node whose top softmax probability reaches `threshold`.
    /// Training nodes keep their true labels; others take the new argmax.
    pub fn sle_update(&mut self, logits: &Matrix, threshold: f64) -> Result<()> {
        if logits.rows() != self.pseudo.len() {
            return Err(Error::Shape {
                op: "sle_update",
                expected: (self.pseudo.len(), self.num_classes()),
                found: logits.shape(),
            });
        }
        for i in 0..logits.rows() {
            if self.train_mask[i] {
                continue;
            }
            let p = softmax(logits.row(i));
            let c = math::argmax(&p);
            if p[c] >= threshold {
                if self.pseudo[i].is_none() {
                    self.pseudo_train.push(i);
                }
                self.pseudo[i] = Some(c);
            }
        }
        self.pseudo_train.sort_unstable();
        Ok(())
    }
}

/// `Φ(X^l) + Ψ(Y^l)` on `batch` in eval mode, `Φ(X⁰)` at stage 0.
pub fn stage_forward(state: &EngcnState, phi: &Mlp, psi: &Mlp, batch: &[usize]) -> Result<Matrix> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch("stage_forward"));
    }
    let mut out = phi.forward_eval(&state.x.gather_rows(batch))?;
    if state.stage > 0 {
        out.add_assign(&psi.forward_eval(&state.y.gather_rows(batch))?)?;
    }
    Ok(out)
}

fn stage_logits_all(state: &EngcnState, phi: &Mlp, psi: &Mlp) -> Result<Matrix> {
    let all: Vec<usize> = (0..state.x.rows()).collect();
    let parts = all
        .chunks(EVAL_CHUNK)
        .map(|c| stage_forward(state, phi, psi, c))
        .collect::<Result<Vec<_>>>()?;
    stack_rows(&parts)
}

/// Trains Φ (and Ψ after stage 0) for `epochs` epochs on the pseudo set.
/// Returns the mean loss of every epoch. Fresh Adam moments per stage.
pub fn train_stage(
    state: &EngcnState,
    phi: &mut Mlp,
    psi: &mut Mlp,
    config: &EngcnConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    let adam = AdamConfig::new(config.lr, config.weight_decay);
    let mut phi_opt = AdamState::new(adam, &phi.params);
    let mut psi_opt = AdamState::new(adam, &psi.params);
    let mut shuffle = rng::stream(seed, rng::streams::SHUFFLE);
    let mut dropout = rng::stream(seed, rng::streams::DROPOUT);
    let mut order = state.pseudo_train.clone();
    let mut losses = Vec::with_capacity(config.epochs_per_stage);
    for _ in 0..config.epochs_per_stage {
        order.shuffle(&mut shuffle);
        let mut total = 0.0;
        let mut steps = 0;
        for batch in order.chunks(config.batch_size) {
            let targets: Vec<usize> = batch.iter().map(|&v| state.pseudo[v].expect("pseudo set has labels")).collect();
            let (mut logits, phi_trace) = phi.forward_train(&state.x.gather_rows(batch), &mut dropout)?;
            let psi_trace = if state.stage > 0 {
                let (z, t) = psi.forward_train(&state.y.gather_rows(batch), &mut dropout)?;
                logits.add_assign(&z)?;
                Some(t)
            } else {
                None
            };
            let (loss, grad) = cross_entropy(&logits, &targets)?;
            let (g_phi, _) = phi.backward(&phi_trace, &grad)?;
            phi_opt.step(&mut phi.params, &g_phi);
            phi.update_running_stats(&phi_trace);
            if let Some(t) = psi_trace {
                let (g_psi, _) = psi.backward(&t, &grad)?;
                psi_opt.step(&mut psi.params, &g_psi);
                psi.update_running_stats(&t);
            }
            total += loss;
            steps += 1;
        }
        losses.push(total / steps.max(1) as f64);
    }
    Ok(losses)
}

/// Class per node: argmax over the sum of centered log-softmax rows of
/// every stage's logits. Ties go to the lowest class.
pub fn majority_vote(stage_logits: &[Matrix], nodes: &[usize]) -> Result<Vec<usize>> {
    let first = stage_logits.first().ok_or(Error::EmptyBatch("majority_vote"))?;
    let c = first.cols();
    let mut scores = Matrix::zeros(nodes.len(), c);
    for logits in stage_logits {
        if logits.cols() != c {
            return Err(Error::Shape {
                op: "majority_vote",
                expected: (logits.rows(), c),
                found: logits.shape(),
            });
        }
        let z = log_softmax_rows(&logits.gather_rows(nodes));
        scores.add_assign(&centered(&z))?;
    }
    Ok(argmax_rows(&scores))
}

/// Each row minus its mean.
pub fn centered(z: &Matrix) -> Matrix {
    let mut out = z.clone();
    let c = z.cols() as f64;
    for i in 0..z.rows() {
        let mean = z.row(i).iter().sum::<f64>() / c;
        for v in out.row_mut(i) {
            *v -= mean;
        }
    }
    out
}

/// Per-stage metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct StageRecord {
    pub stage: usize,
    /// One record per training epoch (`seconds` is left at zero).
    pub epochs: Vec<EpochRecord>,
    pub train_acc: f64,
    pub val_acc: f64,
    pub test_acc: f64,
    /// Pseudo-labelled set size the stage was trained on.
    pub pseudo_train_size: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngcnRun {
    pub predictions: Vec<usize>,
    pub stages: Vec<StageRecord>,
    pub train_acc: f64,
    pub val_acc: f64,
    pub test_acc: f64,
    /// Adjacency products performed by the run.
    pub spmm_count: usize,
    /// Peak bytes of resident propagated features and label embeddings.
    pub feature_high_water: usize,
    /// `(Φ, Ψ)` after every stage.
    pub snapshots: Vec<(Mlp, Mlp)>,
}

/// Runs every stage and the final vote. `a` should be the symmetrically
/// normalized adjacency with self-loops.
pub fn run_engcn(data: &Dataset, a: &NormalizedAdjacency, config: &EngcnConfig) -> Result<EngcnRun> {
    config.validate()?;
    let c = data.num_classes();
    let mut state = EngcnState::init(&data.features, &data.labels, &data.split.train)?;
    let mut meter = StorageMeter::new();
    meter.acquire(state.x.bytes() + state.y.bytes());
    let mut spmm_count = 0;
    let fresh = |stage: u64| -> Result<(Mlp, Mlp)> {
        let s = rng::child_seed(config.seed, stage);
        Ok((
            Mlp::new(config.mlp(data.feature_dim(), c, rng::child_seed(s, 1)))?,
            Mlp::new(config.mlp(c, c, rng::child_seed(s, 2)))?,
        ))
    };
    let (mut phi, mut psi) = fresh(0)?;
    let mut stages = Vec::with_capacity(config.num_stages + 1);
    let mut stage_logits = Vec::with_capacity(config.num_stages + 1);
    let mut snapshots = Vec::with_capacity(config.num_stages + 1);
    for l in 0..=config.num_stages {
        if l > 0 {
            state.propagate(a, &mut spmm_count, &mut meter)?;
            if !config.warm_start {
                (phi, psi) = fresh(l as u64)?;
            }
        }
        let pseudo_train_size = state.pseudo_train.len();
        let seed = rng::child_seed(config.seed, 1000 + l as u64);
        let mut epochs = Vec::with_capacity(config.epochs_per_stage);
        // one epoch at a time so the validation curve can be sampled
        let single = EngcnConfig {
            epochs_per_stage: 1,
            ..config.clone()
        };
        for e in 0..config.epochs_per_stage {
            let loss = train_stage(&state, &mut phi, &mut psi, &single, rng::child_seed(seed, e as u64))?[0];
            let val = argmax_rows(&stage_forward_or_empty(&state, &phi, &psi, &data.split.val)?);
            let val_acc = if data.split.val.is_empty() {
                0.0
            } else {
                data.split.val.iter().zip(&val).filter(|(&v, &p)| data.labels.get(v) == p).count() as f64
                    / data.split.val.len() as f64
            };
            epochs.push(EpochRecord {
                epoch: e + 1,
                loss,
                train_acc: 0.0,
                val_acc,
                test_acc: 0.0,
                seconds: 0.0,
            });
        }
        let logits = stage_logits_all(&state, &phi, &psi)?;
        let pred = argmax_rows(&logits);
        stages.push(StageRecord {
            stage: l,
            epochs,
            train_acc: accuracy(&pred, &data.labels, &data.split.train),
            val_acc: accuracy(&pred, &data.labels, &data.split.val),
            test_acc: accuracy(&pred, &data.labels, &data.split.test),
            pseudo_train_size,
        });
        state.sle_update(&logits, config.threshold)?;
        stage_logits.push(logits);
        snapshots.push((phi.clone(), psi.clone()));
    }
    let all: Vec<usize> = (0..data.num_nodes()).collect();
    let predictions = majority_vote(&stage_logits, &all)?;
    Ok(EngcnRun {
        train_acc: accuracy(&predictions, &data.labels, &data.split.train),
        val_acc: accuracy(&predictions, &data.labels, &data.split.val),
        test_acc: accuracy(&predictions, &data.labels, &data.split.test),
        predictions,
        stages,
        spmm_count,
        feature_high_water: meter.high_water(),
        snapshots,
    })
}

fn stage_forward_or_empty(state: &EngcnState, phi: &Mlp, psi: &Mlp, nodes: &[usize]) -> Result<Matrix> {
    if nodes.is_empty() {
        Ok(Matrix::zeros(0, state.num_classes()))
    } else {
        stage_forward(state, phi, psi, nodes)
    }
}
