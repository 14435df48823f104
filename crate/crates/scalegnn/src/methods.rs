//! Method registry: names, hyperparameter spaces and defaults, and one
//! instrumented training run per method.

use std::path::Path;
use std::time::Instant;

use scalegnn_core::adjacency::{NormKind, NormSpec, NormalizedAdjacency};
use scalegnn_core::engcn::{run_engcn, EngcnConfig, StageRecord};
use scalegnn_core::harness::{estimate_complexity, ComplexityEstimate, CostInputs, HpConfig, HpSpace, HpValue, MethodCategory};
use scalegnn_core::labelprop::{correct_and_smooth, zeros_propagation, CsConfig, DiffusionConfig, DiffusionKind};
use scalegnn_core::models::{precompute_hops, HopFeatures, HopMlp, HopModel, Sagn, SagnConfig, SampledGnn, SampledGnnConfig, Sign, SignConfig};
use scalegnn_core::nn::{softmax_rows, MlpConfig};
use scalegnn_core::sampling::{Sampler, SamplerConfig, SamplerKind};
use scalegnn_core::train::{split_accuracies, EpochRecord, GnnTrainer, HopTrainer, TrainConfig, Trainer};
use scalegnn_core::{rng, Dataset};

use crate::bundle;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    GraphSage,
    FastGcn,
    Ladies,
    ClusterGcn,
    SaintNode,
    SaintEdge,
    SaintRw,
    Sgc,
    Sign,
    Sagn,
    Lp,
    Cs,
    Engcn,
}

impl Method {
    pub const ALL: [Method; 13] = [
        Method::GraphSage,
        Method::FastGcn,
        Method::Ladies,
        Method::ClusterGcn,
        Method::SaintNode,
        Method::SaintEdge,
        Method::SaintRw,
        Method::Sgc,
        Method::Sign,
        Method::Sagn,
        Method::Lp,
        Method::Cs,
        Method::Engcn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::GraphSage => "graphsage",
            Method::FastGcn => "fastgcn",
            Method::Ladies => "ladies",
            Method::ClusterGcn => "clustergcn",
            Method::SaintNode => "saint-node",
            Method::SaintEdge => "saint-edge",
            Method::SaintRw => "saint-rw",
            Method::Sgc => "sgc",
            Method::Sign => "sign",
            Method::Sagn => "sagn",
            Method::Lp => "lp",
            Method::Cs => "cs",
            Method::Engcn => "engcn",
        }
    }

    pub fn parse(name: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == name)
    }

    pub fn sampler_kind(self) -> Option<SamplerKind> {
        Some(match self {
            Method::GraphSage => SamplerKind::NodeWise,
            Method::FastGcn => SamplerKind::FastGcn,
            Method::Ladies => SamplerKind::Ladies,
            Method::ClusterGcn => SamplerKind::Cluster,
            Method::SaintNode => SamplerKind::SaintNode,
            Method::SaintEdge => SamplerKind::SaintEdge,
            Method::SaintRw => SamplerKind::SaintRw,
            _ => return None,
        })
    }

    pub fn category(self) -> Option<MethodCategory> {
        match self {
            Method::GraphSage => Some(MethodCategory::NodeWise),
            Method::FastGcn | Method::Ladies => Some(MethodCategory::LayerWise),
            Method::ClusterGcn | Method::SaintNode | Method::SaintEdge | Method::SaintRw => Some(MethodCategory::Subgraph),
            Method::Sgc => Some(MethodCategory::Sgc),
            Method::Sign | Method::Sagn => Some(MethodCategory::Precompute),
            Method::Lp | Method::Cs | Method::Engcn => None,
        }
    }

    /// The searchable axes.
    pub fn space(self) -> HpSpace {
        match self {
            m if m.sampler_kind().is_some() => HpSpace::sampling(),
            Method::Sgc | Method::Sign | Method::Sagn => HpSpace::precompute(),
            Method::Lp => HpSpace::label_propagation(),
            Method::Cs => HpSpace::label_propagation().without("diffusion"),
            _ => HpSpace::engcn(),
        }
    }

    /// Keys outside the search space and their defaults.
    fn extras(self) -> Vec<(&'static str, HpValue)> {
        use HpValue::*;
        match self {
            m if m.sampler_kind().is_some() => {
                let mut v = vec![("fanout", Int(10))];
                match m {
                    Method::SaintRw => v.push(("walk_length", Int(2))),
                    Method::ClusterGcn => {
                        v.push(("num_clusters", Int(50)));
                        v.push(("clusters_per_batch", Int(5)));
                    }
                    _ => {}
                }
                v
            }
            Method::Sgc => vec![("norm", Text("sym".into()))],
            Method::Sign | Method::Sagn => vec![("norm", Text("sym".into())), ("mlp_layers", Int(2))],
            Method::Lp | Method::Cs => vec![
                ("lr", Float(1e-2)),
                ("weight_decay", Float(1e-4)),
                ("dropout", Float(0.2)),
                ("epochs", Int(50)),
                ("hidden", Int(128)),
            ],
            _ => vec![("mlp_layers", Int(2)), ("warm_start", Bool(true))],
        }
    }

    /// Every accepted key with its default value.
    pub fn defaults(self) -> HpConfig {
        let mut d = self.space().defaults();
        for (k, v) in self.extras() {
            d.insert(k.to_string(), v);
        }
        d
    }
}

/// Typed reads from a resolved config.
pub struct Hp<'a>(pub &'a HpConfig);

impl Hp<'_> {
    fn get(&self, key: &str) -> Result<&HpValue> {
        self.0.get(key).ok_or_else(|| Error::Config(format!("missing key {key}")))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        self.get(key)?.as_f64().ok_or_else(|| Error::Config(format!("{key} must be a number")))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        self.get(key)?.as_usize().ok_or_else(|| Error::Config(format!("{key} must be an integer")))
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        self.get(key)?.as_bool().ok_or_else(|| Error::Config(format!("{key} must be true or false")))
    }

    pub fn str(&self, key: &str) -> Result<&str> {
        self.get(key)?.as_str().ok_or_else(|| Error::Config(format!("{key} must be text")))
    }

    pub fn norm(&self, key: &str) -> Result<NormSpec> {
        let kind = NormKind::parse(self.str(key)?).ok_or_else(|| Error::Config(format!("{key} must be row, col or sym")))?;
        Ok(NormSpec { kind, self_loops: true })
    }
}

/// Everything a trial measured, before serialization.
#[derive(Clone, Debug, Default)]
pub struct MethodOutcome {
    pub epochs: Vec<EpochRecord>,
    /// Optimizer steps of every epoch in `epochs`, when counted.
    pub epoch_steps: Vec<usize>,
    /// Stage boundaries of `epochs` for the ensembling trainer.
    pub stages: Vec<StageRecord>,
    pub train_acc: f64,
    pub val_acc: f64,
    pub test_acc: f64,
    pub train_steps: usize,
    pub train_seconds: f64,
    pub peak_activation_bytes: usize,
    pub estimate: Option<ComplexityEstimate>,
    /// Mean node rows touched per mini-batch.
    pub active_nodes_per_batch: f64,
}

impl MethodOutcome {
    pub fn iters_per_sec(&self) -> f64 {
        if self.train_seconds > 0.0 {
            self.train_steps as f64 / self.train_seconds
        } else {
            0.0
        }
    }
}

/// Epoch loop with per-epoch evaluation. Only the training steps are timed.
pub fn train_epochs(trainer: &mut dyn Trainer, data: &Dataset, epochs: usize) -> Result<(Vec<EpochRecord>, Vec<usize>, f64)> {
    let mut records = Vec::with_capacity(epochs);
    let (mut steps, mut seconds) = (Vec::with_capacity(epochs), 0.0);
    for epoch in 1..=epochs {
        let start = Instant::now();
        let mut total = 0.0;
        let mut n = 0;
        loop {
            total += trainer.train_step()?;
            n += 1;
            if trainer.remaining_in_epoch() == 0 {
                break;
            }
        }
        let s = start.elapsed().as_secs_f64();
        steps.push(n);
        seconds += s;
        let (train_acc, val_acc, test_acc) = split_accuracies(&trainer.predict()?, data);
        records.push(EpochRecord {
            epoch,
            loss: total / n as f64,
            train_acc,
            val_acc,
            test_acc,
            seconds: s,
        });
    }
    Ok((records, steps, seconds))
}

/// Accuracies at the epoch with the best validation accuracy (first on ties).
pub fn best_epoch(records: &[EpochRecord]) -> Option<&EpochRecord> {
    let mut best: Option<&EpochRecord> = None;
    for r in records {
        if best.is_none_or(|b| r.val_acc > b.val_acc) {
            best = Some(r);
        }
    }
    best
}

fn train_config(hp: &Hp, seed: u64, batch_size: usize) -> Result<TrainConfig> {
    Ok(TrainConfig {
        epochs: hp.usize("epochs")?,
        lr: hp.f64("lr")?,
        weight_decay: hp.f64("weight_decay")?,
        batch_size,
        seed,
    })
}

fn finish(mut out: MethodOutcome) -> MethodOutcome {
    if let Some(b) = best_epoch(&out.epochs) {
        out.train_acc = b.train_acc;
        out.val_acc = b.val_acc;
        out.test_acc = b.test_acc;
    }
    out
}

/// Hop features for `norm` and `k`: read from the bundle's cache when one
/// exists, computed otherwise.
pub fn hop_features(data: &Dataset, bundle_dir: Option<&Path>, norm: NormSpec, k: usize) -> Result<HopFeatures> {
    if let Some(dir) = bundle_dir {
        if let Some(h) = bundle::load_hops(dir, norm, k)? {
            return Ok(h);
        }
    }
    Ok(precompute_hops(&norm.apply(&data.graph), &data.features, k, None)?)
}

/// The sampler configuration a sampled method uses under `hp`.
pub fn sampler_config(method: Method, hp: &Hp, seed: u64) -> Result<SamplerConfig> {
    let kind = method
        .sampler_kind()
        .ok_or_else(|| Error::Config(format!("{} does not sample", method.name())))?;
    let mut c = SamplerConfig::new(kind, hp.usize("layers")?, rng::child_seed(seed, 1));
    c.fanout = hp.usize("fanout")?;
    c.batch_size = hp.usize("batch_size")?;
    c.num_roots = c.batch_size;
    if method == Method::SaintRw {
        c.walk_length = hp.usize("walk_length")?;
    }
    if method == Method::ClusterGcn {
        c.num_clusters = hp.usize("num_clusters")?;
        c.clusters_per_batch = hp.usize("clusters_per_batch")?;
    }
    Ok(c)
}

fn run_sampled(method: Method, hp: &Hp, data: &Dataset, seed: u64) -> Result<MethodOutcome> {
    let sc = sampler_config(method, hp, seed)?;
    let adj = sc.norm.apply(&data.graph);
    let mut mc = SampledGnnConfig::with_depth(data.feature_dim(), hp.usize("hidden")?, data.num_classes(), sc.depth, rng::child_seed(seed, 2));
    mc.dropout = hp.f64("dropout")?;
    // layer-wise plans keep no self rows
    mc.use_self = !matches!(method, Method::FastGcn | Method::Ladies);
    let model = SampledGnn::new(mc)?;

    // a separate sampler with the same seed measures plan sizes without
    // touching the trainer's stream
    let mut probe = Sampler::new(sc.clone(), &data.graph, &adj)?;
    let plans = probe.epoch(&data.split.train)?;
    let active = plans.iter().map(|p| p.active_nodes()).sum::<usize>() as f64 / plans.len() as f64;
    let batch_nodes = plans.iter().map(|p| p.targets().len()).sum::<usize>() as f64 / plans.len() as f64;

    let sampler = Sampler::new(sc.clone(), &data.graph, &adj)?;
    let tc = train_config(hp, seed, sc.batch_size)?;
    let mut trainer = GnnTrainer::new(model, sampler, data, &adj, &tc)?;
    let (epochs, steps, seconds) = train_epochs(&mut trainer, data, tc.epochs)?;
    let category = method.category().expect("sampled methods have a category");
    let inputs = CostInputs {
        batch: batch_nodes,
        fanout: sc.fanout as f64,
        layers: sc.depth,
        dim: hp.usize("hidden")? as f64,
        num_nodes: data.num_nodes() as f64,
        nnz: adj.structure().num_edges() as f64,
    };
    Ok(finish(MethodOutcome {
        epochs,
        train_steps: steps.iter().sum(),
        epoch_steps: steps,
        train_seconds: seconds,
        peak_activation_bytes: trainer.peak_activation_bytes(),
        estimate: Some(estimate_complexity(category, &inputs)),
        active_nodes_per_batch: active,
        ..Default::default()
    }))
}

fn run_hop_model<M: HopModel>(model: M, hops: &HopFeatures, hp: &Hp, data: &Dataset, seed: u64, batch: usize) -> Result<(MethodOutcome, M)> {
    let tc = train_config(hp, seed, batch)?;
    let mut trainer = HopTrainer::new(model, hops, &data.labels, &data.split.train, &tc)?;
    let (epochs, steps, seconds) = train_epochs(&mut trainer, data, tc.epochs)?;
    let peak = trainer.peak_activation_bytes();
    Ok((
        MethodOutcome {
            epochs,
            train_steps: steps.iter().sum(),
            epoch_steps: steps,
            train_seconds: seconds,
            peak_activation_bytes: peak,
            ..Default::default()
        },
        trainer.model,
    ))
}

/// Mini-batch size for methods without a batch-size axis.
pub const PRECOMPUTE_BATCH: usize = 1000;

fn run_precompute(method: Method, hp: &Hp, data: &Dataset, seed: u64, bundle_dir: Option<&Path>) -> Result<MethodOutcome> {
    let k = hp.usize("layers")?;
    let hops = hop_features(data, bundle_dir, hp.norm("norm")?, k)?;
    let (d, c, hidden) = (data.feature_dim(), data.num_classes(), hp.usize("hidden")?);
    let s = rng::child_seed(seed, 2);
    let batch = PRECOMPUTE_BATCH.min(data.split.train.len());
    let (mut out, category, layers) = match method {
        Method::Sgc => (run_hop_model(HopMlp::new(d, c, k, s)?, &hops, hp, data, seed, batch)?.0, MethodCategory::Sgc, 1),
        Method::Sign => {
            let mut cfg = SignConfig::new(d, c, k, hidden, s);
            cfg.readout_layers = hp.usize("mlp_layers")?;
            cfg.dropout = hp.f64("dropout")?;
            let layers = cfg.readout_layers + 1;
            (run_hop_model(Sign::new(cfg)?, &hops, hp, data, seed, batch)?.0, MethodCategory::Precompute, layers)
        }
        _ => {
            let mut cfg = SagnConfig::new(d, c, k.max(1), hidden, s);
            cfg.num_layers = hp.usize("mlp_layers")?;
            cfg.dropout = hp.f64("dropout")?;
            let layers = cfg.num_layers + 1;
            (run_hop_model(Sagn::new(cfg)?, &hops, hp, data, seed, batch)?.0, MethodCategory::Precompute, layers)
        }
    };
    out.active_nodes_per_batch = batch as f64;
    out.estimate = Some(estimate_complexity(
        category,
        &CostInputs {
            batch: batch as f64,
            fanout: 0.0,
            layers,
            dim: hidden as f64,
            num_nodes: data.num_nodes() as f64,
            nnz: data.graph.num_edges() as f64,
        },
    ));
    Ok(finish(out))
}

fn diffusion_config(hp: &Hp, kind: DiffusionKind) -> Result<DiffusionConfig> {
    let c = DiffusionConfig {
        kind,
        alpha: hp.f64("alpha")?,
        num_propagations: hp.usize("num_propagations")?,
        autoscale: hp.bool("autoscale")?,
        norm: hp.norm("norm")?,
        num_mlp_layers: hp.usize("mlp_layers")?,
        ..DiffusionConfig::default()
    };
    c.validate()?;
    Ok(c)
}

fn run_label_prop(method: Method, hp: &Hp, data: &Dataset, seed: u64) -> Result<MethodOutcome> {
    let kind = if method == Method::Cs {
        DiffusionKind::Residual
    } else {
        DiffusionKind::parse(hp.str("diffusion")?).ok_or_else(|| Error::Config("diffusion must be residual or zeros".into()))?
    };
    let cfg = diffusion_config(hp, kind)?;
    let adj = cfg.norm.apply(&data.graph);
    let train = &data.split.train;
    let start = Instant::now();
    let (scores, mut out) = match kind {
        DiffusionKind::Zeros => {
            let s = zeros_propagation(&adj, &data.labels, train, &cfg)?;
            let (_, val_acc, _) = split_accuracies(&s, data);
            let point = EpochRecord {
                epoch: 1,
                loss: 0.0,
                train_acc: 0.0,
                val_acc,
                test_acc: 0.0,
                seconds: 0.0,
            };
            (s, MethodOutcome {
                epochs: vec![point],
                ..Default::default()
            })
        }
        DiffusionKind::Residual => {
            let hops = HopFeatures::from_hops(vec![data.features.clone()], adj.spec())?;
            let mlp = MlpConfig::with_depth(data.feature_dim(), hp.usize("hidden")?, data.num_classes(), cfg.num_mlp_layers, rng::child_seed(seed, 2))
                .dropout(hp.f64("dropout")?);
            let batch = PRECOMPUTE_BATCH.min(train.len());
            let (base, model) = run_hop_model(HopMlp::with_config(mlp, 0)?, &hops, hp, data, seed, batch)?;
            let z = softmax_rows(&model.forward_eval(&[data.features.clone()])?);
            (correct_and_smooth(&adj, &z, &data.labels, train, &CsConfig::from_diffusion(&cfg))?, base)
        }
    };
    out.train_seconds = start.elapsed().as_secs_f64();
    let (train_acc, val_acc, test_acc) = split_accuracies(&scores, data);
    out.train_acc = train_acc;
    out.val_acc = val_acc;
    out.test_acc = test_acc;
    Ok(out)
}

/// Ensembling-trainer settings from a resolved config.
pub fn engcn_config(hp: &Hp, seed: u64) -> Result<EngcnConfig> {
    Ok(EngcnConfig {
        num_stages: hp.usize("stages")?,
        epochs_per_stage: hp.usize("epochs")?,
        hidden: hp.usize("hidden")?,
        mlp_layers: hp.usize("mlp_layers")?,
        dropout: hp.f64("dropout")?,
        batchnorm: hp.bool("batchnorm")?,
        lr: hp.f64("lr")?,
        weight_decay: hp.f64("weight_decay")?,
        batch_size: hp.usize("batch_size")?,
        threshold: hp.f64("threshold")?,
        warm_start: hp.bool("warm_start")?,
        seed,
    })
}

fn run_ensemble(hp: &Hp, data: &Dataset, seed: u64) -> Result<MethodOutcome> {
    let cfg = engcn_config(hp, seed)?;
    let adj = NormalizedAdjacency::new(&data.graph, NormKind::Sym, true);
    let start = Instant::now();
    let run = run_engcn(data, &adj, &cfg)?;
    let seconds = start.elapsed().as_secs_f64();
    let mut epochs = Vec::new();
    for s in &run.stages {
        epochs.extend(s.epochs.iter().copied());
    }
    let epoch_steps: Vec<usize> = run
        .stages
        .iter()
        .flat_map(|s| std::iter::repeat_n(s.pseudo_train_size.div_ceil(cfg.batch_size), s.epochs.len()))
        .collect();
    Ok(MethodOutcome {
        epochs,
        stages: run.stages,
        train_acc: run.train_acc,
        val_acc: run.val_acc,
        test_acc: run.test_acc,
        train_steps: epoch_steps.iter().sum(),
        epoch_steps,
        train_seconds: seconds,
        peak_activation_bytes: 0,
        estimate: None,
        active_nodes_per_batch: cfg.batch_size.min(data.num_nodes()) as f64,
    })
}

/// Trains and evaluates `method` once under the resolved config `config`.
pub fn run_method(method: Method, config: &HpConfig, data: &Dataset, seed: u64, bundle_dir: Option<&Path>) -> Result<MethodOutcome> {
    let hp = Hp(config);
    if data.split.train.is_empty() {
        return Err(Error::Config("the dataset has no training nodes".into()));
    }
    match method {
        m if m.sampler_kind().is_some() => run_sampled(m, &hp, data, seed),
        Method::Sgc | Method::Sign | Method::Sagn => run_precompute(method, &hp, data, seed, bundle_dir),
        Method::Lp | Method::Cs => run_label_prop(method, &hp, data, seed),
        _ => run_ensemble(&hp, data, seed),
    }
}
