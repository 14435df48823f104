//! Trials, greedy search and the throughput benchmark on top of the core
//! harness logic, with wall-clock timing.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use scalegnn_core::harness::{self as core_harness, greedy_search, HpConfig, HpSpace, HpValue, Throughput};
use scalegnn_core::{rng, Dataset};

use crate::config::RunConfig;
use crate::error::Result;
use crate::methods::{run_method, Method, MethodOutcome};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub stage: usize,
    pub epoch: usize,
    pub loss: f64,
    pub val_acc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: usize,
    pub pseudo_train_size: usize,
    pub train_acc: f64,
    pub val_acc: f64,
    pub test_acc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatStats {
    pub seeds: Vec<u64>,
    pub test_mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub test_std: f64,
    pub val_mean: f64,
    pub val_std: f64,
}

/// One trained and evaluated configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub schema_version: u32,
    pub trial_id: usize,
    pub method: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    /// Accuracies at the best validation epoch.
    pub train_acc: f64,
    pub val_acc: f64,
    pub test_acc: f64,
    pub curve: Vec<CurveRow>,
    pub epoch_seconds: Vec<f64>,
    pub iters_per_sec: f64,
    pub peak_activation_bytes: u64,
    pub estimated_activation_bytes: Option<f64>,
    pub estimated_time: Option<f64>,
    /// The raw batch-size knob, when the method has one.
    pub batch_size: Option<usize>,
    pub active_nodes_per_batch: f64,
    pub stages: Vec<StageSummary>,
    pub repeats: Option<RepeatStats>,
}

impl TrialResult {
    /// Copy without wall-clock fields, for determinism comparisons.
    pub fn without_timing(&self) -> TrialResult {
        TrialResult {
            epoch_seconds: Vec::new(),
            iters_per_sec: 0.0,
            ..self.clone()
        }
    }
}

fn curve_rows(out: &MethodOutcome) -> Vec<CurveRow> {
    let mut rows = Vec::with_capacity(out.epochs.len());
    if out.stages.is_empty() {
        rows.extend(out.epochs.iter().map(|e| CurveRow {
            stage: 0,
            epoch: e.epoch,
            loss: e.loss,
            val_acc: e.val_acc,
        }));
    } else {
        for s in &out.stages {
            rows.extend(s.epochs.iter().map(|e| CurveRow {
                stage: s.stage,
                epoch: e.epoch,
                loss: e.loss,
                val_acc: e.val_acc,
            }));
        }
    }
    rows
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Seeds of the repeats: the base seed, then derived ones.
pub fn repeat_seeds(seed: u64, repeats: usize) -> Vec<u64> {
    (0..repeats as u64).map(|r| if r == 0 { seed } else { rng::child_seed(seed, r) }).collect()
}

/// Runs `config` (all repeats) and reports the first run with repeat
/// statistics attached when more than one ran.
pub fn run_trial(config: &RunConfig, data: &Dataset, bundle_dir: Option<&Path>, trial_id: usize) -> Result<TrialResult> {
    let seeds = repeat_seeds(config.seed, config.repeats);
    let mut runs = Vec::with_capacity(seeds.len());
    for &s in &seeds {
        runs.push(run_method(config.method, &config.params, data, s, bundle_dir)?);
    }
    let first = &runs[0];
    let repeats = (runs.len() > 1).then(|| {
        let (test_mean, test_std) = mean_std(&runs.iter().map(|r| r.test_acc).collect::<Vec<_>>());
        let (val_mean, val_std) = mean_std(&runs.iter().map(|r| r.val_acc).collect::<Vec<_>>());
        RepeatStats {
            seeds: seeds.clone(),
            test_mean,
            test_std,
            val_mean,
            val_std,
        }
    });
    Ok(TrialResult {
        schema_version: SCHEMA_VERSION,
        trial_id,
        method: config.method.name().to_string(),
        seed: config.seed,
        config: config.params.iter().map(|(k, v)| (k.clone(), v.to_string())).collect(),
        train_acc: first.train_acc,
        val_acc: first.val_acc,
        test_acc: first.test_acc,
        curve: curve_rows(first),
        epoch_seconds: first.epochs.iter().map(|e| e.seconds).collect(),
        iters_per_sec: first.iters_per_sec(),
        peak_activation_bytes: first.peak_activation_bytes as u64,
        estimated_activation_bytes: first.estimate.map(|e| e.activation_bytes),
        estimated_time: first.estimate.map(|e| e.time),
        batch_size: config.params.get("batch_size").and_then(HpValue::as_usize),
        active_nodes_per_batch: first.active_nodes_per_batch,
        stages: first
            .stages
            .iter()
            .map(|s| StageSummary {
                stage: s.stage,
                pseudo_train_size: s.pseudo_train_size,
                train_acc: s.train_acc,
                val_acc: s.val_acc,
                test_acc: s.test_acc,
            })
            .collect(),
        repeats,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisLog {
    pub axis: String,
    pub candidates: Vec<String>,
    pub trial_ids: Vec<usize>,
    pub chosen: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchLog {
    pub schema_version: u32,
    pub method: String,
    pub seed: u64,
    pub axes: Vec<AxisLog>,
    pub trials: Vec<TrialResult>,
    pub best_config: BTreeMap<String, String>,
    pub best_val_acc: f64,
    pub complete: bool,
}

/// Greedy search over `space`, starting from `base` for keys outside it.
/// Each trial uses the base seed, so identical configs score identically.
pub fn hp_search(base: &RunConfig, space: &HpSpace, data: &Dataset, bundle_dir: Option<&Path>, budget: Option<usize>) -> Result<SearchLog> {
    let mut trial_id = 0;
    let mut failure = None;
    let log = greedy_search(space, budget, |trial: &HpConfig| {
        let mut c = base.clone();
        for (k, v) in trial {
            c.params.insert(k.clone(), v.clone());
        }
        match run_trial(&c, data, bundle_dir, trial_id) {
            Ok(r) => {
                trial_id += 1;
                Ok((r.val_acc, r))
            }
            Err(e) => {
                let msg = e.to_string();
                failure = Some(e);
                Err(scalegnn_core::Error::InvalidConfig(msg))
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let log = log?;
    let mut best = base.params.clone();
    best.extend(log.best_config.clone());
    Ok(SearchLog {
        schema_version: SCHEMA_VERSION,
        method: base.method.name().to_string(),
        seed: base.seed,
        axes: log
            .visits
            .iter()
            .map(|v| AxisLog {
                axis: v.axis.clone(),
                candidates: space
                    .axis(&v.axis)
                    .map(|a| a.candidates.iter().map(ToString::to_string).collect())
                    .unwrap_or_default(),
                trial_ids: v.trials.clone(),
                chosen: v.chosen.to_string(),
            })
            .collect(),
        trials: log.trials.into_iter().map(|t| t.outcome).collect(),
        best_config: best.iter().map(|(k, v)| (k.clone(), v.to_string())).collect(),
        best_val_acc: log.best_val_acc,
        complete: log.complete,
    })
}

/// Times `step` with the monotonic clock after `warmup` untimed calls.
pub fn measure_throughput<S: FnMut() -> Result<()>>(mut step: S, warmup: usize, timed: usize) -> Result<Throughput> {
    let origin = Instant::now();
    let mut failure = None;
    let r = core_harness::measure_throughput(
        || {
            step().map_err(|e| {
                let msg = e.to_string();
                failure = Some(e);
                scalegnn_core::Error::InvalidConfig(msg)
            })
        },
        warmup,
        timed,
        || origin.elapsed().as_secs_f64(),
    );
    match (r, failure) {
        (_, Some(e)) => Err(e),
        (r, None) => Ok(r?),
    }
}

/// Settings pinned for comparable benchmark runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchPreset {
    pub methods: Vec<String>,
    pub hidden: usize,
    pub layers: usize,
    pub batch_size: usize,
    pub warmup_epochs: usize,
    pub timed_epochs: usize,
}

impl Default for BenchPreset {
    fn default() -> Self {
        Self {
            methods: ["sgc", "sign", "sagn", "graphsage", "fastgcn", "ladies", "clustergcn", "saint-node", "saint-edge", "saint-rw"]
                .map(String::from)
                .to_vec(),
            hidden: 128,
            layers: 2,
            batch_size: 1000,
            warmup_epochs: 1,
            timed_epochs: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub method: String,
    /// Steps per second over the timed epochs.
    pub iters_per_sec: f64,
    pub epoch_seconds: f64,
    pub peak_activation_bytes: u64,
    pub estimated_activation_bytes: Option<f64>,
    pub active_nodes_per_batch: f64,
    pub test_acc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub preset: BenchPreset,
    pub num_nodes: usize,
    pub num_edges: usize,
    pub entries: Vec<BenchEntry>,
}

/// Config of `method` under the preset.
pub fn bench_config(method: Method, preset: &BenchPreset, seed: u64) -> RunConfig {
    let mut c = RunConfig::new(method);
    c.seed = seed;
    c.allow_off_grid = true;
    let p = &mut c.params;
    p.insert("epochs".into(), HpValue::Int(preset.warmup_epochs + preset.timed_epochs));
    p.insert("hidden".into(), HpValue::Int(preset.hidden));
    p.insert("layers".into(), HpValue::Int(preset.layers));
    if p.contains_key("batch_size") {
        p.insert("batch_size".into(), HpValue::Int(preset.batch_size));
    }
    c
}

/// Runs every preset method; the first `warmup_epochs` are excluded from
/// the timing.
pub fn bench(preset: &BenchPreset, data: &Dataset, bundle_dir: Option<&Path>, seed: u64) -> Result<BenchReport> {
    let mut entries = Vec::with_capacity(preset.methods.len());
    for name in &preset.methods {
        let method = Method::parse(name).ok_or_else(|| crate::error::Error::Config(format!("unknown method {name}")))?;
        let c = bench_config(method, preset, seed);
        let out = run_method(method, &c.params, data, seed, bundle_dir)?;
        let w = preset.warmup_epochs.min(out.epochs.len());
        let seconds: f64 = out.epochs[w..].iter().map(|e| e.seconds).sum();
        let steps: usize = out.epoch_steps.get(w..).map_or(0, |s| s.iter().sum());
        let timed = out.epochs.len() - w;
        entries.push(BenchEntry {
            method: name.clone(),
            iters_per_sec: if seconds > 0.0 { steps as f64 / seconds } else { 0.0 },
            epoch_seconds: if timed > 0 { seconds / timed as f64 } else { 0.0 },
            peak_activation_bytes: out.peak_activation_bytes as u64,
            estimated_activation_bytes: out.estimate.map(|e| e.activation_bytes),
            active_nodes_per_batch: out.active_nodes_per_batch,
            test_acc: out.test_acc,
        });
    }
    Ok(BenchReport {
        schema_version: SCHEMA_VERSION,
        preset: preset.clone(),
        num_nodes: data.num_nodes(),
        num_edges: data.graph.num_edges(),
        entries,
    })
}
