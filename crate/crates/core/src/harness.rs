//! Greedy hyperparameter search, analytic complexity accounting,
//! throughput timing and convergence curves.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::train::EpochRecord;

/// One hyperparameter value.
#[derive(Clone, Debug, PartialEq)]
pub enum HpValue {
    Float(f64),
    Int(usize),
    Bool(bool),
    Text(String),
}

impl HpValue {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            HpValue::Float(v) => Some(v),
            HpValue::Int(v) => Some(v as f64),
            _ => None,
        }
    }

    pub fn as_usize(&self) -> Option<usize> {
        match *self {
            HpValue::Int(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self {
            HpValue::Bool(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            HpValue::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Parses `text` as the same variant as `self`.
    pub fn parse_like(&self, text: &str) -> Option<HpValue> {
        let t = text.trim();
        Some(match self {
            HpValue::Float(_) => HpValue::Float(t.parse().ok()?),
            HpValue::Int(_) => HpValue::Int(t.parse().ok()?),
            HpValue::Bool(_) => HpValue::Bool(match t {
                "true" | "True" | "1" => true,
                "false" | "False" | "0" => false,
                _ => return None,
            }),
            HpValue::Text(_) => HpValue::Text(t.to_string()),
        })
    }
}

impl fmt::Display for HpValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HpValue::Float(v) => write!(f, "{v}"),
            HpValue::Int(v) => write!(f, "{v}"),
            HpValue::Bool(v) => write!(f, "{v}"),
            HpValue::Text(v) => f.write_str(v),
        }
    }
}

pub type HpConfig = BTreeMap<String, HpValue>;

#[derive(Clone, Debug, PartialEq)]
pub struct HpAxis {
    pub name: String,
    pub candidates: Vec<HpValue>,
    /// Index of the default inside `candidates`.
    pub default: usize,
}

impl HpAxis {
    pub fn new(name: &str, candidates: Vec<HpValue>, default: usize) -> Result<Self> {
        if candidates.is_empty() || default >= candidates.len() {
            return Err(Error::InvalidConfig(alloc::format!("axis {name} needs a default among its candidates")));
        }
        Ok(Self {
            name: name.to_string(),
            candidates,
            default,
        })
    }

    pub fn default_value(&self) -> &HpValue {
        &self.candidates[self.default]
    }
}

fn floats(v: &[f64]) -> Vec<HpValue> {
    v.iter().map(|&x| HpValue::Float(x)).collect()
}

fn ints(v: &[usize]) -> Vec<HpValue> {
    v.iter().map(|&x| HpValue::Int(x)).collect()
}

fn texts(v: &[&str]) -> Vec<HpValue> {
    v.iter().map(|&x| HpValue::Text(x.to_string())).collect()
}

fn bools() -> Vec<HpValue> {
    alloc::vec![HpValue::Bool(true), HpValue::Bool(false)]
}

/// Ordered axes; the search visits them in this order.
#[derive(Clone, Debug, PartialEq)]
pub struct HpSpace {
    axes: Vec<HpAxis>,
}

impl HpSpace {
    pub fn new(axes: Vec<HpAxis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidConfig("search space has no axes".into()));
        }
        for (i, a) in axes.iter().enumerate() {
            if axes[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::InvalidConfig(alloc::format!("duplicate axis {}", a.name)));
            }
        }
        Ok(Self { axes })
    }

    /// Axes for sampling-based and precomputing methods: lr, weight decay,
    /// dropout, epochs, hidden width, layers, batch size.
    pub fn sampling() -> Self {
        Self::new(alloc::vec![
            HpAxis::new("lr", floats(&[1e-2, 1e-3, 1e-4]), 0).unwrap(),
            HpAxis::new("weight_decay", floats(&[1e-4, 2e-4, 4e-4]), 0).unwrap(),
            HpAxis::new("dropout", floats(&[0.1, 0.2, 0.5, 0.7]), 1).unwrap(),
            HpAxis::new("epochs", ints(&[20, 30, 40, 50]), 3).unwrap(),
            HpAxis::new("hidden", ints(&[128, 256, 512]), 0).unwrap(),
            HpAxis::new("layers", ints(&[2, 4, 6]), 0).unwrap(),
            HpAxis::new("batch_size", ints(&[1000, 2000, 5000]), 0).unwrap(),
        ])
        .unwrap()
    }

    /// The sampling axes without batch size.
    pub fn precompute() -> Self {
        Self::sampling().without("batch_size")
    }

    /// Axes for label propagation: diffusion type, propagation steps,
    /// aggregation ratio, adjacency norm, autoscale, base MLP layers.
    pub fn label_propagation() -> Self {
        Self::new(alloc::vec![
            HpAxis::new("diffusion", texts(&["residual", "zeros"]), 0).unwrap(),
            HpAxis::new("num_propagations", ints(&[2, 20, 50]), 1).unwrap(),
            HpAxis::new("alpha", floats(&[0.5, 0.75, 0.9, 0.99]), 1).unwrap(),
            HpAxis::new("norm", texts(&["row", "col", "sym"]), 2).unwrap(),
            HpAxis::new("autoscale", bools(), 0).unwrap(),
            HpAxis::new("mlp_layers", ints(&[2, 3, 4]), 0).unwrap(),
        ])
        .unwrap()
    }

    /// Axes for the layer-wise ensembling trainer, defaulting to the
    /// Flickr settings. `stages` counts propagations, so
    /// feature layers number `stages + 1`.
    pub fn engcn() -> Self {
        Self::new(alloc::vec![
            HpAxis::new("lr", floats(&[1e-2, 1e-3, 1e-4]), 2).unwrap(),
            HpAxis::new("weight_decay", floats(&[0.0, 1e-5, 1e-4]), 2).unwrap(),
            HpAxis::new("dropout", floats(&[0.2, 0.5, 0.7]), 0).unwrap(),
            HpAxis::new("epochs", ints(&[30, 50, 70]), 2).unwrap(),
            HpAxis::new("hidden", ints(&[128, 256, 512]), 1).unwrap(),
            HpAxis::new("batch_size", ints(&[5000, 10000]), 1).unwrap(),
            HpAxis::new("batchnorm", bools(), 1).unwrap(),
            HpAxis::new("threshold", floats(&[0.8, 0.9, 0.95]), 1).unwrap(),
            HpAxis::new("stages", ints(&[3, 4, 7]), 0).unwrap(),
        ])
        .unwrap()
    }

    pub fn axes(&self) -> &[HpAxis] {
        &self.axes
    }

    pub fn axis(&self, name: &str) -> Option<&HpAxis> {
        self.axes.iter().find(|a| a.name == name)
    }

    pub fn without(mut self, name: &str) -> Self {
        self.axes.retain(|a| a.name != name);
        self
    }

    /// Keeps only the named axes, in their original order.
    pub fn restrict(&self, names: &[&str]) -> Result<Self> {
        Self::new(self.axes.iter().filter(|a| names.contains(&a.name.as_str())).cloned().collect())
    }

    /// Replaces the candidates of `name`, keeping the default if present.
    pub fn with_candidates(mut self, name: &str, candidates: Vec<HpValue>) -> Result<Self> {
        let axis = self
            .axes
            .iter_mut()
            .find(|a| a.name == name)
            .ok_or_else(|| Error::InvalidConfig(alloc::format!("unknown axis {name}")))?;
        let default = candidates.iter().position(|c| c == axis.default_value()).unwrap_or(0);
        *axis = HpAxis::new(name, candidates, default)?;
        Ok(self)
    }

    pub fn defaults(&self) -> HpConfig {
        self.axes.iter().map(|a| (a.name.clone(), a.default_value().clone())).collect()
    }

    pub fn total_candidates(&self) -> usize {
        self.axes.iter().map(|a| a.candidates.len()).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord<T> {
    pub id: usize,
    pub axis: String,
    pub candidate: HpValue,
    pub config: HpConfig,
    pub val_acc: f64,
    pub outcome: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AxisVisit {
    pub axis: String,
    /// Ids of this axis's trials, in candidate order.
    pub trials: Vec<usize>,
    pub chosen: HpValue,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GreedySearchLog<T> {
    pub visits: Vec<AxisVisit>,
    pub trials: Vec<TrialRecord<T>>,
    pub best_config: HpConfig,
    pub best_val_acc: f64,
    /// False when the trial budget ran out before every axis was visited.
    pub complete: bool,
}

/// Visits each axis in order and tries every candidate with the other axes
/// held at their chosen values (visited axes) or defaults (the rest). The
/// winner of an axis is the first candidate with the highest validation
/// accuracy that `evaluate` reports. At most `budget` trials run.
pub fn greedy_search<T, F>(space: &HpSpace, budget: Option<usize>, mut evaluate: F) -> Result<GreedySearchLog<T>>
where
    F: FnMut(&HpConfig) -> Result<(f64, T)>,
{
    let mut current = space.defaults();
    let mut trials = Vec::with_capacity(space.total_candidates());
    let mut visits = Vec::with_capacity(space.axes().len());
    let mut best_val_acc = f64::NEG_INFINITY;
    let mut complete = true;
    'axes: for axis in space.axes() {
        let mut ids = Vec::with_capacity(axis.candidates.len());
        let mut winner: Option<(f64, &HpValue)> = None;
        for candidate in &axis.candidates {
            if budget.is_some_and(|b| trials.len() >= b) {
                complete = false;
                if let Some((acc, value)) = winner {
                    current.insert(axis.name.clone(), value.clone());
                    visits.push(AxisVisit {
                        axis: axis.name.clone(),
                        trials: ids,
                        chosen: value.clone(),
                    });
                    best_val_acc = acc;
                }
                break 'axes;
            }
            let mut config = current.clone();
            config.insert(axis.name.clone(), candidate.clone());
            let (val_acc, outcome) = evaluate(&config)?;
            if winner.is_none_or(|(best, _)| val_acc > best) {
                winner = Some((val_acc, candidate));
            }
            ids.push(trials.len());
            trials.push(TrialRecord {
                id: trials.len(),
                axis: axis.name.clone(),
                candidate: candidate.clone(),
                config,
                val_acc,
                outcome,
            });
        }
        let (acc, value) = winner.expect("axes have candidates");
        current.insert(axis.name.clone(), value.clone());
        best_val_acc = acc;
        visits.push(AxisVisit {
            axis: axis.name.clone(),
            trials: ids,
            chosen: value.clone(),
        });
    }
    Ok(GreedySearchLog {
        visits,
        trials,
        best_config: current,
        best_val_acc,
        complete,
    })
}

/// Families with distinct cost formulas.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MethodCategory {
    NodeWise,
    LayerWise,
    Subgraph,
    Precompute,
    /// A single linear layer on precomputed features.
    Sgc,
}

impl MethodCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            MethodCategory::NodeWise => "node-wise",
            MethodCategory::LayerWise => "layer-wise",
            MethodCategory::Subgraph => "subgraph-wise",
            MethodCategory::Precompute => "precompute",
            MethodCategory::Sgc => "sgc",
        }
    }
}

/// Sizes plugged into the cost formulas.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostInputs {
    /// Nodes per batch (seeds for node- and layer-wise plans).
    pub batch: f64,
    /// Neighbors per node.
    pub fanout: f64,
    pub layers: usize,
    /// Hidden width.
    pub dim: f64,
    pub num_nodes: f64,
    pub nnz: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexityEstimate {
    pub category: MethodCategory,
    /// Multiply-adds for one pass over the graph.
    pub time: f64,
    /// Bytes of cached activations for one batch, eight per scalar.
    pub activation_bytes: f64,
}

pub const BYTES_PER_SCALAR: f64 = 8.0;

/// Evaluates the time and activation-space formulas of `category`.
/// SGC caches nothing beyond its input, so its activation estimate is 0.
pub fn estimate_complexity(category: MethodCategory, c: &CostInputs) -> ComplexityEstimate {
    let l = c.layers as f64;
    let dense = c.num_nodes * c.dim * c.dim;
    let (time, space) = match category {
        MethodCategory::NodeWise => {
            let r_l = libm::pow(c.fanout, l);
            (r_l * dense, c.batch * r_l * c.dim)
        }
        MethodCategory::LayerWise => (c.fanout * l * dense, c.batch * c.fanout * l * c.dim),
        MethodCategory::Subgraph => (l * c.nnz * c.dim + l * dense, c.batch * l * c.dim),
        MethodCategory::Precompute => (l * dense, c.batch * l * c.dim),
        MethodCategory::Sgc => (dense, 0.0),
    };
    ComplexityEstimate {
        category,
        time,
        activation_bytes: space * BYTES_PER_SCALAR,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Throughput {
    pub iters_per_sec: f64,
    pub timed_steps: usize,
    pub elapsed: f64,
}

/// Runs `warmup` untimed steps, then times `timed` steps with `clock`
/// (seconds, monotonic).
pub fn measure_throughput<S, C>(mut step: S, warmup: usize, timed: usize, mut clock: C) -> Result<Throughput>
where
    S: FnMut() -> Result<()>,
    C: FnMut() -> f64,
{
    if timed == 0 {
        return Err(Error::InvalidConfig("timed_steps must be at least 1".into()));
    }
    for _ in 0..warmup {
        step()?;
    }
    let start = clock();
    for _ in 0..timed {
        step()?;
    }
    let elapsed = (clock() - start).max(f64::MIN_POSITIVE);
    Ok(Throughput {
        iters_per_sec: timed as f64 / elapsed,
        timed_steps: timed,
        elapsed,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub epoch: usize,
    pub loss: f64,
    pub val_acc: f64,
}

/// Loss and validation accuracy per epoch.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceCurve {
    pub points: Vec<CurvePoint>,
}

impl ConvergenceCurve {
    pub fn from_records(records: &[EpochRecord]) -> Self {
        Self {
            points: records
                .iter()
                .map(|r| CurvePoint {
                    epoch: r.epoch,
                    loss: r.loss,
                    val_acc: r.val_acc,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn final_val_acc(&self) -> Option<f64> {
        self.points.last().map(|p| p.val_acc)
    }

    /// Epoch and value of the highest validation accuracy (first on ties).
    pub fn best_val(&self) -> Option<(usize, f64)> {
        let mut best: Option<&CurvePoint> = None;
        for p in &self.points {
            if best.is_none_or(|b| p.val_acc > b.val_acc) {
                best = Some(p);
            }
        }
        best.map(|p| (p.epoch, p.val_acc))
    }

    /// First epoch whose validation accuracy reaches `fraction` of the final one.
    pub fn epochs_to_fraction(&self, fraction: f64) -> Option<usize> {
        let target = fraction * self.final_val_acc()?;
        self.points.iter().find(|p| p.val_acc >= target).map(|p| p.epoch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn presets_have_defaults_among_candidates() {
        for s in [HpSpace::sampling(), HpSpace::precompute(), HpSpace::label_propagation(), HpSpace::engcn()] {
            for a in s.axes() {
                assert!(a.candidates.contains(a.default_value()));
            }
        }
        let d = HpSpace::sampling().defaults();
        assert_eq!(d["lr"], HpValue::Float(1e-2));
        assert_eq!(d["dropout"], HpValue::Float(0.2));
        assert_eq!(d["epochs"], HpValue::Int(50));
        assert!(HpSpace::precompute().axis("batch_size").is_none());
        assert_eq!(HpSpace::label_propagation().total_candidates(), 2 + 3 + 4 + 3 + 2 + 3);
        assert!(HpAxis::new("x", vec![], 0).is_err());
        assert!(HpAxis::new("x", floats(&[1.0]), 1).is_err());
    }

    fn one_axis() -> HpSpace {
        HpSpace::new(vec![HpAxis::new("a", ints(&[0, 1, 2]), 0).unwrap()]).unwrap()
    }

    #[test]
    fn single_axis_picks_the_maximum() {
        let log = greedy_search(&one_axis(), None, |c| Ok(([0.3, 0.9, 0.5][c["a"].as_usize().unwrap()], ()))).unwrap();
        assert_eq!(log.trials.len(), 3);
        assert_eq!(log.best_config["a"], HpValue::Int(1));
        assert_eq!(log.best_val_acc, 0.9);
        assert!(log.complete);
    }

    #[test]
    fn ties_pick_the_first_candidate() {
        let space = HpSpace::new(vec![
            HpAxis::new("a", ints(&[0, 1, 2]), 2).unwrap(),
            HpAxis::new("b", floats(&[0.1, 0.2]), 1).unwrap(),
        ])
        .unwrap();
        let log = greedy_search(&space, None, |_| Ok((0.5, ()))).unwrap();
        assert_eq!(log.best_config["a"], HpValue::Int(0));
        assert_eq!(log.best_config["b"], HpValue::Float(0.1));
    }

    #[test]
    fn greedy_is_not_grid_and_fixes_visited_axes() {
        let space = HpSpace::new(vec![
            HpAxis::new("a", ints(&[0, 1, 2]), 0).unwrap(),
            HpAxis::new("b", ints(&[0, 1, 2]), 2).unwrap(),
        ])
        .unwrap();
        let log = greedy_search(&space, None, |c| {
            let (a, b) = (c["a"].as_usize().unwrap(), c["b"].as_usize().unwrap());
            Ok(((a * 3 + b) as f64, ()))
        })
        .unwrap();
        assert_eq!(log.trials.len(), 6);
        // axis a is searched with b at its default
        assert!(log.trials[..3].iter().all(|t| t.config["b"] == HpValue::Int(2)));
        assert!(log.trials[3..].iter().all(|t| t.config["a"] == HpValue::Int(2)));
        assert_eq!(log.best_val_acc, 8.0);
    }

    #[test]
    fn budget_marks_the_log_incomplete() {
        let space = HpSpace::sampling();
        let log = greedy_search(&space, Some(4), |_| Ok((0.1, ()))).unwrap();
        assert!(!log.complete);
        assert_eq!(log.trials.len(), 4);
        assert_eq!(log.visits.len(), 2);
        assert_eq!(log.best_config.len(), space.axes().len());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn search_counts_and_dominance(sizes in proptest::collection::vec(1usize..5, 1..5), seed in any::<u64>()) {
            let axes = sizes
                .iter()
                .enumerate()
                .map(|(i, &k)| HpAxis::new(&alloc::format!("x{i}"), ints(&(0..k).collect::<Vec<_>>()), k - 1).unwrap())
                .collect();
            let space = HpSpace::new(axes).unwrap();
            // deterministic score of the whole config
            let score = |c: &HpConfig| {
                let mut h = seed;
                for v in c.values() {
                    h = crate::rng::child_seed(h, v.as_usize().unwrap() as u64);
                }
                Ok(((h >> 11) as f64 / (1u64 << 53) as f64, ()))
            };
            let log = greedy_search(&space, None, score).unwrap();
            prop_assert_eq!(log.trials.len(), sizes.iter().sum::<usize>());
            prop_assert!(log.trials.iter().all(|t| t.val_acc <= log.best_val_acc));
            prop_assert_eq!(&log, &greedy_search(&space, None, score).unwrap());
            for v in &log.visits {
                let axis = space.axis(&v.axis).unwrap();
                prop_assert!(axis.candidates.contains(&log.best_config[&v.axis]));
            }
        }
    }

    fn inputs(layers: usize, fanout: f64) -> CostInputs {
        CostInputs {
            batch: 100.0,
            fanout,
            layers,
            dim: 64.0,
            num_nodes: 1e4,
            nnz: 1e5,
        }
    }

    #[test]
    fn complexity_scaling() {
        let sub = |l| estimate_complexity(MethodCategory::Subgraph, &inputs(l, 5.0)).activation_bytes;
        assert_eq!(sub(4), 2.0 * sub(2));
        let node = |l| estimate_complexity(MethodCategory::NodeWise, &inputs(l, 2.0)).activation_bytes;
        assert_eq!(node(3), 2.0 * node(2));
        assert_eq!(estimate_complexity(MethodCategory::Sgc, &inputs(2, 5.0)).activation_bytes, 0.0);
        let lw = estimate_complexity(MethodCategory::LayerWise, &inputs(2, 5.0));
        assert_eq!(lw.activation_bytes, 100.0 * 5.0 * 2.0 * 64.0 * 8.0);
    }

    #[test]
    fn throughput_excludes_warmup() {
        let mut calls = 0;
        let now = core::cell::Cell::new(0.0);
        let r = measure_throughput(
            || {
                calls += 1;
                now.set(now.get() + if calls == 1 { 1.0 } else { 0.001 });
                Ok(())
            },
            1,
            100,
            || now.get(),
        )
        .unwrap();
        assert!((r.iters_per_sec - 1000.0).abs() < 1e-6);
        assert!(measure_throughput(|| Ok(()), 0, 0, || 0.0).is_err());
    }

    #[test]
    fn curve_statistics() {
        let rec = |epoch, val_acc| EpochRecord {
            epoch,
            loss: 1.0 / epoch as f64,
            train_acc: 0.0,
            val_acc,
            test_acc: 0.0,
            seconds: 0.0,
        };
        let c = ConvergenceCurve::from_records(&[rec(1, 0.2), rec(2, 0.7), rec(3, 0.8), rec(4, 0.75)]);
        assert_eq!(c.len(), 4);
        assert_eq!(c.best_val(), Some((3, 0.8)));
        // 95% of the final 0.75 is 0.7125
        assert_eq!(c.epochs_to_fraction(0.95), Some(3));
        assert_eq!(ConvergenceCurve::default().epochs_to_fraction(0.95), None);
    }
}
