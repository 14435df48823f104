//! Message-passing GNN trained on sampled batch plans.
//!
//! Layer: `h' = act(h[self] W_self + (block · h) W_neigh + b)`, ReLU on
//! hidden layers and linear at the output. Plans without a self index
//! (layer-wise samplers) run with the neighbor term only.

use alloc::vec::Vec;

use rand::Rng;

use crate::adjacency::NormalizedAdjacency;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{Dense, Parameters};
use crate::rng;
use crate::sampling::{BatchPlan, Block};

#[derive(Clone, Debug, PartialEq)]
pub struct SampledGnnConfig {
    /// Input, hidden..., output widths; depth is `layer_dims.len() - 1`.
    pub layer_dims: Vec<usize>,
    /// Keep a separate self weight. Must be off for plans whose targets are
    /// not among their sources.
    pub use_self: bool,
    pub dropout: f64,
    pub seed: u64,
}

impl SampledGnnConfig {
    pub fn new(layer_dims: Vec<usize>, seed: u64) -> Self {
        Self {
            layer_dims,
            use_self: true,
            dropout: 0.0,
            seed,
        }
    }

    pub fn with_depth(input: usize, hidden: usize, output: usize, depth: usize, seed: u64) -> Self {
        let mut dims = alloc::vec![input];
        dims.extend(core::iter::repeat_n(hidden, depth.saturating_sub(1)));
        dims.push(output);
        Self::new(dims, seed)
    }

    pub fn depth(&self) -> usize {
        self.layer_dims.len().saturating_sub(1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SageLayer {
    pub w_self: Option<Matrix>,
    pub w_neigh: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampledGnnParams {
    pub layers: Vec<SageLayer>,
}

impl Parameters for SampledGnnParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = Vec::new();
        for l in &self.layers {
            if let Some(w) = &l.w_self {
                t.push(w.data());
            }
            t.push(l.w_neigh.data());
            t.push(l.bias.as_slice());
        }
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = Vec::new();
        for l in &mut self.layers {
            if let Some(w) = &mut l.w_self {
                t.push(w.data_mut());
            }
            t.push(l.w_neigh.data_mut());
            t.push(l.bias.as_mut_slice());
        }
        t
    }
}

#[derive(Clone, Debug)]
struct LayerTrace {
    input: Matrix,
    self_rows: Option<Matrix>,
    aggregated: Matrix,
    pre_act: Option<Matrix>,
    mask: Option<Vec<f64>>,
}

/// Intermediates from one training forward over a plan.
#[derive(Clone, Debug)]
pub struct GnnTrace {
    layers: Vec<LayerTrace>,
}

impl GnnTrace {
    /// Bytes of cached per-layer tensors, excluding the gathered input rows.
    pub fn activation_bytes(&self) -> usize {
        let f = core::mem::size_of::<f64>();
        self.layers
            .iter()
            .enumerate()
            .map(|(j, t)| {
                (if j == 0 { 0 } else { t.input.bytes() })
                    + t.self_rows.as_ref().map_or(0, Matrix::bytes)
                    + t.aggregated.bytes()
                    + t.pre_act.as_ref().map_or(0, Matrix::bytes)
                    + t.mask.as_ref().map_or(0, |m| m.len() * f)
            })
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampledGnn {
    config: SampledGnnConfig,
    pub params: SampledGnnParams,
}

impl SampledGnn {
    pub fn new(config: SampledGnnConfig) -> Result<Self> {
        if config.layer_dims.len() < 2 || config.layer_dims.contains(&0) {
            return Err(Error::InvalidConfig("GNN needs at least one layer of positive width".into()));
        }
        if !(0.0..1.0).contains(&config.dropout) {
            return Err(Error::InvalidConfig("dropout must lie in [0, 1)".into()));
        }
        let mut r = rng::stream(config.seed, rng::streams::INIT);
        let layers = config
            .layer_dims
            .windows(2)
            .map(|w| {
                let neigh = Dense::kaiming(w[0], w[1], &mut r);
                let w_self = config.use_self.then(|| Dense::kaiming(w[0], w[1], &mut r).weight);
                SageLayer {
                    w_self,
                    w_neigh: neigh.weight,
                    bias: neigh.bias,
                }
            })
            .collect();
        Ok(Self {
            config,
            params: SampledGnnParams { layers },
        })
    }

    pub fn config(&self) -> &SampledGnnConfig {
        &self.config
    }

    pub fn depth(&self) -> usize {
        self.config.depth()
    }

    fn check_plan(&self, plan: &BatchPlan, features: &Matrix) -> Result<()> {
        if plan.depth() != self.depth() {
            return Err(Error::DepthMismatch {
                plan: plan.depth(),
                model: self.depth(),
            });
        }
        if self.config.use_self && (0..plan.depth()).any(|l| plan.block(l).self_index().is_none()) {
            return Err(Error::InvalidConfig("self weights need a plan with a self index".into()));
        }
        if features.cols() != self.config.layer_dims[0] {
            return Err(Error::Shape {
                op: "SampledGnn::forward",
                expected: (features.rows(), self.config.layer_dims[0]),
                found: features.shape(),
            });
        }
        Ok(())
    }

    /// One layer's pre-activation on target rows.
    fn layer_linear(layer: &SageLayer, self_rows: Option<&Matrix>, aggregated: &Matrix) -> Result<Matrix> {
        let mut z = aggregated.matmul(&layer.w_neigh)?;
        if let (Some(w), Some(s)) = (&layer.w_self, self_rows) {
            z.add_assign(&s.matmul(w)?)?;
        }
        z.add_row_vector(&layer.bias);
        Ok(z)
    }

    fn apply_relu(z: &mut Matrix) {
        for v in z.data_mut() {
            *v = v.max(0.0);
        }
    }

    fn run_layer<R: Rng + ?Sized>(
        &self,
        j: usize,
        block: &Block,
        h: Matrix,
        rng: Option<&mut R>,
    ) -> Result<(Matrix, LayerTrace)> {
        let layer = &self.params.layers[j];
        let aggregated = block.aggregate(&h)?;
        let self_rows = match (&layer.w_self, block.self_index()) {
            (Some(_), Some(idx)) => Some(h.gather_rows(idx)),
            _ => None,
        };
        let mut z = Self::layer_linear(layer, self_rows.as_ref(), &aggregated)?;
        let last = j + 1 == self.depth();
        let (pre_act, mask) = if last {
            (None, None)
        } else {
            let pre = z.clone();
            Self::apply_relu(&mut z);
            let mask = match rng {
                Some(r) if self.config.dropout > 0.0 => {
                    let keep = 1.0 - self.config.dropout;
                    let m: Vec<f64> = (0..z.data().len())
                        .map(|_| if r.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                        .collect();
                    for (v, s) in z.data_mut().iter_mut().zip(&m) {
                        *v *= s;
                    }
                    Some(m)
                }
                _ => None,
            };
            (Some(pre), mask)
        };
        Ok((
            z,
            LayerTrace {
                input: h,
                self_rows,
                aggregated,
                pre_act,
                mask,
            },
        ))
    }

    /// Training forward. `features` holds every node's input row; the plan's
    /// `B_K` rows are gathered from it. Returns logits for `B_0`.
    pub fn forward_train<R: Rng + ?Sized>(
        &self,
        plan: &BatchPlan,
        features: &Matrix,
        rng: &mut R,
    ) -> Result<(Matrix, GnnTrace)> {
        self.check_plan(plan, features)?;
        let mut h = features.gather_rows(plan.inputs());
        let mut layers = Vec::with_capacity(self.depth());
        for j in 0..self.depth() {
            let block = plan.block(self.depth() - 1 - j);
            let (next, t) = self.run_layer(j, block, h, Some(&mut *rng))?;
            layers.push(t);
            h = next;
        }
        Ok((h, GnnTrace { layers }))
    }

    pub fn forward_eval(&self, plan: &BatchPlan, features: &Matrix) -> Result<Matrix> {
        self.check_plan(plan, features)?;
        let mut h = features.gather_rows(plan.inputs());
        for j in 0..self.depth() {
            let block = plan.block(self.depth() - 1 - j);
            h = self.run_layer::<rng::StreamRng>(j, block, h, None)?.0;
        }
        Ok(h)
    }

    /// Exact full-graph inference with `a` in place of sampled blocks.
    pub fn infer_full(&self, a: &NormalizedAdjacency, features: &Matrix) -> Result<Matrix> {
        let mut h = features.clone();
        for (j, layer) in self.params.layers.iter().enumerate() {
            let aggregated = a.spmm(&h)?;
            let mut z = Self::layer_linear(layer, Some(&h), &aggregated)?;
            if j + 1 < self.depth() {
                Self::apply_relu(&mut z);
            }
            h = z;
        }
        Ok(h)
    }

    pub fn backward(&self, plan: &BatchPlan, trace: &GnnTrace, grad_logits: &Matrix) -> Result<SampledGnnParams> {
        if trace.layers.len() != self.depth() || plan.depth() != self.depth() {
            return Err(Error::DepthMismatch {
                plan: plan.depth(),
                model: self.depth(),
            });
        }
        let mut grads = self.params.zeros_like();
        let mut g = grad_logits.clone();
        for j in (0..self.depth()).rev() {
            let t = &trace.layers[j];
            let layer = &self.params.layers[j];
            let block = plan.block(self.depth() - 1 - j);
            if let Some(pre) = &t.pre_act {
                if let Some(m) = &t.mask {
                    for (v, s) in g.data_mut().iter_mut().zip(m) {
                        *v *= s;
                    }
                }
                for (v, &p) in g.data_mut().iter_mut().zip(pre.data()) {
                    if p <= 0.0 {
                        *v = 0.0;
                    }
                }
            }
            let gl = &mut grads.layers[j];
            gl.w_neigh.add_assign(&t.aggregated.t_matmul(&g)?)?;
            for (b, s) in gl.bias.iter_mut().zip(g.column_sums()) {
                *b += s;
            }
            let mut dh = block.aggregate_transpose(&g.matmul_t(&layer.w_neigh)?)?;
            if let (Some(w), Some(rows), Some(idx)) = (&layer.w_self, &t.self_rows, block.self_index()) {
                gl.w_self
                    .as_mut()
                    .expect("gradient mirrors parameters")
                    .add_assign(&rows.t_matmul(&g)?)?;
                dh.scatter_add_rows(idx, &g.matmul_t(w)?);
            }
            g = dh;
        }
        Ok(grads)
    }
}
