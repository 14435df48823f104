//! Multi-layer perceptron with optional batch normalization and dropout.
//!
//! Hidden layer: `linear -> [batchnorm] -> activation -> [dropout]`. The
//! output layer is linear and returns raw logits.

use alloc::vec;
use alloc::vec::Vec;

use rand::distr::{Distribution, Uniform};
use rand::Rng;

use super::{Activation, Parameters};
use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;
use crate::rng;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct MlpConfig {
    /// Input, hidden..., output widths.
    pub layer_dims: Vec<usize>,
    pub dropout: f64,
    pub batchnorm: bool,
    pub activation: Activation,
    pub seed: u64,
}

impl MlpConfig {
    /// ReLU network without dropout or batchnorm.
    pub fn new(layer_dims: Vec<usize>, seed: u64) -> Self {
        Self {
            layer_dims,
            dropout: 0.0,
            batchnorm: false,
            activation: Activation::Relu,
            seed,
        }
    }

    /// `num_layers` linear layers from `input` to `output` through `hidden`.
    pub fn with_depth(input: usize, hidden: usize, output: usize, num_layers: usize, seed: u64) -> Self {
        let mut dims = vec![input];
        dims.extend(core::iter::repeat_n(hidden, num_layers.saturating_sub(1)));
        dims.push(output);
        Self::new(dims, seed)
    }

    pub fn dropout(mut self, p: f64) -> Self {
        self.dropout = p;
        self
    }

    pub fn batchnorm(mut self, on: bool) -> Self {
        self.batchnorm = on;
        self
    }

    pub fn activation(mut self, a: Activation) -> Self {
        self.activation = a;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 2 {
            return Err(Error::InvalidConfig("an MLP needs at least input and output widths".into()));
        }
        if self.layer_dims.contains(&0) {
            return Err(Error::InvalidConfig("layer widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig("dropout must lie in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }
}

/// A linear map `x W + b` with `W` stored as `in × out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    /// Kaiming-uniform weights (bound `sqrt(6 / fan_in)`), zero bias.
    pub fn kaiming<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let bound = math::sqrt(6.0 / fan_in as f64);
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        Self {
            weight: Matrix::from_fn(fan_in, fan_out, |_, _| dist.sample(rng)),
            bias: vec![0.0; fan_out],
        }
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Matrix::zeros(fan_in, fan_out),
            bias: vec![0.0; fan_out],
        }
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut z = x.matmul(&self.weight)?;
        z.add_row_vector(&self.bias);
        Ok(z)
    }

    /// Accumulates `dW = xᵀ g`, `db = Σ g` into `grad` and returns `g Wᵀ`.
    pub fn backward(&self, x: &Matrix, g: &Matrix, grad: &mut Dense) -> Result<Matrix> {
        grad.weight.add_assign(&x.t_matmul(g)?)?;
        for (b, s) in grad.bias.iter_mut().zip(g.column_sums()) {
            *b += s;
        }
        g.matmul_t(&self.weight)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
struct RunningStats {
    mean: Vec<f64>,
    var: Vec<f64>,
}

/// Trainable tensors of an [`Mlp`]. Running batchnorm statistics are not
/// trainable and live on the `Mlp` itself.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Dense>,
    /// One entry per hidden layer when batchnorm is on, empty otherwise.
    pub norms: Vec<BatchNormParams>,
}

impl Parameters for MlpParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = Vec::new();
        for l in &self.layers {
            t.push(l.weight.data());
            t.push(l.bias.as_slice());
        }
        for n in &self.norms {
            t.push(n.gamma.as_slice());
            t.push(n.beta.as_slice());
        }
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = Vec::new();
        for l in &mut self.layers {
            t.push(l.weight.data_mut());
            t.push(l.bias.as_mut_slice());
        }
        for n in &mut self.norms {
            t.push(n.gamma.as_mut_slice());
            t.push(n.beta.as_mut_slice());
        }
        t
    }
}

#[derive(Clone, Debug)]
struct LayerTrace {
    input: Matrix,
    /// Post-normalization, pre-activation values (hidden layers).
    pre_act: Option<Matrix>,
    xhat: Option<Matrix>,
    inv_std: Vec<f64>,
    batch_mean: Vec<f64>,
    batch_var: Vec<f64>,
    mask: Option<Vec<f64>>,
}

/// Everything backward needs from one training-mode forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    batch: usize,
    layers: Vec<LayerTrace>,
}

impl ForwardTrace {
    pub fn batch_size(&self) -> usize {
        self.batch
    }

    /// Bytes of cached intermediates. The first layer's input is the batch
    /// itself, already resident, and is not counted.
    pub fn activation_bytes(&self) -> usize {
        let f = core::mem::size_of::<f64>();
        self.layers
            .iter()
            .enumerate()
            .map(|(l, t)| {
                let input = if l == 0 { 0 } else { t.input.bytes() };
                input
                    + t.pre_act.as_ref().map_or(0, Matrix::bytes)
                    + t.xhat.as_ref().map_or(0, Matrix::bytes)
                    + t.mask.as_ref().map_or(0, |m| m.len() * f)
                    + (t.inv_std.len() + t.batch_mean.len() + t.batch_var.len()) * f
            })
            .sum()
    }
}

/// Layer layout and batchnorm running statistics of an MLP. Parameters are
/// passed in explicitly so composite models can keep every trainable tensor
/// in one struct.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpArch {
    config: MlpConfig,
    running: Vec<RunningStats>,
}

impl MlpArch {
    /// Validates `config` and draws initial parameters from its seed.
    pub fn new(config: MlpConfig) -> Result<(Self, MlpParams)> {
        config.validate()?;
        let mut r = rng::stream(config.seed, rng::streams::INIT);
        let dims = &config.layer_dims;
        let layers = dims.windows(2).map(|w| Dense::kaiming(w[0], w[1], &mut r)).collect();
        let hidden = &dims[1..dims.len() - 1];
        let (norms, running) = if config.batchnorm {
            (
                hidden
                    .iter()
                    .map(|&h| BatchNormParams {
                        gamma: vec![1.0; h],
                        beta: vec![0.0; h],
                    })
                    .collect(),
                hidden
                    .iter()
                    .map(|&h| RunningStats {
                        mean: vec![0.0; h],
                        var: vec![1.0; h],
                    })
                    .collect(),
            )
        } else {
            (Vec::new(), Vec::new())
        };
        Ok((Self { config, running }, MlpParams { layers, norms }))
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.config.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.config.layer_dims.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.config.num_layers()
    }

    /// Checks that `params` has the layout this architecture expects.
    pub fn check_params(&self, params: &MlpParams) -> Result<()> {
        let dims = &self.config.layer_dims;
        let norms = if self.config.batchnorm { dims.len() - 2 } else { 0 };
        if params.layers.len() != dims.len() - 1 || params.norms.len() != norms {
            return Err(Error::InvalidConfig("parameter count does not match config".into()));
        }
        for (l, d) in params.layers.iter().enumerate() {
            if d.weight.shape() != (dims[l], dims[l + 1]) || d.bias.len() != dims[l + 1] {
                return Err(Error::Shape {
                    op: "MlpArch::check_params",
                    expected: (dims[l], dims[l + 1]),
                    found: d.weight.shape(),
                });
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::Shape {
                op: "Mlp::forward",
                expected: (x.rows(), self.input_dim()),
                found: x.shape(),
            });
        }
        Ok(())
    }

    /// Inference: no dropout, batchnorm from running statistics.
    pub fn forward_eval(&self, params: &MlpParams, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        self.check_params(params)?;
        let last = self.num_layers() - 1;
        let mut h = x.clone();
        for (l, layer) in params.layers.iter().enumerate() {
            let mut z = layer.forward(&h)?;
            if l == last {
                return Ok(z);
            }
            if let (Some(bn), Some(stats)) = (params.norms.get(l), self.running.get(l)) {
                for i in 0..z.rows() {
                    for (j, v) in z.row_mut(i).iter_mut().enumerate() {
                        let xhat = (*v - stats.mean[j]) / math::sqrt(stats.var[j] + BN_EPS);
                        *v = bn.gamma[j] * xhat + bn.beta[j];
                    }
                }
            }
            for v in z.data_mut() {
                *v = self.config.activation.apply(*v);
            }
            h = z;
        }
        unreachable!("MLP has at least one layer")
    }

    /// Training forward: batch statistics for batchnorm, inverted dropout
    /// drawn from `rng`. The trace must be handed to [`Mlp::backward`].
    pub fn forward_train<R: Rng + ?Sized>(
        &self,
        params: &MlpParams,
        x: &Matrix,
        rng: &mut R,
    ) -> Result<(Matrix, ForwardTrace)> {
        self.check_input(x)?;
        self.check_params(params)?;
        let last = self.num_layers() - 1;
        let batch = x.rows();
        let mut traces = Vec::with_capacity(self.num_layers());
        let mut h = x.clone();
        for (l, layer) in params.layers.iter().enumerate() {
            let mut z = layer.forward(&h)?;
            if l == last {
                traces.push(LayerTrace {
                    input: h,
                    pre_act: None,
                    xhat: None,
                    inv_std: Vec::new(),
                    batch_mean: Vec::new(),
                    batch_var: Vec::new(),
                    mask: None,
                });
                return Ok((z, ForwardTrace { batch, layers: traces }));
            }
            let (mut xhat, mut inv_std, mut mean, mut var) = (None, Vec::new(), Vec::new(), Vec::new());
            if let Some(bn) = params.norms.get(l) {
                let width = z.cols();
                let m = batch.max(1) as f64;
                mean = z.column_sums().into_iter().map(|s| s / m).collect();
                var = vec![0.0; width];
                for i in 0..batch {
                    for (j, &v) in z.row(i).iter().enumerate() {
                        var[j] += (v - mean[j]) * (v - mean[j]) / m;
                    }
                }
                inv_std = var.iter().map(|&v| 1.0 / math::sqrt(v + BN_EPS)).collect();
                let mut xh = z.clone();
                for i in 0..batch {
                    let row = xh.row_mut(i);
                    for j in 0..width {
                        row[j] = (row[j] - mean[j]) * inv_std[j];
                    }
                }
                for i in 0..batch {
                    for j in 0..width {
                        z.set(i, j, bn.gamma[j] * xh.get(i, j) + bn.beta[j]);
                    }
                }
                xhat = Some(xh);
            }
            let pre = z.clone();
            for v in z.data_mut() {
                *v = self.config.activation.apply(*v);
            }
            let mask = if self.config.dropout > 0.0 {
                let keep = 1.0 - self.config.dropout;
                let scale = 1.0 / keep;
                let mask: Vec<f64> = (0..z.data().len())
                    .map(|_| if rng.random::<f64>() < keep { scale } else { 0.0 })
                    .collect();
                for (v, m) in z.data_mut().iter_mut().zip(&mask) {
                    *v *= m;
                }
                Some(mask)
            } else {
                None
            };
            traces.push(LayerTrace {
                input: h,
                pre_act: Some(pre),
                xhat,
                inv_std,
                batch_mean: mean,
                batch_var: var,
                mask,
            });
            h = z;
        }
        unreachable!("MLP has at least one layer")
    }

    /// Reverse-mode gradients of the loss w.r.t. every parameter, plus the
    /// gradient w.r.t. the input batch.
    pub fn backward(
        &self,
        params: &MlpParams,
        trace: &ForwardTrace,
        grad_logits: &Matrix,
    ) -> Result<(MlpParams, Matrix)> {
        if trace.layers.len() != self.num_layers() {
            return Err(Error::InvalidConfig("trace was produced by a different model".into()));
        }
        if grad_logits.shape() != (trace.batch, self.output_dim()) {
            return Err(Error::Shape {
                op: "Mlp::backward",
                expected: (trace.batch, self.output_dim()),
                found: grad_logits.shape(),
            });
        }
        let mut grads = params.zeros_like();
        let mut g = grad_logits.clone();
        for l in (0..self.num_layers()).rev() {
            let t = &trace.layers[l];
            if let Some(pre) = &t.pre_act {
                if let Some(mask) = &t.mask {
                    for (v, m) in g.data_mut().iter_mut().zip(mask) {
                        *v *= m;
                    }
                }
                for (v, &p) in g.data_mut().iter_mut().zip(pre.data()) {
                    *v *= self.config.activation.derivative(p);
                }
                if let (Some(bn), Some(xhat)) = (params.norms.get(l), &t.xhat) {
                    g = batchnorm_backward(&g, xhat, &t.inv_std, bn, &mut grads.norms[l]);
                }
            }
            g = params.layers[l].backward(&t.input, &g, &mut grads.layers[l])?;
        }
        Ok((grads, g))
    }

    /// Folds the batch statistics of a training pass into the running
    /// estimates used at inference.
    pub fn update_running_stats(&mut self, trace: &ForwardTrace) {
        let m = trace.batch as f64;
        for (stats, t) in self.running.iter_mut().zip(&trace.layers) {
            let unbias = if m > 1.0 { m / (m - 1.0) } else { 1.0 };
            for j in 0..stats.mean.len() {
                stats.mean[j] = (1.0 - BN_MOMENTUM) * stats.mean[j] + BN_MOMENTUM * t.batch_mean[j];
                stats.var[j] = (1.0 - BN_MOMENTUM) * stats.var[j] + BN_MOMENTUM * t.batch_var[j] * unbias;
            }
        }
    }
}

/// An [`MlpArch`] bundled with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    arch: MlpArch,
    pub params: MlpParams,
}

impl Mlp {
    pub fn new(config: MlpConfig) -> Result<Self> {
        let (arch, params) = MlpArch::new(config)?;
        Ok(Self { arch, params })
    }

    /// Wraps explicit parameters; the shapes must agree with `config`.
    pub fn from_params(config: MlpConfig, params: MlpParams) -> Result<Self> {
        let (arch, _) = MlpArch::new(config)?;
        arch.check_params(&params)?;
        Ok(Self { arch, params })
    }

    pub fn arch(&self) -> &MlpArch {
        &self.arch
    }

    pub fn config(&self) -> &MlpConfig {
        self.arch.config()
    }

    pub fn input_dim(&self) -> usize {
        self.arch.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.arch.output_dim()
    }

    pub fn num_layers(&self) -> usize {
        self.arch.num_layers()
    }

    pub fn forward_eval(&self, x: &Matrix) -> Result<Matrix> {
        self.arch.forward_eval(&self.params, x)
    }

    pub fn forward_train<R: Rng + ?Sized>(&self, x: &Matrix, rng: &mut R) -> Result<(Matrix, ForwardTrace)> {
        self.arch.forward_train(&self.params, x, rng)
    }

    pub fn backward(&self, trace: &ForwardTrace, grad_logits: &Matrix) -> Result<(MlpParams, Matrix)> {
        self.arch.backward(&self.params, trace, grad_logits)
    }

    pub fn update_running_stats(&mut self, trace: &ForwardTrace) {
        self.arch.update_running_stats(trace);
    }
}

fn batchnorm_backward(
    g: &Matrix,
    xhat: &Matrix,
    inv_std: &[f64],
    bn: &BatchNormParams,
    grad: &mut BatchNormParams,
) -> Matrix {
    let (rows, cols) = g.shape();
    let m = rows as f64;
    let mut sum_gx = vec![0.0; cols];
    let mut sum_gx_xhat = vec![0.0; cols];
    for i in 0..rows {
        for j in 0..cols {
            let gy = g.get(i, j);
            grad.gamma[j] += gy * xhat.get(i, j);
            grad.beta[j] += gy;
            let gx = gy * bn.gamma[j];
            sum_gx[j] += gx;
            sum_gx_xhat[j] += gx * xhat.get(i, j);
        }
    }
    Matrix::from_fn(rows, cols, |i, j| {
        let gx = g.get(i, j) * bn.gamma[j];
        inv_std[j] / m * (m * gx - sum_gx[j] - xhat.get(i, j) * sum_gx_xhat[j])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{cross_entropy, gradcheck};
    use proptest::prelude::*;
    use rand::Rng;

    fn batch(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut r = rng::stream(seed, 99);
        Matrix::from_fn(rows, cols, |_, _| r.random::<f64>() * 2.0 - 1.0)
    }

    /// Moves every parameter off zero so no ReLU input sits on its kink.
    fn jitter(mlp: &mut Mlp, seed: u64) {
        let mut r = rng::stream(seed, 98);
        for t in mlp.params.tensors_mut() {
            for v in t {
                *v += r.random::<f64>() * 0.4 - 0.2;
            }
        }
    }

    fn loss_of(mlp: &Mlp, x: &Matrix, y: &[usize]) -> f64 {
        let mut r = rng::stream(0, 0);
        let (logits, _) = mlp.forward_train(x, &mut r).unwrap();
        cross_entropy(&logits, y).unwrap().0
    }

    #[test]
    fn identity_linear_layer() {
        let cfg = MlpConfig::new(vec![3, 3], 0);
        let params = MlpParams {
            layers: vec![Dense {
                weight: Matrix::identity(3),
                bias: vec![0.0; 3],
            }],
            norms: vec![],
        };
        let mlp = Mlp::from_params(cfg, params).unwrap();
        let x = batch(5, 3, 1);
        assert_eq!(mlp.forward_eval(&x).unwrap(), x);
    }

    #[test]
    fn train_and_eval_agree_without_dropout() {
        let mlp = Mlp::new(MlpConfig::new(vec![4, 8, 3], 11)).unwrap();
        let x = batch(6, 4, 2);
        let mut r = rng::stream(1, 1);
        let (train, _) = mlp.forward_train(&x, &mut r).unwrap();
        assert_eq!(train, mlp.forward_eval(&x).unwrap());
    }

    #[test]
    fn seeded_construction_is_deterministic() {
        let a = Mlp::new(MlpConfig::new(vec![4, 8, 3], 5)).unwrap();
        let b = Mlp::new(MlpConfig::new(vec![4, 8, 3], 5)).unwrap();
        let x = batch(6, 4, 2);
        assert_eq!(a.forward_eval(&x).unwrap().data(), b.forward_eval(&x).unwrap().data());
    }

    #[test]
    fn rejects_bad_shapes_and_configs() {
        assert!(Mlp::new(MlpConfig::new(vec![4], 0)).is_err());
        assert!(Mlp::new(MlpConfig::new(vec![4, 2], 0).dropout(1.0)).is_err());
        let mlp = Mlp::new(MlpConfig::new(vec![4, 2], 0)).unwrap();
        assert!(mlp.forward_eval(&Matrix::zeros(3, 5)).is_err());
        let mut r = rng::stream(0, 0);
        let (_, trace) = mlp.forward_train(&Matrix::zeros(3, 4), &mut r).unwrap();
        assert!(mlp.backward(&trace, &Matrix::zeros(2, 2)).is_err());
        let other = Mlp::new(MlpConfig::new(vec![4, 3, 2], 0)).unwrap();
        assert!(other.backward(&trace, &Matrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_gradients() {
        let mlp = Mlp::new(MlpConfig::new(vec![4, 6, 3], 3).batchnorm(true)).unwrap();
        let x = batch(5, 4, 3);
        let mut r = rng::stream(0, 0);
        let (_, trace) = mlp.forward_train(&x, &mut r).unwrap();
        let (g, gin) = mlp.backward(&trace, &Matrix::zeros(5, 3)).unwrap();
        assert_eq!(g.max_abs(), 0.0);
        assert_eq!(gin.frobenius_norm(), 0.0);
    }

    #[test]
    fn two_layer_gradients_match_finite_differences() {
        let mut mlp = Mlp::new(MlpConfig::new(vec![5, 7, 3], 21)).unwrap();
        jitter(&mut mlp, 21);
        let x = batch(8, 5, 4);
        let y = [0, 1, 2, 0, 1, 2, 2, 1];
        let mut r = rng::stream(0, 0);
        let (logits, trace) = mlp.forward_train(&x, &mut r).unwrap();
        let (_, gl) = cross_entropy(&logits, &y).unwrap();
        let (grads, _) = mlp.backward(&trace, &gl).unwrap();
        let report = gradcheck(&mlp.params, &grads, |p| {
            let m = Mlp::from_params(mlp.config().clone(), p.clone()).unwrap();
            loss_of(&m, &x, &y)
        });
        assert!(report.max_rel_error < 1e-5, "{report:?}");
    }

    #[test]
    fn duplicated_rows_leave_mean_gradients_unchanged() {
        let mlp = Mlp::new(MlpConfig::new(vec![3, 5, 2], 8).batchnorm(true)).unwrap();
        let x = batch(4, 3, 9);
        let y = [0, 1, 1, 0];
        let grads_for = |x: &Matrix, y: &[usize]| {
            let mut r = rng::stream(0, 0);
            let (logits, trace) = mlp.forward_train(x, &mut r).unwrap();
            let (_, gl) = cross_entropy(&logits, y).unwrap();
            mlp.backward(&trace, &gl).unwrap().0
        };
        let single = grads_for(&x, &y);
        let idx: Vec<usize> = (0..4).chain(0..4).collect();
        let doubled_y: Vec<usize> = idx.iter().map(|&i| y[i]).collect();
        let doubled = grads_for(&x.gather_rows(&idx), &doubled_y);
        for (a, b) in single.tensors().iter().zip(doubled.tensors()) {
            for (p, q) in a.iter().zip(b) {
                assert!((p - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn running_stats_move_toward_batch_stats() {
        let mut mlp = Mlp::new(MlpConfig::new(vec![2, 3, 2], 1).batchnorm(true)).unwrap();
        let x = Matrix::from_fn(4, 2, |i, j| (i * 2 + j) as f64 + 10.0);
        let mut r = rng::stream(0, 0);
        let before = mlp.forward_eval(&x).unwrap();
        for _ in 0..200 {
            let (_, trace) = mlp.forward_train(&x, &mut r).unwrap();
            mlp.update_running_stats(&trace);
        }
        let after = mlp.forward_eval(&x).unwrap();
        let (train, _) = mlp.forward_train(&x, &mut r).unwrap();
        assert!(after.max_abs_diff(&train) < before.max_abs_diff(&train));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn random_configs_pass_gradcheck(
            depth in 2usize..=4,
            width in 2usize..6,
            bn in any::<bool>(),
            leaky in any::<bool>(),
            seed in any::<u64>(),
        ) {
            let mut dims = vec![4];
            dims.extend(core::iter::repeat_n(width, depth - 1));
            dims.push(3);
            let act = if leaky { Activation::LeakyRelu(0.1) } else { Activation::Relu };
            let mut mlp = Mlp::new(MlpConfig::new(dims, seed).batchnorm(bn).activation(act)).unwrap();
            jitter(&mut mlp, seed);
            let x = batch(6, 4, seed ^ 1);
            let y = [0, 1, 2, 2, 1, 0];
            let mut r = rng::stream(0, 0);
            let (logits, trace) = mlp.forward_train(&x, &mut r).unwrap();
            let (_, gl) = cross_entropy(&logits, &y).unwrap();
            let (grads, _) = mlp.backward(&trace, &gl).unwrap();
            let report = gradcheck(&mlp.params, &grads, |p| {
                let m = Mlp::from_params(mlp.config().clone(), p.clone()).unwrap();
                loss_of(&m, &x, &y)
            });
            prop_assert!(report.max_rel_error < 1e-5, "{:?}", report);
        }
    }
}
