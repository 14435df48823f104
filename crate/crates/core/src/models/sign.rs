//! SIGN: per-hop linear projections, concatenated, then a readout MLP.

use alloc::vec::Vec;
use core::ops::RangeInclusive;

use rand::Rng;

use super::HopModel;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{Activation, Dense, ForwardTrace, MlpArch, MlpConfig, MlpParams, Parameters};
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub struct SignConfig {
    pub feature_dim: usize,
    pub num_classes: usize,
    pub k: usize,
    /// Output width of every per-hop projection.
    pub hop_dim: usize,
    /// Hidden width of the readout MLP.
    pub hidden: usize,
    /// Layers of the readout MLP; 1 means a single linear readout.
    pub readout_layers: usize,
    pub dropout: f64,
    pub batchnorm: bool,
    pub activation: Activation,
    pub seed: u64,
}

impl SignConfig {
    pub fn new(feature_dim: usize, num_classes: usize, k: usize, hidden: usize, seed: u64) -> Self {
        Self {
            feature_dim,
            num_classes,
            k,
            hop_dim: hidden,
            hidden,
            readout_layers: 2,
            dropout: 0.0,
            batchnorm: false,
            activation: Activation::Relu,
            seed,
        }
    }

    fn readout_config(&self) -> MlpConfig {
        MlpConfig::with_depth(
            self.hop_dim * (self.k + 1),
            self.hidden,
            self.num_classes,
            self.readout_layers,
            rng::child_seed(self.seed, 1),
        )
        .dropout(self.dropout)
        .batchnorm(self.batchnorm)
        .activation(self.activation)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignParams {
    /// `Ω_l`, one per hop `0..=k`.
    pub omegas: Vec<Dense>,
    pub readout: MlpParams,
}

impl Parameters for SignParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t = Vec::new();
        for o in &self.omegas {
            t.push(o.weight.data());
            t.push(o.bias.as_slice());
        }
        t.extend(self.readout.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = Vec::new();
        for o in &mut self.omegas {
            t.push(o.weight.data_mut());
            t.push(o.bias.as_mut_slice());
        }
        t.extend(self.readout.tensors_mut());
        t
    }
}

#[derive(Clone, Debug)]
pub struct SignTrace {
    inputs: Vec<Matrix>,
    pre_act: Vec<Matrix>,
    masks: Vec<Option<Vec<f64>>>,
    concat_bytes: usize,
    readout: ForwardTrace,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sign {
    config: SignConfig,
    readout: MlpArch,
    params: SignParams,
}

impl Sign {
    pub fn new(config: SignConfig) -> Result<Self> {
        if config.hop_dim == 0 || config.feature_dim == 0 {
            return Err(Error::InvalidConfig("SIGN widths must be positive".into()));
        }
        let (readout, readout_params) = MlpArch::new(config.readout_config())?;
        let mut r = rng::stream(config.seed, rng::streams::INIT);
        let omegas = (0..=config.k)
            .map(|_| Dense::kaiming(config.feature_dim, config.hop_dim, &mut r))
            .collect();
        Ok(Self {
            config,
            readout,
            params: SignParams {
                omegas,
                readout: readout_params,
            },
        })
    }

    pub fn config(&self) -> &SignConfig {
        &self.config
    }

    fn check_hops(&self, hops: &[Matrix]) -> Result<()> {
        if hops.len() != self.config.k + 1 {
            return Err(Error::InvalidConfig(alloc::format!(
                "SIGN expects {} hops, got {}",
                self.config.k + 1,
                hops.len()
            )));
        }
        Ok(())
    }

    /// The concatenated per-hop representation fed to the readout.
    pub fn representation(&self, hops: &[Matrix]) -> Result<Matrix> {
        self.check_hops(hops)?;
        let blocks = hops
            .iter()
            .zip(&self.params.omegas)
            .map(|(h, o)| {
                let mut z = o.forward(h)?;
                for v in z.data_mut() {
                    *v = self.config.activation.apply(*v);
                }
                Ok(z)
            })
            .collect::<Result<Vec<_>>>()?;
        Matrix::hconcat(&blocks)
    }
}

impl HopModel for Sign {
    type Params = SignParams;
    type Trace = SignTrace;

    fn hop_range(&self) -> RangeInclusive<usize> {
        0..=self.config.k
    }

    fn params(&self) -> &SignParams {
        &self.params
    }

    fn params_mut(&mut self) -> &mut SignParams {
        &mut self.params
    }

    fn forward_train<R: Rng + ?Sized>(&self, hops: &[Matrix], rng: &mut R) -> Result<(Matrix, SignTrace)> {
        self.check_hops(hops)?;
        let keep = 1.0 - self.config.dropout;
        let mut pre_act = Vec::with_capacity(hops.len());
        let mut masks = Vec::with_capacity(hops.len());
        let mut blocks = Vec::with_capacity(hops.len());
        for (h, o) in hops.iter().zip(&self.params.omegas) {
            let z = o.forward(h)?;
            let mut a = z.clone();
            for v in a.data_mut() {
                *v = self.config.activation.apply(*v);
            }
            let mask = if self.config.dropout > 0.0 {
                let m: Vec<f64> = (0..a.data().len())
                    .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                    .collect();
                for (v, s) in a.data_mut().iter_mut().zip(&m) {
                    *v *= s;
                }
                Some(m)
            } else {
                None
            };
            pre_act.push(z);
            masks.push(mask);
            blocks.push(a);
        }
        let concat = Matrix::hconcat(&blocks)?;
        let (logits, readout) = self.readout.forward_train(&self.params.readout, &concat, rng)?;
        Ok((
            logits,
            SignTrace {
                inputs: hops.to_vec(),
                pre_act,
                masks,
                concat_bytes: concat.bytes(),
                readout,
            },
        ))
    }

    fn forward_eval(&self, hops: &[Matrix]) -> Result<Matrix> {
        let concat = self.representation(hops)?;
        self.readout.forward_eval(&self.params.readout, &concat)
    }

    fn backward(&self, trace: &SignTrace, grad_logits: &Matrix) -> Result<SignParams> {
        let (readout, g_concat) = self.readout.backward(&self.params.readout, &trace.readout, grad_logits)?;
        let mut omegas: Vec<Dense> = self.params.omegas.iter().map(|o| Dense::zeros(o.weight.rows(), o.weight.cols())).collect();
        let w = self.config.hop_dim;
        for (l, o) in self.params.omegas.iter().enumerate() {
            let mut g = g_concat.columns(l * w, w);
            if let Some(m) = &trace.masks[l] {
                for (v, s) in g.data_mut().iter_mut().zip(m) {
                    *v *= s;
                }
            }
            for (v, &p) in g.data_mut().iter_mut().zip(trace.pre_act[l].data()) {
                *v *= self.config.activation.derivative(p);
            }
            o.backward(&trace.inputs[l], &g, &mut omegas[l])?;
        }
        Ok(SignParams { omegas, readout })
    }

    fn update_running_stats(&mut self, trace: &SignTrace) {
        self.readout.update_running_stats(&trace.readout);
    }

    fn activation_bytes(trace: &SignTrace) -> usize {
        let f = core::mem::size_of::<f64>();
        trace.pre_act.iter().map(Matrix::bytes).sum::<usize>()
            + trace.masks.iter().flatten().map(|m| m.len() * f).sum::<usize>()
            + trace.concat_bytes
            + trace.readout.activation_bytes()
    }
}
