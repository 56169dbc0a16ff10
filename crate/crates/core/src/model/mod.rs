//! A small CAM-compatible convolutional classifier trained from scratch.
//!
//! Backbone: a stack of `conv -> relu` blocks (optionally strided). Head: global
//! average pooling followed by a bias-free linear layer, so class activation maps
//! are exact. An optional mid-level branch (`1x1 conv -> relu -> global max pool
//! -> linear`) reads the penultimate stage; its gradients never reach the backbone.

mod checkpoint;
mod conv;
mod loss;
mod params;
mod train;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cam::ActivationStack;
use crate::error::{Error, Result};
use crate::image::Image;

pub use checkpoint::{Checkpoint, RngState, CHECKPOINT_FORMAT};
pub use conv::ConvGeometry;
pub use loss::{cross_entropy, log_softmax, mixed_loss, mixed_loss_grad, softmax, MixedTarget};
pub use params::{ConvParams, MidParams, Parameters};
pub use train::{
    batch_loss, loss_and_gradients, lr_at_epoch, train_step, BatchId, LossWeights, Sgd, StepOutcome,
};

/// How main and mid-branch predictions are combined at test time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Fusion {
    #[default]
    Sum,
    SoftmaxMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Output channels of each conv block; the last entry is the CAM depth.
    pub channels: Vec<usize>,
    /// Stride of each conv block; same length as `channels`.
    pub strides: Vec<usize>,
    pub kernel: usize,
    /// Width of the mid-level branch; 0 disables it.
    pub mid_channels: usize,
    pub fusion: Fusion,
    /// Subtracted from every pixel before the first conv. Centering `[0, 1]`
    /// inputs markedly speeds up from-scratch training.
    pub input_offset: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            channels: vec![16, 32, 32],
            strides: vec![1, 2, 2],
            kernel: 3,
            mid_channels: 0,
            fusion: Fusion::Sum,
            input_offset: 0.5,
        }
    }
}

/// Everything needed to rebuild a classifier's parameter shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub input_channels: usize,
    pub input_height: usize,
    pub input_width: usize,
    pub num_classes: usize,
    pub model: ModelConfig,
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        if self.input_channels == 0 || self.input_height == 0 || self.input_width == 0 {
            return Err(Error::invalid("input dims must be positive"));
        }
        if self.num_classes < 2 {
            return Err(Error::invalid("need at least 2 classes"));
        }
        if m.channels.len() != m.strides.len() {
            return Err(Error::invalid(format!(
                "model.channels has {} entries but model.strides has {}",
                m.channels.len(),
                m.strides.len()
            )));
        }
        if m.kernel == 0 || m.kernel % 2 == 0 {
            return Err(Error::invalid(format!("kernel must be odd, got {}", m.kernel)));
        }
        if m.channels.contains(&0) || m.strides.contains(&0) {
            return Err(Error::invalid("channels and strides must be positive"));
        }
        if !m.input_offset.is_finite() {
            return Err(Error::invalid("input_offset must be finite"));
        }
        if m.mid_channels > 0 && m.channels.is_empty() {
            return Err(Error::invalid("mid branch needs at least one conv block"));
        }
        let geoms = self.geometries();
        if let Some(g) = geoms.last() {
            if g.out_height() == 0 || g.out_width() == 0 {
                return Err(Error::invalid("backbone downsamples the input to nothing"));
            }
        }
        Ok(())
    }

    pub fn geometries(&self) -> Vec<ConvGeometry> {
        let mut c = self.input_channels;
        let (mut h, mut w) = (self.input_height, self.input_width);
        let k = self.model.kernel;
        let mut out = Vec::with_capacity(self.model.channels.len());
        for (&oc, &stride) in self.model.channels.iter().zip(&self.model.strides) {
            let g = ConvGeometry {
                in_channels: c,
                in_height: h,
                in_width: w,
                out_channels: oc,
                kernel: k,
                stride,
                pad: k / 2,
            };
            c = oc;
            h = g.out_height();
            w = g.out_width();
            out.push(g);
        }
        out
    }

    /// Channel count of the final feature stack.
    pub fn feature_depth(&self) -> usize {
        self.model.channels.last().copied().unwrap_or(self.input_channels)
    }

    /// `(channels, height, width)` of stage `i` (0 = input, `i` = output of block `i`).
    pub fn stage_dims(&self, i: usize) -> (usize, usize, usize) {
        if i == 0 {
            return (self.input_channels, self.input_height, self.input_width);
        }
        let g = self.geometries()[i - 1];
        (g.out_channels, g.out_height(), g.out_width())
    }

    /// Stage read by the mid branch: the one before the final stage.
    pub fn mid_source_stage(&self) -> usize {
        self.model.channels.len().saturating_sub(1)
    }
}

/// The classifier: architecture plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    arch: Architecture,
    params: Parameters,
}

/// Output of a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub logits: Array1<f64>,
    pub features: ActivationStack,
    pub mid_logits: Option<Array1<f64>>,
}

/// Intermediate values kept for backpropagation.
#[derive(Debug)]
pub(crate) struct ForwardCache {
    /// Stage activations flattened to `[channels, h * w]`; index 0 is the input.
    pub stages: Vec<Array2<f64>>,
    pub cols: Vec<Array2<f64>>,
    pub pooled: Array1<f64>,
    pub logits: Array1<f64>,
    pub mid: Option<MidCache>,
}

#[derive(Debug)]
pub(crate) struct MidCache {
    pub pre: Array2<f64>,
    pub argmax: Vec<usize>,
    pub pooled: Array1<f64>,
    pub logits: Array1<f64>,
}

impl Classifier {
    /// He-normal conv init, `N(0, 1/fan_in)` linear init, zero biases.
    pub fn new<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        let mut params = Parameters::zeros(&arch);
        for conv in &mut params.convs {
            let fan_in = conv.weight.ncols() as f64;
            fill_normal(&mut conv.weight, (2.0 / fan_in).sqrt(), rng);
        }
        let d = params.head.ncols() as f64;
        fill_normal(&mut params.head, (1.0 / d).sqrt(), rng);
        if let Some(mid) = &mut params.mid {
            let fan_in = mid.conv_weight.ncols() as f64;
            fill_normal(&mut mid.conv_weight, (2.0 / fan_in).sqrt(), rng);
            let m = mid.linear_weight.ncols() as f64;
            fill_normal(&mut mid.linear_weight, (1.0 / m).sqrt(), rng);
        }
        Ok(Self { arch, params })
    }

    /// All-zero parameters.
    pub fn zeroed(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let params = Parameters::zeros(&arch);
        Ok(Self { arch, params })
    }

    pub fn from_parts(arch: Architecture, params: Parameters) -> Result<Self> {
        arch.validate()?;
        params.check_shapes(&arch)?;
        Ok(Self { arch, params })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Parameters {
        &mut self.params
    }

    pub fn num_classes(&self) -> usize {
        self.arch.num_classes
    }

    pub fn has_mid_branch(&self) -> bool {
        self.params.mid.is_some()
    }

    fn check_input(&self, image: &Image) -> Result<()> {
        let expect = (
            self.arch.input_channels,
            self.arch.input_height,
            self.arch.input_width,
        );
        if image.dim() != expect {
            return Err(Error::shape(format!(
                "model expects input {:?}, got {:?}",
                expect,
                image.dim()
            )));
        }
        Ok(())
    }

    pub(crate) fn forward_cached(&self, image: &Image, with_mid: bool) -> Result<ForwardCache> {
        self.check_input(image)?;
        let (c, h, w) = image.dim();
        let input = image
            .pixels()
            .view()
            .into_shape_with_order((c, h * w))
            .map_err(|e| Error::shape(e.to_string()))?
            .mapv(|v| v - self.arch.model.input_offset);
        let mut stages = vec![input];
        let mut cols_cache = Vec::with_capacity(self.params.convs.len());
        for (g, conv) in self.arch.geometries().iter().zip(&self.params.convs) {
            let cols = g.im2col(stages.last().expect("input stage").view());
            let mut z = conv::affine(&conv.weight, &conv.bias, &cols);
            z.mapv_inplace(|v| v.max(0.0));
            cols_cache.push(cols);
            stages.push(z);
        }
        let last = stages.last().expect("input stage");
        let pooled = last.mean_axis(Axis(1)).expect("non-empty stage");
        let logits = self.params.head.dot(&pooled);
        let mid = match (&self.params.mid, with_mid) {
            (Some(mid), true) => {
                let src = &stages[self.arch.mid_source_stage()];
                let pre = conv::affine(&mid.conv_weight, &mid.conv_bias, src);
                let mut argmax = Vec::with_capacity(pre.nrows());
                let mut pooled = Array1::zeros(pre.nrows());
                for (ch, row) in pre.outer_iter().enumerate() {
                    let (idx, val) = row
                        .iter()
                        .enumerate()
                        .fold(
                            (0, f64::NEG_INFINITY),
                            |acc, (i, &v)| {
                                if v > acc.1 {
                                    (i, v)
                                } else {
                                    acc
                                }
                            },
                        );
                    argmax.push(idx);
                    pooled[ch] = val.max(0.0);
                }
                let logits = mid.linear_weight.dot(&pooled) + &mid.linear_bias;
                Some(MidCache {
                    pre,
                    argmax,
                    pooled,
                    logits,
                })
            }
            _ => None,
        };
        Ok(ForwardCache {
            stages,
            cols: cols_cache,
            pooled,
            logits,
            mid,
        })
    }

    /// Logits, final feature stack and (when present) mid-branch logits.
    pub fn forward(&self, image: &Image) -> Result<ForwardOutput> {
        let cache = self.forward_cached(image, true)?;
        let (d, h, w) = self.arch.stage_dims(cache.stages.len() - 1);
        let features = cache
            .stages
            .last()
            .expect("input stage")
            .clone()
            .into_shape_with_order((d, h, w))
            .map_err(|e| Error::shape(e.to_string()))?;
        Ok(ForwardOutput {
            logits: cache.logits,
            features: ActivationStack::new(features)?,
            mid_logits: cache.mid.map(|m| m.logits),
        })
    }

    /// Final-stage features only (no mid branch).
    pub fn features(&self, image: &Image) -> Result<ActivationStack> {
        let cache = self.forward_cached(image, false)?;
        let (d, h, w) = self.arch.stage_dims(cache.stages.len() - 1);
        let features = cache
            .stages
            .into_iter()
            .last()
            .expect("input stage")
            .into_shape_with_order((d, h, w))
            .map_err(|e| Error::shape(e.to_string()))?;
        ActivationStack::new(features)
    }

    /// Predicted class; fuses main and mid logits when the branch exists.
    pub fn predict(&self, image: &Image) -> Result<usize> {
        let out = self.forward(image)?;
        Ok(fuse_and_argmax(
            &out.logits,
            out.mid_logits.as_ref(),
            self.arch.model.fusion,
        ))
    }
}

/// Argmax of the fused scores; ties go to the lowest index.
pub fn fuse_and_argmax(main: &Array1<f64>, mid: Option<&Array1<f64>>, fusion: Fusion) -> usize {
    let scores = match (mid, fusion) {
        (None, _) => main.clone(),
        (Some(mid), Fusion::Sum) => main + mid,
        (Some(mid), Fusion::SoftmaxMean) => (softmax(main.view()) + softmax(mid.view())) * 0.5,
    };
    argmax(scores.view())
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: ndarray::ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn fill_normal<R: Rng + ?Sized>(a: &mut Array2<f64>, std: f64, rng: &mut R) {
    let normal = Normal::new(0.0, std).expect("finite std");
    a.mapv_inplace(|_| normal.sample(rng));
}
