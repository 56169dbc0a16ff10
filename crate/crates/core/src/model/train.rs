use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, Axis, Zip};

use super::{mixed_loss, mixed_loss_grad, Classifier, MixedTarget, Parameters};
use crate::augment::MixResult;
use crate::error::{Error, Result};

/// Relative weights of the main-head and mid-branch losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub main: f64,
    pub mid: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { main: 1.0, mid: 1.0 }
    }
}

/// Identifies a batch in diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BatchId {
    pub epoch: usize,
    pub index: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// `main.weight * main_loss + mid.weight * mid_loss`
    pub loss: f64,
    pub main_loss: f64,
    pub mid_loss: f64,
}

impl From<&MixResult> for MixedTarget {
    fn from(r: &MixResult) -> Self {
        MixedTarget {
            label_a: r.label_a,
            label_b: r.label_b,
            rho_a: r.rho_a,
            rho_b: r.rho_b,
        }
    }
}

/// SGD with classical momentum: `v = mu * v + g; p -= lr * v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sgd {
    pub momentum: f64,
    velocity: Parameters,
}

impl Sgd {
    pub fn new(model: &Classifier, momentum: f64) -> Self {
        Self {
            momentum,
            velocity: model.params().zeros_like(),
        }
    }

    pub fn with_velocity(velocity: Parameters, momentum: f64) -> Self {
        Self { momentum, velocity }
    }

    pub fn velocity(&self) -> &Parameters {
        &self.velocity
    }

    pub fn step(&mut self, params: &mut Parameters, grads: &Parameters, lr: f64) {
        let mu = self.momentum;
        let vel = self.velocity.tensors_mut();
        let grads = grads.tensors();
        for (((_, p), (_, v)), (_, g)) in params.tensors_mut().into_iter().zip(vel).zip(grads) {
            for ((p, v), g) in p.iter_mut().zip(v.iter_mut()).zip(g.iter()) {
                *v = mu * *v + g;
                *p -= lr * *v;
            }
        }
    }
}

/// Learning rate after step decays by `0.1` at each listed epoch boundary (0-based).
pub fn lr_at_epoch(base: f64, decay_epochs: &[usize], epoch: usize) -> f64 {
    let decays = decay_epochs.iter().filter(|&&e| epoch >= e).count();
    base * 0.1f64.powi(decays as i32)
}

/// Mean batch loss without gradients.
pub fn batch_loss(model: &Classifier, batch: &[MixResult], weights: LossWeights) -> Result<StepOutcome> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let with_mid = model.has_mid_branch() && weights.mid != 0.0;
    let (mut main, mut mid) = (0.0, 0.0);
    for sample in batch {
        let target = MixedTarget::from(sample);
        target.validate(model.num_classes())?;
        let cache = model.forward_cached(&sample.image, with_mid)?;
        main += mixed_loss(cache.logits.view(), &target);
        if let Some(m) = &cache.mid {
            mid += mixed_loss(m.logits.view(), &target);
        }
    }
    let n = batch.len() as f64;
    Ok(outcome(main / n, mid / n, weights))
}

fn outcome(main_loss: f64, mid_loss: f64, w: LossWeights) -> StepOutcome {
    StepOutcome {
        loss: w.main * main_loss + w.mid * mid_loss,
        main_loss,
        mid_loss,
    }
}

/// Mean loss over the batch and its gradient.
///
/// The mid branch is trained on its own loss, but the backbone only receives
/// gradient from the main head.
pub fn loss_and_gradients(
    model: &Classifier,
    batch: &[MixResult],
    weights: LossWeights,
) -> Result<(StepOutcome, Parameters)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let params = model.params();
    let geoms = model.arch().geometries();
    let mut grads = params.zeros_like();
    let n = batch.len() as f64;
    let with_mid = model.has_mid_branch() && weights.mid != 0.0;
    let (mut main_total, mut mid_total) = (0.0, 0.0);

    for sample in batch {
        let target = MixedTarget::from(sample);
        target.validate(model.num_classes())?;
        let cache = model.forward_cached(&sample.image, with_mid)?;
        main_total += mixed_loss(cache.logits.view(), &target);

        if weights.main != 0.0 {
            let dlogits = mixed_loss_grad(cache.logits.view(), &target) * (weights.main / n);
            general_mat_mul(
                1.0,
                &dlogits.view().insert_axis(Axis(1)),
                &cache.pooled.view().insert_axis(Axis(0)),
                1.0,
                &mut grads.head,
            );
            let dpooled = params.head.t().dot(&dlogits);
            let last = cache.stages.last().expect("input stage");
            let positions = last.ncols() as f64;
            let mut upstream = Array2::from_shape_fn(last.dim(), |(c, _)| dpooled[c] / positions);
            for k in (0..params.convs.len()).rev() {
                let out = &cache.stages[k + 1];
                Zip::from(&mut upstream).and(out).for_each(|g, &o| {
                    if o <= 0.0 {
                        *g = 0.0;
                    }
                });
                let conv_grad = &mut grads.convs[k];
                general_mat_mul(1.0, &upstream, &cache.cols[k].t(), 1.0, &mut conv_grad.weight);
                conv_grad.bias += &upstream.sum_axis(Axis(1));
                if k > 0 {
                    let dcols = params.convs[k].weight.t().dot(&upstream);
                    upstream = geoms[k].col2im(dcols.view());
                }
            }
        }

        if let (Some(mid_cache), Some(mid_params), Some(mid_grads)) =
            (&cache.mid, &params.mid, &mut grads.mid)
        {
            mid_total += mixed_loss(mid_cache.logits.view(), &target);
            let dml = mixed_loss_grad(mid_cache.logits.view(), &target) * (weights.mid / n);
            general_mat_mul(
                1.0,
                &dml.view().insert_axis(Axis(1)),
                &mid_cache.pooled.view().insert_axis(Axis(0)),
                1.0,
                &mut mid_grads.linear_weight,
            );
            mid_grads.linear_bias += &dml;
            let dpooled = mid_params.linear_weight.t().dot(&dml);
            let src = &cache.stages[model.arch().mid_source_stage()];
            for (c, &pos) in mid_cache.argmax.iter().enumerate() {
                if mid_cache.pre[[c, pos]] <= 0.0 {
                    continue;
                }
                let g = dpooled[c];
                mid_grads.conv_weight.row_mut(c).scaled_add(g, &src.column(pos));
                mid_grads.conv_bias[c] += g;
            }
        }
    }
    Ok((outcome(main_total / n, mid_total / n, weights), grads))
}

/// One SGD-with-momentum update on the mean mixed loss of `batch`.
///
/// A non-finite loss or gradient aborts before any parameter is touched. An
/// update that leaves non-finite parameters is reported the same way, after
/// the fact. The error carries the batch seed so the batch can be replayed.
pub fn train_step(
    model: &mut Classifier,
    opt: &mut Sgd,
    batch: &[MixResult],
    lr: f64,
    weights: LossWeights,
    id: BatchId,
) -> Result<StepOutcome> {
    let (out, grads) = loss_and_gradients(model, batch, weights)?;
    if !out.loss.is_finite() || !grads.all_finite() {
        return Err(Error::NonFiniteLoss {
            loss: out.loss,
            epoch: id.epoch,
            batch: id.index,
            batch_seed: id.seed,
        });
    }
    opt.step(model.params_mut(), &grads, lr);
    if !model.params().all_finite() {
        return Err(Error::NonFiniteLoss {
            loss: out.loss,
            epoch: id.epoch,
            batch: id.index,
            batch_seed: id.seed,
        });
    }
    Ok(out)
}
