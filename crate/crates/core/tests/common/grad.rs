//! Central finite differences against the analytic mixed-loss gradient.

use ndarray::Array3;
use rand::Rng;
use snapmix_core::augment::{MixResult, Strategy};
use snapmix_core::model::{batch_loss, loss_and_gradients, LossWeights, Parameters};
use snapmix_core::{Architecture, Classifier, Image, ModelConfig};

pub const STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-3;

/// 1x6x6 input, 3 classes, two conv blocks: well under 500 parameters.
pub fn tiny_arch(mid_channels: usize) -> Architecture {
    Architecture {
        input_channels: 1,
        input_height: 6,
        input_width: 6,
        num_classes: 3,
        model: ModelConfig {
            channels: vec![3, 4],
            strides: vec![1, 2],
            kernel: 3,
            mid_channels,
            ..ModelConfig::default()
        },
    }
}

pub fn sample(rng: &mut impl Rng, label_a: usize, label_b: usize, rho_a: f64, rho_b: f64) -> MixResult {
    let image = Image::new(Array3::from_shape_fn((1, 6, 6), |_| rng.random::<f64>())).unwrap();
    MixResult {
        rho_a,
        rho_b,
        label_b,
        strategy: Strategy::Snapmix,
        ..MixResult::clean(image, label_a)
    }
}

/// Relative error with a floor so (near) zero gradients compare absolutely.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

pub struct GradReport {
    pub worst: f64,
    pub at: String,
    pub checked: usize,
}

/// Compares every parameter whose tensor name passes `only`.
pub fn check(
    model: &Classifier,
    batch: &[MixResult],
    weights: LossWeights,
    only: impl Fn(&str) -> bool,
) -> GradReport {
    let (_, grads) = loss_and_gradients(model, batch, weights).unwrap();
    let analytic: Vec<(String, Vec<f64>)> = grads
        .tensors()
        .into_iter()
        .map(|(n, t)| (n, t.to_vec()))
        .collect();
    let mut probe = model.clone();
    let mut report = GradReport {
        worst: 0.0,
        at: String::new(),
        checked: 0,
    };
    for (name, g) in analytic.iter().filter(|(n, _)| only(n)) {
        for i in 0..g.len() {
            let orig = tensor(probe.params(), name)[i];
            set(probe.params_mut(), name, i, orig + STEP);
            let up = batch_loss(&probe, batch, weights).unwrap().loss;
            set(probe.params_mut(), name, i, orig - STEP);
            let down = batch_loss(&probe, batch, weights).unwrap().loss;
            set(probe.params_mut(), name, i, orig);
            let fd = (up - down) / (2.0 * STEP);
            let e = rel_err(g[i], fd);
            if e > report.worst {
                report.worst = e;
                report.at = format!("{name}[{i}]: analytic {} fd {fd}", g[i]);
            }
            report.checked += 1;
        }
    }
    report
}

fn tensor<'a>(p: &'a Parameters, name: &str) -> &'a [f64] {
    p.tensors().into_iter().find(|(n, _)| n == name).unwrap().1
}

fn set(p: &mut Parameters, name: &str, i: usize, v: f64) {
    p.tensors_mut().into_iter().find(|(n, _)| n == name).unwrap().1[i] = v;
}
