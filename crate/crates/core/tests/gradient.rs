//! Finite-difference checks of the analytic mixed-loss gradient.

mod common;

use common::grad::{check, sample, tiny_arch, GradReport, REL_TOL};
use snapmix_core::model::{loss_and_gradients, train_step, BatchId, LossWeights, Parameters, Sgd};
use snapmix_core::rng::from_seed;
use snapmix_core::Classifier;

fn assert_ok(r: GradReport) {
    assert!(r.checked <= 500, "model has {} params", r.checked);
    assert!(r.worst < REL_TOL, "worst relative error {} at {}", r.worst, r.at);
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = from_seed(11);
    let model = Classifier::new(tiny_arch(0), &mut rng).unwrap();
    let batch = vec![
        sample(&mut rng, 0, 2, 0.7, 0.3),
        sample(&mut rng, 1, 1, 1.0, 0.0),
        sample(&mut rng, 2, 0, 0.25, 0.4),
    ];
    assert_ok(check(&model, &batch, LossWeights::default(), |_| true));
}

#[test]
fn gradients_match_when_label_weights_sum_below_one() {
    let mut rng = from_seed(12);
    let model = Classifier::new(tiny_arch(0), &mut rng).unwrap();
    let batch = vec![
        sample(&mut rng, 0, 1, 0.35, 0.2),
        sample(&mut rng, 2, 1, 0.1, 0.05),
    ];
    assert_ok(check(&model, &batch, LossWeights::default(), |_| true));
}

#[test]
fn gradients_match_with_mid_branch_on_its_own_loss() {
    let mut rng = from_seed(13);
    let model = Classifier::new(tiny_arch(2), &mut rng).unwrap();
    assert!(model.has_mid_branch());
    let batch = vec![sample(&mut rng, 0, 1, 0.6, 0.3), sample(&mut rng, 2, 0, 0.5, 0.5)];
    // The backbone is deliberately cut off from the mid loss, so only the
    // mid-branch parameters are compared against finite differences.
    assert_ok(check(&model, &batch, LossWeights { main: 0.0, mid: 1.0 }, |n| {
        n.starts_with("mid.")
    }));
    // With both losses, the main-branch part of the gradient is the main loss only.
    let (_, both) = loss_and_gradients(&model, &batch, LossWeights::default()).unwrap();
    let (_, main_only) = loss_and_gradients(&model, &batch, LossWeights { main: 1.0, mid: 0.0 }).unwrap();
    for ((name, a), (_, b)) in both.tensors().into_iter().zip(main_only.tensors()) {
        if Parameters::is_backbone(&name) || name == "head.weight" {
            assert_eq!(a, b, "{name} received mid-branch gradient");
        }
    }
}

#[test]
fn mid_branch_step_leaves_backbone_bitwise_unchanged() {
    let mut rng = from_seed(14);
    let mut model = Classifier::new(tiny_arch(2), &mut rng).unwrap();
    let before = model.params().clone();
    let batch = vec![sample(&mut rng, 0, 1, 0.6, 0.3), sample(&mut rng, 1, 2, 1.0, 0.0)];
    let mut opt = Sgd::new(&model, 0.9);
    let weights = LossWeights { main: 0.0, mid: 1.0 };
    for _ in 0..3 {
        train_step(&mut model, &mut opt, &batch, 0.1, weights, BatchId::default()).unwrap();
    }
    let mut mid_changed = false;
    for ((name, a), (_, b)) in model.params().tensors().into_iter().zip(before.tensors()) {
        if Parameters::is_backbone(&name) || name == "head.weight" {
            assert_eq!(a, b, "{name} changed");
        } else if a != b {
            mid_changed = true;
        }
    }
    assert!(mid_changed);
}
