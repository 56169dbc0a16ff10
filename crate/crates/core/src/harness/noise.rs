//! Label-noise benchmark: how far each label rule's `rho_b` lands from the true
//! semantic share of the pasted region.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{area_ratio_labels, sample_box, sample_lambda, semantic_ratio_labels, MixConfig};
use crate::cam::{spm_for, SemanticPercentMap};
use crate::data::{true_semantic_ratio, Sample};
use crate::error::{Error, Result};
use crate::model::Classifier;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub mae_semantic: f64,
    pub mae_area: f64,
    pub trials: usize,
    pub alpha: f64,
    pub symmetric: bool,
}

/// Over `trials` random pairs `(a, b)` and boxes drawn as in SnapMix, compares
/// `rho_b` from semantic-ratio labels (the model's SPM of `b`) and from
/// area-ratio labels (area share of `box_b`) against the fraction of `b`'s cue
/// pixels inside `box_b`. Returns the mean absolute error of each.
pub fn noise_benchmark<R: Rng + ?Sized>(
    samples: &[Sample],
    mix: &MixConfig,
    model: &Classifier,
    trials: usize,
    rng: &mut R,
) -> Result<NoiseReport> {
    if samples.len() < 2 {
        return Err(Error::invalid("noise benchmark needs at least two samples"));
    }
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    if samples.iter().any(|s| s.semantic_mask.is_none()) {
        return Err(Error::invalid(
            "noise benchmark needs samples with semantic masks",
        ));
    }
    let mut spms: Vec<Option<SemanticPercentMap>> = vec![None; samples.len()];
    let (mut err_sem, mut err_area) = (0.0, 0.0);
    for _ in 0..trials {
        let a = rng.random_range(0..samples.len());
        let mut b = rng.random_range(0..samples.len() - 1);
        if b >= a {
            b += 1;
        }
        let (w, h) = (samples[a].image.width(), samples[a].image.height());
        let box_a = sample_box(sample_lambda(mix.alpha, rng)?, w, h, rng)?;
        let box_b = if mix.symmetric {
            box_a
        } else {
            sample_box(sample_lambda(mix.alpha, rng)?, w, h, rng)?
        };
        for i in [a, b] {
            if spms[i].is_none() {
                spms[i] = Some(spm_for(model, &samples[i].image, samples[i].label)?);
            }
        }
        let (_, rho_sem) = semantic_ratio_labels(
            spms[a].as_ref().expect("filled"),
            &box_a,
            spms[b].as_ref().expect("filled"),
            &box_b,
        )?;
        let (_, rho_area) = area_ratio_labels(&box_b);
        let truth = true_semantic_ratio(&samples[b], &box_b)?;
        err_sem += (rho_sem - truth).abs();
        err_area += (rho_area - truth).abs();
    }
    Ok(NoiseReport {
        mae_semantic: err_sem / trials as f64,
        mae_area: err_area / trials as f64,
        trials,
        alpha: mix.alpha,
        symmetric: mix.symmetric,
    })
}
