use rand::Rng;

use super::{
    area_ratio_labels, cutmix, cutout, mixup, sample_box, sample_lambda, semantic_ratio_labels, snapmix,
    LabelStrategy, MixConfig, MixResult, Strategy,
};
use crate::cam::SemanticPercentMap;
use crate::error::Result;
use crate::image::{BoxRegion, Image};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub image: Image,
    pub label: usize,
}

/// Supplies the semantic percent map of batch element `index` on demand.
pub trait SpmProvider {
    fn spm(&mut self, index: usize) -> Result<SemanticPercentMap>;
}

impl<F> SpmProvider for F
where
    F: FnMut(usize) -> Result<SemanticPercentMap>,
{
    fn spm(&mut self, index: usize) -> Result<SemanticPercentMap> {
        self(index)
    }
}

/// Every image gets the uniform map; semantic labels then equal area labels.
#[derive(Debug, Clone, Copy)]
pub struct UniformSpms {
    pub width: usize,
    pub height: usize,
}

impl SpmProvider for UniformSpms {
    fn spm(&mut self, _index: usize) -> Result<SemanticPercentMap> {
        SemanticPercentMap::uniform(self.height, self.width)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixWarning {
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct MixBatch {
    pub samples: Vec<MixResult>,
    pub warnings: Vec<MixWarning>,
}

impl MixBatch {
    pub fn mixed_count(&self) -> usize {
        self.samples.iter().filter(|s| s.is_mixed()).count()
    }
}

/// Mixes a batch: each sample fires with probability `switch_prob` and is paired
/// with a uniformly drawn, distinct partner from the same batch.
///
/// The rng draw order per sample is fixed (switch draw, partner, lambda(s), box(es)),
/// so identical seeds give identical batches. SPMs are only requested for
/// samples that take part in a semantic-ratio mix.
pub fn apply_mix<R: Rng + ?Sized>(
    batch: &[LabeledImage],
    spms: &mut dyn SpmProvider,
    config: &MixConfig,
    rng: &mut R,
) -> Result<MixBatch> {
    config.validate()?;
    let n = batch.len();
    let mut warnings = Vec::new();
    let active = config.strategy != Strategy::None && config.switch_prob > 0.0;
    if active && n < 2 {
        let message = format!("batch of {n} cannot be mixed; emitting clean samples");
        log::warn!("{message}");
        warnings.push(MixWarning { message });
    }
    let mut cache: Vec<Option<SemanticPercentMap>> = vec![None; n];
    let mut spm_of = |i: usize| -> Result<SemanticPercentMap> {
        if let Some(m) = &cache[i] {
            return Ok(m.clone());
        }
        let m = spms.spm(i)?;
        cache[i] = Some(m.clone());
        Ok(m)
    };

    let mut samples = Vec::with_capacity(n);
    for (i, item) in batch.iter().enumerate() {
        let u: f64 = rng.random();
        if !(active && n >= 2 && u < config.switch_prob) {
            samples.push(MixResult::clean(item.image.clone(), item.label));
            continue;
        }
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let partner = &batch[j];
        let (w, h) = (item.image.width(), item.image.height());
        let semantic = config.label_strategy == LabelStrategy::SemanticRatio;
        let result = match config.strategy {
            Strategy::None => unreachable!("inactive strategies never fire"),
            Strategy::Mixup => {
                let lambda = sample_lambda(config.alpha, rng)?;
                mixup(&item.image, item.label, &partner.image, partner.label, lambda)?
            }
            Strategy::Cutmix => {
                let lambda = sample_lambda(config.alpha, rng)?;
                let bx = sample_box(lambda, w, h, rng)?;
                let mut r = cutmix(&item.image, item.label, &partner.image, partner.label, &bx)?;
                if semantic && !bx.is_empty() {
                    (r.rho_a, r.rho_b) = semantic_ratio_labels(&spm_of(i)?, &bx, &spm_of(j)?, &bx)?;
                }
                r
            }
            Strategy::Cutout => {
                let lambda = sample_lambda(config.alpha, rng)?;
                let bx = sample_box(lambda, w, h, rng)?;
                cutout(&item.image, item.label, &bx, config.fill)?
            }
            Strategy::Snapmix => {
                let lambda_a = sample_lambda(config.alpha, rng)?;
                let box_a = sample_box(lambda_a, w, h, rng)?;
                let box_b = if config.symmetric {
                    box_a
                } else {
                    let lambda_b = sample_lambda(config.alpha, rng)?;
                    sample_box(lambda_b, w, h, rng)?
                };
                let rho = snapmix_rho(semantic, &box_a, &box_b, || Ok((spm_of(i)?, spm_of(j)?)))?;
                snapmix(
                    &item.image,
                    item.label,
                    &box_a,
                    &partner.image,
                    partner.label,
                    &box_b,
                    rho,
                )?
            }
        };
        samples.push(result);
    }
    Ok(MixBatch { samples, warnings })
}

fn snapmix_rho(
    semantic: bool,
    box_a: &BoxRegion,
    box_b: &BoxRegion,
    maps: impl FnOnce() -> Result<(SemanticPercentMap, SemanticPercentMap)>,
) -> Result<(f64, f64)> {
    if box_a.is_empty() || box_b.is_empty() {
        return Ok((1.0, 0.0));
    }
    if semantic {
        let (spm_a, spm_b) = maps()?;
        semantic_ratio_labels(&spm_a, box_a, &spm_b, box_b)
    } else {
        Ok(area_ratio_labels(box_a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;
    use ndarray::Array3;

    fn batch(n: usize) -> Vec<LabeledImage> {
        (0..n)
            .map(|k| LabeledImage {
                image: Image::new(Array3::from_shape_fn((1, 6, 6), |(_, y, x)| {
                    ((k * 36 + y * 6 + x) as f64 * 0.017).fract()
                }))
                .unwrap(),
                label: k % 3,
            })
            .collect()
    }

    fn uniform() -> UniformSpms {
        UniformSpms { width: 6, height: 6 }
    }

    #[test]
    fn zero_switch_prob_is_clean() {
        let b = batch(5);
        let cfg = MixConfig {
            switch_prob: 0.0,
            ..MixConfig::preset(Strategy::Cutmix)
        };
        let out = apply_mix(&b, &mut uniform(), &cfg, &mut from_seed(1)).unwrap();
        for (r, s) in out.samples.iter().zip(&b) {
            assert_eq!(r.image, s.image);
            assert_eq!((r.rho_a, r.rho_b, r.label_a), (1.0, 0.0, s.label));
            assert!(!r.is_mixed());
        }
    }

    #[test]
    fn seeded_determinism() {
        let b = batch(6);
        for strategy in [
            Strategy::Mixup,
            Strategy::Cutmix,
            Strategy::Snapmix,
            Strategy::Cutout,
        ] {
            let cfg = MixConfig {
                switch_prob: 1.0,
                ..MixConfig::preset(strategy)
            };
            let x = apply_mix(&b, &mut uniform(), &cfg, &mut from_seed(9)).unwrap();
            let y = apply_mix(&b, &mut uniform(), &cfg, &mut from_seed(9)).unwrap();
            assert_eq!(x.samples, y.samples);
            assert_eq!(x.mixed_count(), 6);
        }
    }

    #[test]
    fn singleton_batch_warns() {
        let b = batch(1);
        let cfg = MixConfig::preset(Strategy::Snapmix);
        let out = apply_mix(&b, &mut uniform(), &cfg, &mut from_seed(0)).unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert!(!out.samples[0].is_mixed());
    }

    #[test]
    fn partners_are_distinct() {
        let b: Vec<LabeledImage> = batch(4)
            .into_iter()
            .enumerate()
            .map(|(k, mut s)| {
                s.label = k;
                s
            })
            .collect();
        let cfg = MixConfig {
            switch_prob: 1.0,
            ..MixConfig::preset(Strategy::Mixup)
        };
        let mut rng = from_seed(4);
        for _ in 0..50 {
            let out = apply_mix(&b, &mut uniform(), &cfg, &mut rng).unwrap();
            for r in &out.samples {
                assert_ne!(r.label_a, r.label_b);
            }
        }
    }

    #[test]
    fn spms_requested_only_for_semantic_mixes() {
        let b = batch(4);
        let mut calls = 0usize;
        let mut provider = |_: usize| {
            calls += 1;
            SemanticPercentMap::uniform(6, 6)
        };
        let cfg = MixConfig {
            label_strategy: LabelStrategy::AreaRatio,
            ..MixConfig::preset(Strategy::Snapmix)
        };
        apply_mix(&b, &mut provider, &cfg, &mut from_seed(2)).unwrap();
        assert_eq!(calls, 0);
    }
}
