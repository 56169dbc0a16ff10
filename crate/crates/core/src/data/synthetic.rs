//! Synthetic fine-grained benchmark.
//!
//! Every image is one of a few class-independent background motifs with a small
//! class-identifying cue patch stamped at a random position, plus Gaussian
//! pixel noise. The cue's binary mask is recorded, so the true semantic share of
//! any box is known exactly.

use std::collections::HashSet;

use ndarray::{s, Array2, Array3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::image::{BoxRegion, Image};
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub image_size: usize,
    pub channels: usize,
    /// Side of the discriminative cue patch in pixels.
    pub cue_size: usize,
    /// Number of shared background motifs.
    pub background_alphabet: usize,
    /// Cue-sized random patches stamped into each background motif as clutter.
    pub clutter_patches: usize,
    pub noise_std: f64,
    pub samples_per_class: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_classes: 10,
            image_size: 32,
            channels: 3,
            cue_size: 4,
            background_alphabet: 4,
            clutter_patches: 2,
            noise_std: 0.1,
            samples_per_class: 40,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::invalid("need at least 2 classes"));
        }
        if self.channels != 1 && self.channels != 3 {
            return Err(Error::invalid("channels must be 1 or 3"));
        }
        if self.cue_size == 0 || self.cue_size >= self.image_size {
            return Err(Error::invalid(format!(
                "cue_size must be in [1, image_size), got {} for image_size {}",
                self.cue_size, self.image_size
            )));
        }
        if self.background_alphabet == 0 {
            return Err(Error::invalid("background_alphabet must be >= 1"));
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return Err(Error::invalid("noise_std must be finite and >= 0"));
        }
        if self.samples_per_class < 2 {
            return Err(Error::invalid(
                "samples_per_class must be >= 2 for a train/test split",
            ));
        }
        let bits = self.channels * self.cue_size * self.cue_size;
        if bits < 64 && (self.num_classes as u64) > (1u64 << bits) {
            return Err(Error::invalid(format!(
                "{} classes cannot have unique {}-bit cue patterns",
                self.num_classes, bits
            )));
        }
        Ok(())
    }

    /// Train count per class; the rest go to test.
    pub fn train_per_class(&self) -> usize {
        ((self.samples_per_class as f64) * 0.8).round() as usize
    }
}

/// Distinct binary micro-textures, one per class.
fn cue_patterns(spec: &SyntheticSpec) -> Result<Vec<Array3<f64>>> {
    let mut rng = substream(spec.seed, "synthetic/cues", 0);
    let k = spec.cue_size;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(spec.num_classes);
    let mut attempts = 0;
    while out.len() < spec.num_classes {
        attempts += 1;
        if attempts > 1000 * spec.num_classes {
            return Err(Error::invalid("could not draw unique cue patterns"));
        }
        let bits: Vec<bool> = (0..spec.channels * k * k).map(|_| rng.random_bool(0.5)).collect();
        if seen.insert(bits.clone()) {
            let pat = Array3::from_shape_vec(
                (spec.channels, k, k),
                bits.into_iter().map(|b| if b { 1.0 } else { 0.0 }).collect(),
            )
            .expect("pattern size");
            out.push(pat);
        }
    }
    Ok(out)
}

/// Smooth sinusoidal fields in `[0.2, 0.8]` with a few clutter patches.
fn background_motifs(spec: &SyntheticSpec) -> Vec<Array3<f64>> {
    let mut rng = substream(spec.seed, "synthetic/motifs", 0);
    let n = spec.image_size;
    let k = spec.cue_size;
    (0..spec.background_alphabet)
        .map(|_| {
            let mut m = Array3::from_elem((spec.channels, n, n), 0.5);
            for mut plane in m.outer_iter_mut() {
                for _ in 0..3 {
                    let fx: f64 = rng.random_range(0.5..2.5);
                    let fy: f64 = rng.random_range(0.5..2.5);
                    let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                    let amp: f64 = rng.random_range(0.03..0.1);
                    for ((y, x), v) in plane.indexed_iter_mut() {
                        let t = std::f64::consts::TAU * (fx * x as f64 + fy * y as f64) / n as f64;
                        *v += amp * (t + phase).sin();
                    }
                }
            }
            for _ in 0..spec.clutter_patches {
                let y0 = rng.random_range(0..=n - k);
                let x0 = rng.random_range(0..=n - k);
                for v in m.slice_mut(s![.., y0..y0 + k, x0..x0 + k]).iter_mut() {
                    *v = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
                }
            }
            m.mapv_inplace(|v| v.clamp(0.0, 1.0));
            m
        })
        .collect()
}

/// Stamps `cue` with its top-left at `(y0, x0)` (may be negative or run off the
/// edge) and returns the clipped mask.
fn stamp_cue(img: &mut Array3<f64>, cue: &Array3<f64>, y0: isize, x0: isize) -> Array2<bool> {
    let (_, h, w) = img.dim();
    let k = cue.dim().1;
    let mut mask = Array2::from_elem((h, w), false);
    for dy in 0..k {
        for dx in 0..k {
            let (y, x) = (y0 + dy as isize, x0 + dx as isize);
            if y < 0 || x < 0 || y >= h as isize || x >= w as isize {
                continue;
            }
            let (y, x) = (y as usize, x as usize);
            mask[[y, x]] = true;
            for c in 0..img.dim().0 {
                img[[c, y, x]] = cue[[c, dy, dx]];
            }
        }
    }
    mask
}

/// Deterministic train/test split, stratified 80/20 per class.
pub fn generate(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let cues = cue_patterns(spec)?;
    let motifs = background_motifs(spec);
    let n = spec.image_size;
    let k = spec.cue_size;
    let normal = Normal::new(0.0, spec.noise_std).map_err(|e| Error::invalid(e.to_string()))?;
    let n_train = spec.train_per_class();
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (label, cue) in cues.iter().enumerate() {
        for i in 0..spec.samples_per_class {
            let idx = (label * spec.samples_per_class + i) as u64;
            let mut rng = substream(spec.seed, "synthetic/sample", idx);
            let motif = &motifs[rng.random_range(0..motifs.len())];
            let mut px = motif.clone();
            let y0 = rng.random_range(0..=n - k) as isize;
            let x0 = rng.random_range(0..=n - k) as isize;
            let mask = stamp_cue(&mut px, cue, y0, x0);
            if spec.noise_std > 0.0 {
                px.mapv_inplace(|v| (v + normal.sample(&mut rng)).clamp(0.0, 1.0));
            }
            let sample = Sample {
                image: Image::new(px)?,
                label,
                semantic_mask: Some(mask),
                source: None,
            };
            if i < n_train {
                train.push(sample);
            } else {
                test.push(sample);
            }
        }
    }
    Ok(Dataset {
        train,
        test,
        class_names: (0..spec.num_classes).map(|c| format!("class{c:03}")).collect(),
    })
}

/// Fraction of the sample's cue pixels that fall inside `region`.
pub fn true_semantic_ratio(sample: &Sample, region: &BoxRegion) -> Result<f64> {
    let mask = sample
        .semantic_mask
        .as_ref()
        .ok_or_else(|| Error::invalid("sample carries no semantic mask"))?;
    let (h, w) = mask.dim();
    region.ensure_fits(w, h)?;
    let total = mask.iter().filter(|&&m| m).count();
    if total == 0 {
        return Ok(0.0);
    }
    let inside = mask
        .slice(s![region.y0..region.y1, region.x0..region.x1])
        .iter()
        .filter(|&&m| m)
        .count();
    Ok(inside as f64 / total as f64)
}
