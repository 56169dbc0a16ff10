//! Datasets: the synthetic fine-grained benchmark, folder ingestion and the
//! line-delimited manifest format.

mod ingest;
mod manifest;
mod synthetic;

use ndarray::{s, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BoxRegion, Image};

pub use ingest::{ingest_folder, IngestOptions, IngestReport};
pub use manifest::{export_dataset, load_manifest, read_manifest, write_manifest, ManifestRecord, Split};
pub use synthetic::{generate, true_semantic_ratio, SyntheticSpec};

/// One labelled image. Synthetic samples also carry the binary mask of their
/// discriminative cue pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: Image,
    pub label: usize,
    pub semantic_mask: Option<Array2<bool>>,
    pub source: Option<String>,
}

/// A sample whose semantic mask is known.
pub type GroundTruthSample = Sample;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// `(channels, height, width)` shared by every sample.
    pub fn image_dims(&self) -> Result<(usize, usize, usize)> {
        let first = self
            .train
            .first()
            .or(self.test.first())
            .ok_or_else(|| Error::Dataset("dataset is empty".into()))?;
        let dims = first.image.dim();
        if let Some(bad) = self
            .train
            .iter()
            .chain(&self.test)
            .find(|s| s.image.dim() != dims)
        {
            return Err(Error::Dataset(format!(
                "mixed image shapes: {:?} and {:?}",
                dims,
                bad.image.dim()
            )));
        }
        Ok(dims)
    }

    pub fn class_counts(samples: &[Sample], num_classes: usize) -> Vec<usize> {
        let mut counts = vec![0; num_classes];
        for s in samples {
            counts[s.label] += 1;
        }
        counts
    }
}

/// Train-time geometric preprocessing: optional square crop and horizontal flip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Preprocess {
    /// Crop side; random position for training, centred for evaluation.
    pub crop: Option<usize>,
    /// Random horizontal flip with probability 0.5 (training only).
    pub flip: bool,
}

impl Preprocess {
    pub fn output_dims(&self, height: usize, width: usize) -> (usize, usize) {
        match self.crop {
            Some(c) => (c.min(height), c.min(width)),
            None => (height, width),
        }
    }

    /// Training view of an image: random crop then random flip.
    pub fn train_view<R: Rng + ?Sized>(&self, image: &Image, rng: &mut R) -> Result<Image> {
        let mut out = match self.crop {
            Some(_) => {
                let (h, w) = self.output_dims(image.height(), image.width());
                let y0 = rng.random_range(0..=image.height() - h);
                let x0 = rng.random_range(0..=image.width() - w);
                crop_image(image, x0, y0, w, h)?
            }
            None => image.clone(),
        };
        if self.flip && rng.random_bool(0.5) {
            out = out.flip_horizontal();
        }
        Ok(out)
    }

    /// Evaluation view: centre crop, never flipped.
    pub fn eval_view(&self, image: &Image) -> Result<Image> {
        match self.crop {
            Some(_) => {
                let (h, w) = self.output_dims(image.height(), image.width());
                let y0 = (image.height() - h) / 2;
                let x0 = (image.width() - w) / 2;
                crop_image(image, x0, y0, w, h)
            }
            None => Ok(image.clone()),
        }
    }
}

fn crop_image(image: &Image, x0: usize, y0: usize, w: usize, h: usize) -> Result<Image> {
    if (x0, y0, w, h) == (0, 0, image.width(), image.height()) {
        return Ok(image.clone());
    }
    let region = BoxRegion::new(x0, y0, x0 + w, y0 + h, image.width(), image.height())?;
    Image::new(
        image
            .pixels()
            .slice(s![.., region.y0..region.y1, region.x0..region.x1])
            .to_owned(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;

    #[test]
    fn crop_geometry() {
        let img = Image::filled(3, 10, 12, 0.5).unwrap();
        let p = Preprocess {
            crop: Some(8),
            flip: true,
        };
        let mut rng = from_seed(0);
        assert_eq!(p.train_view(&img, &mut rng).unwrap().dim(), (3, 8, 8));
        assert_eq!(p.eval_view(&img).unwrap().dim(), (3, 8, 8));
        let exact = Image::filled(3, 8, 8, 0.25).unwrap();
        assert_eq!(p.eval_view(&exact).unwrap(), exact);
        assert_eq!(Preprocess::default().eval_view(&img).unwrap(), img);
    }
}
