//! Directory-per-class image folders.
//!
//! Accepted layouts: `root/<class>/*` (split 80/20 per class with a seeded
//! shuffle) or `root/train/<class>/*` plus `root/test/<class>/*`. Class indices
//! follow the lexicographic order of class directory names. Every image is
//! decoded, resized to `resize x resize` and scaled to `[0, 1]`; cropping to
//! `crop` happens later through [`Preprocess`](super::Preprocess).

use std::fs;
use std::path::{Path, PathBuf};

use image::imageops::FilterType;
use ndarray::Array3;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    pub resize: usize,
    pub crop: usize,
    /// Seeds the split shuffle for single-folder layouts.
    pub seed: u64,
    pub test_fraction: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            resize: 512,
            crop: 448,
            seed: 0,
            test_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub loaded: usize,
    pub skipped: Vec<String>,
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .map(|n| !n.to_string_lossy().starts_with('.'))
                .unwrap_or(false)
        })
        .collect();
    out.sort();
    Ok(out)
}

fn class_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    Ok(sorted_entries(dir)?.into_iter().filter(|p| p.is_dir()).collect())
}

/// Decodes one file into a `[c, resize, resize]` image in `[0, 1]`.
pub(crate) fn load_image(path: &Path, resize: Option<usize>) -> Result<Image> {
    let decoded = image::open(path)?;
    let decoded = match resize {
        Some(r) if (decoded.width() as usize, decoded.height() as usize) != (r, r) => {
            decoded.resize_exact(r as u32, r as u32, FilterType::Triangle)
        }
        _ => decoded,
    };
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let px = if decoded.color().has_color() {
        let rgb = decoded.to_rgb8();
        Array3::from_shape_fn((3, h, w), |(c, y, x)| {
            rgb.get_pixel(x as u32, y as u32)[c] as f64 / 255.0
        })
    } else {
        let luma = decoded.to_luma8();
        Array3::from_shape_fn((1, h, w), |(_, y, x)| {
            luma.get_pixel(x as u32, y as u32)[0] as f64 / 255.0
        })
    };
    Image::new(px)
}

fn load_class(
    dir: &Path,
    label: usize,
    opts: &IngestOptions,
    report: &mut IngestReport,
) -> Result<Vec<Sample>> {
    let mut out = Vec::new();
    for path in sorted_entries(dir)?.into_iter().filter(|p| p.is_file()) {
        match load_image(&path, Some(opts.resize)) {
            Ok(image) => out.push(Sample {
                image,
                label,
                semantic_mask: None,
                source: Some(path.to_string_lossy().into_owned()),
            }),
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                report.skipped.push(path.to_string_lossy().into_owned());
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Dataset(format!(
            "class directory {} has no decodable images",
            dir.display()
        )));
    }
    report.loaded += out.len();
    Ok(out)
}

fn names(dirs: &[PathBuf]) -> Vec<String> {
    dirs.iter()
        .map(|d| d.file_name().expect("dir name").to_string_lossy().into_owned())
        .collect()
}

/// Loads a class-folder dataset; undecodable files are skipped and listed in the report.
pub fn ingest_folder(root: &Path, opts: &IngestOptions) -> Result<(Dataset, IngestReport)> {
    if opts.crop == 0 || opts.crop > opts.resize {
        return Err(Error::invalid(format!(
            "crop {} must be in [1, resize={}]",
            opts.crop, opts.resize
        )));
    }
    let mut report = IngestReport::default();
    let train_dir = root.join("train");
    let test_dir = root.join("test");
    if train_dir.is_dir() && test_dir.is_dir() {
        let train_classes = class_dirs(&train_dir)?;
        let class_names = names(&train_classes);
        if names(&class_dirs(&test_dir)?) != class_names {
            return Err(Error::Dataset(
                "train/ and test/ have different class directories".into(),
            ));
        }
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (label, name) in class_names.iter().enumerate() {
            train.extend(load_class(&train_dir.join(name), label, opts, &mut report)?);
            test.extend(load_class(&test_dir.join(name), label, opts, &mut report)?);
        }
        return Ok((
            Dataset {
                train,
                test,
                class_names,
            },
            report,
        ));
    }

    let classes = class_dirs(root)?;
    if classes.len() < 2 {
        return Err(Error::Dataset(format!(
            "{} must contain at least two class directories",
            root.display()
        )));
    }
    let class_names = names(&classes);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (label, dir) in classes.iter().enumerate() {
        let mut samples = load_class(dir, label, opts, &mut report)?;
        samples.shuffle(&mut substream(opts.seed, "ingest/split", label as u64));
        let n_test = ((samples.len() as f64) * opts.test_fraction).round() as usize;
        let n_test = n_test.min(samples.len().saturating_sub(1));
        let rest = samples.split_off(n_test);
        test.extend(samples);
        train.extend(rest);
    }
    Ok((
        Dataset {
            train,
            test,
            class_names,
        },
        report,
    ))
}
