//! Line-delimited JSON dataset manifest.
//!
//! One object per line with the frozen fields `id`, `path`, `label`,
//! `class_name`, `split` and optional `mask` (path to a binary PNG, white = cue).
//! Relative paths resolve against the manifest's directory.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use image::{GrayImage, Luma, Rgb, RgbImage};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::ingest::load_image;
use super::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::fsutil;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub id: usize,
    pub path: String,
    pub label: usize,
    pub class_name: String,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
}

pub fn write_manifest(records: &[ManifestRecord], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    fsutil::write_atomic(path, &buf)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ManifestRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Dataset(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// Writes every sample as an 8-bit PNG (plus mask PNG when present) and a
/// `manifest.jsonl` next to them.
pub fn export_dataset(ds: &Dataset, dir: &Path) -> Result<Vec<ManifestRecord>> {
    fs::create_dir_all(dir.join("images")).map_err(|e| Error::io(dir, e))?;
    let mut records = Vec::new();
    let splits = [(Split::Train, &ds.train), (Split::Test, &ds.test)];
    for (split, samples) in splits {
        for s in samples.iter() {
            let id = records.len();
            let rel = format!("images/{id:06}.png");
            save_png(&s.image, &dir.join(&rel))?;
            let mask = match &s.semantic_mask {
                Some(m) => {
                    let rel = format!("images/{id:06}.mask.png");
                    save_mask(m, &dir.join(&rel))?;
                    Some(rel)
                }
                None => None,
            };
            records.push(ManifestRecord {
                id,
                path: rel,
                label: s.label,
                class_name: ds.class_names[s.label].clone(),
                split,
                mask,
            });
        }
    }
    write_manifest(&records, &dir.join("manifest.jsonl"))?;
    Ok(records)
}

/// Reads a manifest and the images/masks it references (no resizing).
pub fn load_manifest(path: &Path) -> Result<Dataset> {
    let records = read_manifest(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let num_classes = records.iter().map(|r| r.label + 1).max().unwrap_or(0);
    let mut class_names = vec![String::new(); num_classes];
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for r in records {
        class_names[r.label] = r.class_name.clone();
        let image = load_image(&base.join(&r.path), None)?;
        let semantic_mask = match &r.mask {
            Some(m) => Some(load_mask(&base.join(m))?),
            None => None,
        };
        let sample = Sample {
            image,
            label: r.label,
            semantic_mask,
            source: Some(r.path),
        };
        match r.split {
            Split::Train => train.push(sample),
            Split::Test => test.push(sample),
        }
    }
    if class_names.iter().any(String::is_empty) {
        return Err(Error::Dataset("manifest skips a label index".into()));
    }
    Ok(Dataset {
        train,
        test,
        class_names,
    })
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub(crate) fn save_png(img: &crate::image::Image, path: &Path) -> Result<()> {
    let (c, h, w) = img.dim();
    let px = img.pixels();
    if c == 3 {
        let out = RgbImage::from_fn(w as u32, h as u32, |x, y| {
            let (x, y) = (x as usize, y as usize);
            Rgb([to_u8(px[[0, y, x]]), to_u8(px[[1, y, x]]), to_u8(px[[2, y, x]])])
        });
        out.save(path)?;
    } else {
        let out = GrayImage::from_fn(w as u32, h as u32, |x, y| {
            Luma([to_u8(px[[0, y as usize, x as usize]])])
        });
        out.save(path)?;
    }
    Ok(())
}

fn save_mask(mask: &Array2<bool>, path: &Path) -> Result<()> {
    let (h, w) = mask.dim();
    GrayImage::from_fn(w as u32, h as u32, |x, y| {
        Luma([if mask[[y as usize, x as usize]] { 255 } else { 0 }])
    })
    .save(path)?;
    Ok(())
}

fn load_mask(path: &Path) -> Result<Array2<bool>> {
    let g = image::open(path)?.to_luma8();
    let (w, h) = (g.width() as usize, g.height() as usize);
    Ok(Array2::from_shape_fn((h, w), |(y, x)| {
        g.get_pixel(x as u32, y as u32)[0] >= 128
    }))
}
