use ndarray::{s, Array3, Zip};
use rand::Rng;
use rand_distr::{Beta, Distribution};

use super::{MixResult, Strategy};
use crate::error::{Error, Result};
use crate::image::{resize_bilinear, BoxRegion, Image};

/// One draw from `Beta(alpha, alpha)`.
pub fn sample_lambda<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("alpha must be > 0, got {alpha}")));
    }
    let beta = Beta::new(alpha, alpha).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(beta.sample(rng).clamp(0.0, 1.0))
}

/// Samples a box whose sides are `round(dim * sqrt(lambda))`, centred uniformly
/// over the image and clipped to it. `realized_ratio` reflects the clipped box.
/// Both the centre draws happen even for degenerate lambdas, so rng consumption
/// does not depend on lambda.
pub fn sample_box<R: Rng + ?Sized>(
    lambda: f64,
    width: usize,
    height: usize,
    rng: &mut R,
) -> Result<BoxRegion> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!("lambda must be in [0, 1], got {lambda}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::invalid("image dims must be positive"));
    }
    let side = lambda.sqrt();
    let bw = (width as f64 * side).round() as usize;
    let bh = (height as f64 * side).round() as usize;
    let cx = rng.random_range(0..width);
    let cy = rng.random_range(0..height);
    let (x0, x1) = clip_span(cx, bw, width);
    let (y0, y1) = clip_span(cy, bh, height);
    BoxRegion::new(x0, y0, x1, y1, width, height)
}

/// A side as long as the axis covers it whatever the centre, so `lambda = 1` is the full image.
fn clip_span(center: usize, len: usize, bound: usize) -> (usize, usize) {
    if len >= bound {
        return (0, bound);
    }
    let half = len / 2;
    let lo = center.saturating_sub(half);
    let hi = (center + len - half).min(bound);
    (lo.min(hi), hi)
}

/// Pixelwise blend `lambda * a + (1 - lambda) * b`.
pub fn mixup(img_a: &Image, label_a: usize, img_b: &Image, label_b: usize, lambda: f64) -> Result<MixResult> {
    img_a.ensure_same_shape(img_b)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!("lambda must be in [0, 1], got {lambda}")));
    }
    let mut out = img_a.clone();
    Zip::from(out.pixels_mut())
        .and(img_b.pixels())
        .for_each(|o, &b| *o = lambda * *o + (1.0 - lambda) * b);
    Ok(MixResult {
        image: out,
        label_a,
        label_b,
        rho_a: lambda,
        rho_b: 1.0 - lambda,
        strategy: Strategy::Mixup,
        box_a: None,
        box_b: None,
    })
}

/// Pastes `img_b` into `img_a` over `bx` at the same coordinates; area-ratio labels.
pub fn cutmix(
    img_a: &Image,
    label_a: usize,
    img_b: &Image,
    label_b: usize,
    bx: &BoxRegion,
) -> Result<MixResult> {
    img_a.ensure_same_shape(img_b)?;
    bx.ensure_fits(img_a.width(), img_a.height())?;
    let mut out = img_a.clone();
    if !bx.is_empty() {
        let region = s![.., bx.y0..bx.y1, bx.x0..bx.x1];
        out.pixels_mut()
            .slice_mut(region)
            .assign(&img_b.pixels().slice(region));
    }
    let (rho_a, rho_b) = super::area_ratio_labels(bx);
    Ok(MixResult {
        image: out,
        label_a,
        label_b,
        rho_a,
        rho_b,
        strategy: Strategy::Cutmix,
        box_a: Some(*bx),
        box_b: Some(*bx),
    })
}

/// Sets every pixel inside `bx` to `fill`; the label is kept whole.
pub fn cutout(img: &Image, label: usize, bx: &BoxRegion, fill: f64) -> Result<MixResult> {
    bx.ensure_fits(img.width(), img.height())?;
    if !fill.is_finite() {
        return Err(Error::invalid("fill must be finite"));
    }
    let mut out = img.clone();
    if !bx.is_empty() {
        out.pixels_mut()
            .slice_mut(s![.., bx.y0..bx.y1, bx.x0..bx.x1])
            .fill(fill);
    }
    Ok(MixResult {
        image: out,
        label_a: label,
        label_b: label,
        rho_a: 1.0,
        rho_b: 0.0,
        strategy: Strategy::Cutout,
        box_a: Some(*bx),
        box_b: None,
    })
}

/// Crops `src_box` out of `src` and bilinearly resizes it (align-corners) to `dst_h x dst_w`.
pub fn transform_patch(src: &Image, src_box: &BoxRegion, dst_w: usize, dst_h: usize) -> Result<Array3<f64>> {
    if src_box.is_empty() {
        return Err(Error::invalid("cannot transform an empty source box"));
    }
    if dst_w == 0 || dst_h == 0 {
        return Err(Error::invalid("patch target dims must be >= 1"));
    }
    src_box.ensure_fits(src.width(), src.height())?;
    let crop = src.crop(src_box);
    if crop.dim().1 == dst_h && crop.dim().2 == dst_w {
        return Ok(crop);
    }
    let mut out = Array3::zeros((src.channels(), dst_h, dst_w));
    for (c, plane) in crop.outer_iter().enumerate() {
        out.slice_mut(s![c, .., ..])
            .assign(&resize_bilinear(plane, dst_h, dst_w));
    }
    Ok(out)
}

/// `img_a` outside `box_a`; inside it, the `box_b` crop of `img_b` resized to fit.
/// Either box being empty leaves `img_a` untouched.
pub fn snapmix_image(img_a: &Image, box_a: &BoxRegion, img_b: &Image, box_b: &BoxRegion) -> Result<Image> {
    img_a.ensure_same_shape(img_b)?;
    box_a.ensure_fits(img_a.width(), img_a.height())?;
    box_b.ensure_fits(img_b.width(), img_b.height())?;
    let mut out = img_a.clone();
    if box_a.is_empty() || box_b.is_empty() {
        return Ok(out);
    }
    let patch = transform_patch(img_b, box_b, box_a.width(), box_a.height())?;
    out.pixels_mut()
        .slice_mut(s![.., box_a.y0..box_a.y1, box_a.x0..box_a.x1])
        .assign(&patch);
    Ok(out)
}

/// Full SnapMix sample: asymmetric paste plus the supplied label weights.
/// Degenerate (empty) boxes yield the clean image with `rho = (1, 0)`.
#[allow(clippy::too_many_arguments)]
pub fn snapmix(
    img_a: &Image,
    label_a: usize,
    box_a: &BoxRegion,
    img_b: &Image,
    label_b: usize,
    box_b: &BoxRegion,
    rho: (f64, f64),
) -> Result<MixResult> {
    let image = snapmix_image(img_a, box_a, img_b, box_b)?;
    let (rho_a, rho_b) = if box_a.is_empty() || box_b.is_empty() {
        (1.0, 0.0)
    } else {
        rho
    };
    Ok(MixResult {
        image,
        label_a,
        label_b,
        rho_a,
        rho_b,
        strategy: Strategy::Snapmix,
        box_a: Some(*box_a),
        box_b: Some(*box_b),
    })
}
