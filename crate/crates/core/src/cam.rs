//! Class activation maps and semantic percent maps.
//!
//! A CAM is the class-weighted sum of the last convolutional feature maps,
//! upsampled to image resolution with the same align-corners bilinear rule used
//! by the patch transform, then clamped at zero. Normalizing a CAM to unit mass
//! gives the semantic percent map (SPM) that drives semantic-ratio labels.

use ndarray::{Array1, Array2, Array3, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::image::{area_fraction, resize_bilinear, BoxRegion, Image};
use crate::model::Classifier;

/// CAM sums at or below this are treated as "no evidence" and give a uniform SPM.
pub const SPM_EPSILON: f64 = 1e-12;

/// Output of the last convolutional stage for one image, `[d, h, w]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationStack {
    features: Array3<f64>,
}

impl ActivationStack {
    pub fn new(features: Array3<f64>) -> Result<Self> {
        if features.dim().0 == 0 {
            return Err(Error::invalid("activation stack needs depth >= 1"));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteActivations(
                "activation stack contains non-finite values".into(),
            ));
        }
        Ok(Self { features })
    }

    pub fn depth(&self) -> usize {
        self.features.dim().0
    }

    pub fn features(&self) -> &Array3<f64> {
        &self.features
    }
}

/// Per-pixel share of an image's label evidence; non-negative, sums to one.
///
/// The degenerate fallback is kept symbolic (`Uniform`) so that its box masses
/// are computed with exactly the same arithmetic as a box's area ratio.
#[derive(Debug, Clone, PartialEq)]
pub enum SemanticPercentMap {
    Uniform { height: usize, width: usize },
    Dense(Array2<f64>),
}

impl SemanticPercentMap {
    pub fn uniform(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("SPM dims must be positive"));
        }
        Ok(Self::Uniform { height, width })
    }

    /// Same as [`make_spm`].
    pub fn from_cam(cam: Array2<f64>) -> Result<Self> {
        make_spm(cam)
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            Self::Uniform { height, width } => (*height, *width),
            Self::Dense(m) => m.dim(),
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, Self::Uniform { .. })
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        match self {
            Self::Uniform { height, width } => 1.0 / (height * width) as f64,
            Self::Dense(m) => m[[y, x]],
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        match self {
            Self::Uniform { height, width } => {
                Array2::from_elem((*height, *width), 1.0 / (height * width) as f64)
            }
            Self::Dense(m) => m.clone(),
        }
    }

    /// Total mass inside `region`.
    pub fn box_mass(&self, region: &BoxRegion) -> Result<f64> {
        let (h, w) = self.dims();
        region.ensure_fits(w, h)?;
        Ok(match self {
            Self::Uniform { height, width } => area_fraction(region.area(), *width, *height),
            Self::Dense(m) => {
                let mut total = 0.0;
                for y in region.y0..region.y1 {
                    let row = m.row(y);
                    total += row.slice(ndarray::s![region.x0..region.x1]).sum();
                }
                total
            }
        })
    }
}

/// `sum_l weights[l] * features[l]` at feature resolution, before upsampling or clamping.
pub fn weighted_channel_sum(stack: &ActivationStack, weights: ArrayView1<f64>) -> Result<Array2<f64>> {
    if weights.len() != stack.depth() {
        return Err(Error::shape(format!(
            "class weight length {} does not match feature depth {}",
            weights.len(),
            stack.depth()
        )));
    }
    let (d, h, w) = stack.features.dim();
    let flat = stack
        .features
        .view()
        .into_shape_with_order((d, h * w))
        .map_err(|e| Error::shape(e.to_string()))?;
    let summed: Array1<f64> = weights.dot(&flat);
    summed
        .into_shape_with_order((h, w))
        .map_err(|e| Error::shape(e.to_string()))
}

/// Class activation map at `(out_h, out_w)`: weighted channel sum, bilinear
/// upsample (align-corners), then negatives clamped to zero. Bias is ignored.
pub fn compute_cam(
    stack: &ActivationStack,
    weights: ArrayView1<f64>,
    out_h: usize,
    out_w: usize,
) -> Result<Array2<f64>> {
    let (_, h, w) = stack.features.dim();
    if out_h < h || out_w < w {
        return Err(Error::invalid(format!(
            "CAM output {out_h}x{out_w} smaller than features {h}x{w}"
        )));
    }
    let low = weighted_channel_sum(stack, weights)?;
    let mut cam = resize_bilinear(low.view(), out_h, out_w);
    cam.mapv_inplace(|v| v.max(0.0));
    Ok(cam)
}

/// Normalizes a non-negative CAM to unit mass; a (near) zero CAM gives the uniform map.
pub fn make_spm(cam: Array2<f64>) -> Result<SemanticPercentMap> {
    let (h, w) = cam.dim();
    if h == 0 || w == 0 {
        return Err(Error::invalid("CAM must be at least 1x1"));
    }
    if cam.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("CAM contains non-finite values"));
    }
    if cam.iter().any(|&v| v < 0.0) {
        return Err(Error::invalid(
            "CAM has negative entries; clamp before normalizing",
        ));
    }
    let total = cam.sum();
    if total < SPM_EPSILON {
        return SemanticPercentMap::uniform(h, w);
    }
    Ok(SemanticPercentMap::Dense(cam / total))
}

/// SPM for each image from the model's own head row of its ground-truth label.
/// Inference only: nothing here touches gradients or parameters.
pub fn batch_spms(model: &Classifier, images: &[Image], labels: &[usize]) -> Result<Vec<SemanticPercentMap>> {
    if images.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} images but {} labels",
            images.len(),
            labels.len()
        )));
    }
    images
        .iter()
        .zip(labels)
        .map(|(img, &label)| spm_for(model, img, label))
        .collect()
}

/// Single-image path of [`batch_spms`].
pub fn spm_for(model: &Classifier, image: &Image, label: usize) -> Result<SemanticPercentMap> {
    let cam = cam_for(model, image, label)?;
    make_spm(cam)
}

/// CAM of `image` for class `label` at image resolution.
pub fn cam_for(model: &Classifier, image: &Image, label: usize) -> Result<Array2<f64>> {
    let classes = model.num_classes();
    if label >= classes {
        return Err(Error::invalid(format!(
            "label {label} out of range for {classes} classes"
        )));
    }
    let stack = model.features(image)?;
    let row = model.params().head.index_axis(Axis(0), label);
    compute_cam(&stack, row, image.height(), image.width())
}
