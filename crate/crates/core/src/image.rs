//! Dense image rasters and axis-aligned box regions.

use ndarray::{s, Array2, Array3, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `[channels, height, width]` raster of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pixels: Array3<f64>,
}

impl Image {
    pub fn new(pixels: Array3<f64>) -> Result<Self> {
        let (c, h, w) = pixels.dim();
        if c != 1 && c != 3 {
            return Err(Error::invalid(format!(
                "image must have 1 or 3 channels, got {c}"
            )));
        }
        if h == 0 || w == 0 {
            return Err(Error::invalid(format!("image must be at least 1x1, got {h}x{w}")));
        }
        if pixels.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("image contains non-finite values"));
        }
        Ok(Self {
            pixels: pixels.as_standard_layout().into_owned(),
        })
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(Array3::from_elem((channels, height, width), value))
    }

    pub fn channels(&self) -> usize {
        self.pixels.dim().0
    }

    pub fn height(&self) -> usize {
        self.pixels.dim().1
    }

    pub fn width(&self) -> usize {
        self.pixels.dim().2
    }

    pub fn dim(&self) -> (usize, usize, usize) {
        self.pixels.dim()
    }

    pub fn pixels(&self) -> &Array3<f64> {
        &self.pixels
    }

    pub fn into_pixels(self) -> Array3<f64> {
        self.pixels
    }

    /// Mutable access for in-crate operators that preserve the invariants.
    pub(crate) fn pixels_mut(&mut self) -> &mut Array3<f64> {
        &mut self.pixels
    }

    pub(crate) fn ensure_same_shape(&self, other: &Image) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::shape(format!(
                "images differ in shape: {:?} vs {:?}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(())
    }

    /// Copies the `region` crop into a new `[channels, h, w]` array.
    pub fn crop(&self, region: &BoxRegion) -> Array3<f64> {
        self.pixels
            .slice(s![.., region.y0..region.y1, region.x0..region.x1])
            .to_owned()
    }

    /// Mirror along the width axis.
    pub fn flip_horizontal(&self) -> Image {
        Image {
            pixels: self
                .pixels
                .slice(s![.., .., ..;-1])
                .as_standard_layout()
                .into_owned(),
        }
    }
}

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)` inside a `width x height` image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
    pub image_width: usize,
    pub image_height: usize,
    /// `(x1 - x0) * (y1 - y0) / (width * height)`, always of the clipped box.
    pub realized_ratio: f64,
}

impl BoxRegion {
    pub fn new(
        x0: usize,
        y0: usize,
        x1: usize,
        y1: usize,
        image_width: usize,
        image_height: usize,
    ) -> Result<Self> {
        if image_width == 0 || image_height == 0 {
            return Err(Error::invalid("box image dims must be positive"));
        }
        if x0 > x1 || y0 > y1 || x1 > image_width || y1 > image_height {
            return Err(Error::invalid(format!(
                "box ({x0},{y0})-({x1},{y1}) not inside a {image_width}x{image_height} image"
            )));
        }
        let mut b = Self {
            x0,
            y0,
            x1,
            y1,
            image_width,
            image_height,
            realized_ratio: 0.0,
        };
        b.realized_ratio = area_fraction(b.area(), image_width, image_height);
        Ok(b)
    }

    pub fn empty(image_width: usize, image_height: usize) -> Result<Self> {
        Self::new(0, 0, 0, 0, image_width, image_height)
    }

    pub fn full(image_width: usize, image_height: usize) -> Result<Self> {
        Self::new(0, 0, image_width, image_height, image_width, image_height)
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn is_empty(&self) -> bool {
        self.x0 == self.x1 || self.y0 == self.y1
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub(crate) fn ensure_fits(&self, width: usize, height: usize) -> Result<()> {
        if self.image_width != width || self.image_height != height {
            return Err(Error::shape(format!(
                "box was sampled for a {}x{} image, used on {}x{}",
                self.image_width, self.image_height, width, height
            )));
        }
        Ok(())
    }
}

/// Shared by [`BoxRegion::realized_ratio`] and the uniform SPM mass so the two agree bit-for-bit.
pub(crate) fn area_fraction(area: usize, width: usize, height: usize) -> f64 {
    area as f64 / (width * height) as f64
}

/// Bilinear resize of a single plane using the align-corners convention: output
/// corner pixels sample input corner pixels exactly, and the source coordinate of
/// output index `i` is `i * (in - 1) / (out - 1)` (0 when `out == 1`).
pub fn resize_bilinear(src: ArrayView2<f64>, out_h: usize, out_w: usize) -> Array2<f64> {
    let (in_h, in_w) = src.dim();
    if (in_h, in_w) == (out_h, out_w) {
        return src.to_owned();
    }
    let ys = axis_samples(in_h, out_h);
    let xs = axis_samples(in_w, out_w);
    let mut out = Array2::zeros((out_h, out_w));
    for (oy, &(y0, y1, fy)) in ys.iter().enumerate() {
        for (ox, &(x0, x1, fx)) in xs.iter().enumerate() {
            let top = src[[y0, x0]] * (1.0 - fx) + src[[y0, x1]] * fx;
            let bottom = src[[y1, x0]] * (1.0 - fx) + src[[y1, x1]] * fx;
            out[[oy, ox]] = top * (1.0 - fy) + bottom * fy;
        }
    }
    out
}

/// For each output index: (lower source index, upper source index, fractional weight of upper).
fn axis_samples(n_in: usize, n_out: usize) -> Vec<(usize, usize, f64)> {
    let scale = if n_out > 1 {
        (n_in - 1) as f64 / (n_out - 1) as f64
    } else {
        0.0
    };
    (0..n_out)
        .map(|i| {
            let pos = i as f64 * scale;
            let lo = (pos.floor() as usize).min(n_in - 1);
            let hi = (lo + 1).min(n_in - 1);
            let frac = if hi == lo { 0.0 } else { pos - lo as f64 };
            (lo, hi, frac)
        })
        .collect()
}
