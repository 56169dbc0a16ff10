//! Strided, zero-padded 2-D convolution via im2col.

use ndarray::{Array1, Array2, ArrayView2, Axis};

/// Static shape of one convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub in_height: usize,
    pub in_width: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeometry {
    pub fn out_height(&self) -> usize {
        (self.in_height + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.in_width + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    pub fn out_positions(&self) -> usize {
        self.out_height() * self.out_width()
    }

    /// Unfolds `input` (`[in_channels, in_h * in_w]`) into `[patch_len, out_positions]`.
    pub fn im2col(&self, input: ArrayView2<f64>) -> Array2<f64> {
        let (oh, ow) = (self.out_height(), self.out_width());
        let k = self.kernel;
        let mut cols = Array2::zeros((self.patch_len(), oh * ow));
        let src = input.as_standard_layout();
        let src = src.as_slice().expect("standard layout");
        let dst = cols.as_slice_mut().expect("fresh array");
        let plane = self.in_height * self.in_width;
        for c in 0..self.in_channels {
            let chan = &src[c * plane..(c + 1) * plane];
            for ky in 0..k {
                for kx in 0..k {
                    let row = (c * k + ky) * k + kx;
                    let out_row = &mut dst[row * oh * ow..(row + 1) * oh * ow];
                    for oy in 0..oh {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy >= self.in_height as isize {
                            continue;
                        }
                        let src_row = &chan[iy as usize * self.in_width..(iy as usize + 1) * self.in_width];
                        for ox in 0..ow {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix >= 0 && ix < self.in_width as isize {
                                out_row[oy * ow + ox] = src_row[ix as usize];
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    /// Adjoint of [`im2col`](Self::im2col): folds column gradients back onto the input.
    pub fn col2im(&self, cols: ArrayView2<f64>) -> Array2<f64> {
        let (oh, ow) = (self.out_height(), self.out_width());
        let k = self.kernel;
        let plane = self.in_height * self.in_width;
        let mut out = Array2::zeros((self.in_channels, plane));
        let cols = cols.as_standard_layout();
        let src = cols.as_slice().expect("standard layout");
        let dst = out.as_slice_mut().expect("fresh array");
        for c in 0..self.in_channels {
            let chan = &mut dst[c * plane..(c + 1) * plane];
            for ky in 0..k {
                for kx in 0..k {
                    let row = (c * k + ky) * k + kx;
                    let col_row = &src[row * oh * ow..(row + 1) * oh * ow];
                    for oy in 0..oh {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy >= self.in_height as isize {
                            continue;
                        }
                        let base = iy as usize * self.in_width;
                        for ox in 0..ow {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix >= 0 && ix < self.in_width as isize {
                                chan[base + ix as usize] += col_row[oy * ow + ox];
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// `weight . cols + bias`, bias broadcast along positions.
pub fn affine(weight: &Array2<f64>, bias: &Array1<f64>, cols: &Array2<f64>) -> Array2<f64> {
    let mut out = weight.dot(cols);
    out += &bias.view().insert_axis(Axis(1));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(stride: usize, pad: usize) -> ConvGeometry {
        ConvGeometry {
            in_channels: 2,
            in_height: 5,
            in_width: 4,
            out_channels: 3,
            kernel: 3,
            stride,
            pad,
        }
    }

    #[test]
    fn output_dims() {
        assert_eq!((geom(1, 1).out_height(), geom(1, 1).out_width()), (5, 4));
        assert_eq!((geom(2, 1).out_height(), geom(2, 1).out_width()), (3, 2));
        assert_eq!((geom(1, 0).out_height(), geom(1, 0).out_width()), (3, 2));
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        for g in [geom(1, 1), geom(2, 1), geom(1, 0)] {
            let x = Array2::from_shape_fn((2, 20), |(c, p)| ((c * 20 + p) as f64 * 0.37).sin());
            let y = Array2::from_shape_fn((g.patch_len(), g.out_positions()), |(r, p)| {
                ((r * 7 + p) as f64 * 0.11).cos()
            });
            let lhs = (&g.im2col(x.view()) * &y).sum();
            let rhs = (&x * &g.col2im(y.view())).sum();
            assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
        }
    }
}
