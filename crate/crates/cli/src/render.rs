//! Preview panels.
//!
//! A panel is five tiles left to right: image A with box A, image B with box B,
//! the mixed image with box A, the SPM of A over A, the SPM of B over B. Tiles
//! are upscaled by an integer factor (nearest neighbour) and separated by a
//! white gutter. Boxes are drawn as a one-tile-pixel outline: green for A's
//! box, cyan for B's box.
//!
//! SPM overlays use the "hot" colormap on `t = v / max(spm)`:
//! `r = clamp(3t)`, `g = clamp(3t - 1)`, `b = clamp(3t - 2)`, blended over the
//! grayscale-or-RGB source as `0.5 * image + 0.5 * heat`. Output is 8-bit RGB
//! PNG with channel values `round(255 * clamp(v, 0, 1))`.

use image::{Rgb, RgbImage};
use ndarray::Array2;
use snapmix_core::{BoxRegion, Image};

pub const OVERLAY_ALPHA: f64 = 0.5;
const GUTTER: u32 = 4;
const MIN_TILE: usize = 96;
const BOX_A: [f64; 3] = [0.0, 1.0, 0.0];
const BOX_B: [f64; 3] = [0.0, 1.0, 1.0];

/// Float RGB tile, `[y][x][c]` in row-major order.
struct Tile {
    height: usize,
    width: usize,
    rgb: Vec<[f64; 3]>,
}

impl Tile {
    fn from_image(img: &Image) -> Self {
        let (c, h, w) = img.dim();
        let px = img.pixels();
        let rgb = (0..h * w)
            .map(|i| {
                let (y, x) = (i / w, i % w);
                if c >= 3 {
                    [px[[0, y, x]], px[[1, y, x]], px[[2, y, x]]]
                } else {
                    [px[[0, y, x]]; 3]
                }
            })
            .collect();
        Self {
            height: h,
            width: w,
            rgb,
        }
    }

    fn overlay(&mut self, spm: &Array2<f64>) {
        let max = spm.iter().cloned().fold(0.0_f64, f64::max);
        for (i, px) in self.rgb.iter_mut().enumerate() {
            let v = spm[[i / self.width, i % self.width]];
            let t = if max > 0.0 { v / max } else { 0.0 };
            let heat = hot(t);
            for c in 0..3 {
                px[c] = (1.0 - OVERLAY_ALPHA) * px[c] + OVERLAY_ALPHA * heat[c];
            }
        }
    }

    fn outline(&mut self, b: &BoxRegion, color: [f64; 3]) {
        if b.is_empty() {
            return;
        }
        for y in b.y0..b.y1 {
            for x in b.x0..b.x1 {
                if y == b.y0 || y + 1 == b.y1 || x == b.x0 || x + 1 == b.x1 {
                    self.rgb[y * self.width + x] = color;
                }
            }
        }
    }
}

/// The "hot" colormap, `t` in `[0, 1]`.
pub fn hot(t: f64) -> [f64; 3] {
    let c = |v: f64| v.clamp(0.0, 1.0);
    [c(3.0 * t), c(3.0 * t - 1.0), c(3.0 * t - 2.0)]
}

fn to_u8(v: f64) -> u8 {
    (255.0 * v.clamp(0.0, 1.0)).round() as u8
}

pub struct PanelInputs<'a> {
    pub image_a: &'a Image,
    pub image_b: &'a Image,
    pub mixed: &'a Image,
    pub box_a: Option<&'a BoxRegion>,
    pub box_b: Option<&'a BoxRegion>,
    pub spm_a: &'a Array2<f64>,
    pub spm_b: &'a Array2<f64>,
}

pub fn panel(p: &PanelInputs<'_>) -> RgbImage {
    let mut a = Tile::from_image(p.image_a);
    let mut b = Tile::from_image(p.image_b);
    let mut mixed = Tile::from_image(p.mixed);
    let mut heat_a = Tile::from_image(p.image_a);
    let mut heat_b = Tile::from_image(p.image_b);
    heat_a.overlay(p.spm_a);
    heat_b.overlay(p.spm_b);
    if let Some(bx) = p.box_a {
        a.outline(bx, BOX_A);
        mixed.outline(bx, BOX_A);
    }
    if let Some(bx) = p.box_b {
        b.outline(bx, BOX_B);
    }
    let tiles = [a, b, mixed, heat_a, heat_b];
    let scale = MIN_TILE.div_ceil(tiles[0].width.max(tiles[0].height)).max(1) as u32;
    let (tw, th) = (tiles[0].width as u32 * scale, tiles[0].height as u32 * scale);
    let n = tiles.len() as u32;
    let mut out = RgbImage::from_pixel(n * tw + (n + 1) * GUTTER, th + 2 * GUTTER, Rgb([255, 255, 255]));
    for (k, tile) in tiles.iter().enumerate() {
        let ox = GUTTER + k as u32 * (tw + GUTTER);
        for y in 0..th {
            for x in 0..tw {
                let src = tile.rgb[(y / scale) as usize * tile.width + (x / scale) as usize];
                out.put_pixel(ox + x, GUTTER + y, Rgb(src.map(to_u8)));
            }
        }
    }
    out
}
