//! Naive scalar-loop re-implementations of the production kernels. Each check
//! draws `n` seeded random instances and returns the largest deviation seen.

use ndarray::{Array1, Array2, Array3};
use rand::Rng;
use snapmix_core::augment::{cutmix, cutout, mixup, semantic_ratio_labels, snapmix_image, transform_patch};
use snapmix_core::cam::{compute_cam, make_spm, ActivationStack};
use snapmix_core::data::{true_semantic_ratio, Sample};
use snapmix_core::model::{mixed_loss, train_step, BatchId, LossWeights, MixedTarget, Sgd};
use snapmix_core::rng::from_seed;
use snapmix_core::{Architecture, BoxRegion, Classifier, Image, MixResult, ModelConfig};

pub fn rand_image(rng: &mut impl Rng, c: usize, h: usize, w: usize) -> Image {
    Image::new(Array3::from_shape_fn((c, h, w), |_| rng.random::<f64>())).unwrap()
}

pub fn rand_box(rng: &mut impl Rng, w: usize, h: usize) -> BoxRegion {
    let (xa, xb) = (rng.random_range(0..=w), rng.random_range(0..=w));
    let (ya, yb) = (rng.random_range(0..=h), rng.random_range(0..=h));
    BoxRegion::new(xa.min(xb), ya.min(yb), xa.max(xb), ya.max(yb), w, h).unwrap()
}

pub fn nonempty_box(rng: &mut impl Rng, w: usize, h: usize) -> BoxRegion {
    loop {
        let b = rand_box(rng, w, h);
        if !b.is_empty() {
            return b;
        }
    }
}

pub fn inside(b: &BoxRegion, y: usize, x: usize) -> bool {
    x >= b.x0 && x < b.x1 && y >= b.y0 && y < b.y1
}

pub fn max_abs_diff(a: &Array3<f64>, b: &Array3<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Align-corners bilinear sample of `plane` at output `(i, j)` of an `oh x ow` grid.
pub fn bilinear(plane: &[Vec<f64>], oh: usize, ow: usize, i: usize, j: usize) -> f64 {
    let (ih, iw) = (plane.len(), plane[0].len());
    let sy = if oh == 1 {
        0.0
    } else {
        i as f64 * (ih as f64 - 1.0) / (oh as f64 - 1.0)
    };
    let sx = if ow == 1 {
        0.0
    } else {
        j as f64 * (iw as f64 - 1.0) / (ow as f64 - 1.0)
    };
    let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(ih - 1), (x0 + 1).min(iw - 1));
    let (dy, dx) = (sy - y0 as f64, sx - x0 as f64);
    plane[y0][x0] * (1.0 - dy) * (1.0 - dx)
        + plane[y0][x1] * (1.0 - dy) * dx
        + plane[y1][x0] * dy * (1.0 - dx)
        + plane[y1][x1] * dy * dx
}

fn crop_plane(img: &Image, c: usize, b: &BoxRegion) -> Vec<Vec<f64>> {
    (b.y0..b.y1)
        .map(|y| (b.x0..b.x1).map(|x| img.pixels()[[c, y, x]]).collect())
        .collect()
}

pub fn mixup_err(seed: u64, n: usize) -> f64 {
    let mut rng = from_seed(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let c = if rng.random_bool(0.5) { 1 } else { 3 };
        let (h, w) = (rng.random_range(1..12), rng.random_range(1..12));
        let (a, b) = (rand_image(&mut rng, c, h, w), rand_image(&mut rng, c, h, w));
        let lambda: f64 = rng.random();
        let out = mixup(&a, 0, &b, 1, lambda).unwrap();
        for ci in 0..c {
            for y in 0..h {
                for x in 0..w {
                    let want = lambda * a.pixels()[[ci, y, x]] + (1.0 - lambda) * b.pixels()[[ci, y, x]];
                    worst = worst.max((out.image.pixels()[[ci, y, x]] - want).abs());
                }
            }
        }
        worst = worst
            .max((out.rho_a - lambda).abs())
            .max((out.rho_b - (1.0 - lambda)).abs());
    }
    worst
}

/// Pixels must be copied exactly, so any mismatch counts as an error of 1.
pub fn cutmix_err(seed: u64, n: usize) -> f64 {
    let mut rng = from_seed(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let (h, w) = (rng.random_range(1..14), rng.random_range(1..14));
        let (a, b) = (rand_image(&mut rng, 3, h, w), rand_image(&mut rng, 3, h, w));
        let bx = rand_box(&mut rng, w, h);
        let out = cutmix(&a, 2, &b, 5, &bx).unwrap();
        let mut from_b = 0usize;
        for y in 0..h {
            for x in 0..w {
                let src = if inside(&bx, y, x) {
                    from_b += 1;
                    &b
                } else {
                    &a
                };
                for c in 0..3 {
                    if out.image.pixels()[[c, y, x]] != src.pixels()[[c, y, x]] {
                        worst = 1.0;
                    }
                }
            }
        }
        let ratio = from_b as f64 / (w * h) as f64;
        worst = worst
            .max((out.rho_b - ratio).abs())
            .max((out.rho_a - (1.0 - ratio)).abs());
    }
    worst
}

pub fn cutout_err(seed: u64, n: usize) -> f64 {
    let mut rng = from_seed(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let (h, w) = (rng.random_range(1..14), rng.random_range(1..14));
        let img = rand_image(&mut rng, 1, h, w);
        let bx = rand_box(&mut rng, w, h);
        let fill = rng.random_range(-1.0..1.0);
        let out = cutout(&img, 3, &bx, fill).unwrap();
        let mut filled = 0;
        for y in 0..h {
            for x in 0..w {
                let v = out.image.pixels()[[0, y, x]];
                let want = if inside(&bx, y, x) {
                    filled += 1;
                    fill
                } else {
                    img.pixels()[[0, y, x]]
                };
                if v != want {
                    worst = 1.0;
                }
            }
        }
        if filled != bx.area() || (out.rho_a, out.rho_b) != (1.0, 0.0) {
            worst = 1.0;
        }
    }
    worst
}

pub fn transform_patch_err(seed: u64, n: usize) -> f64 {
    let mut rng = from_seed(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let (h, w) = (rng.random_range(1..16), rng.random_range(1..16));
        let img = rand_image(&mut rng, 3, h, w);
        let src = nonempty_box(&mut rng, w, h);
        let (dw, dh) = (rng.random_range(1..20), rng.random_range(1..20));
        let patch = transform_patch(&img, &src, dw, dh).unwrap();
        assert_eq!(patch.dim(), (3, dh, dw));
        for c in 0..3 {
            let plane = crop_plane(&img, c, &src);
            for i in 0..dh {
                for j in 0..dw {
                    worst = worst.max((patch[[c, i, j]] - bilinear(&plane, dh, dw, i, j)).abs());
                }
            }
        }
    }
    worst
}

pub fn snapmix_image_err(seed: u64, n: usize) -> f64 {
    let mut rng = from_seed(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let (h, w) = (rng.random_range(1..14), rng.random_range(1..14));
        let (a, b) = (rand_image(&mut rng, 3, h, w), rand_image(&mut rng, 3, h, w));
        let (box_a, box_b) = (rand_box(&mut rng, w, h), rand_box(&mut rng, w, h));
        let out = snapmix_image(&a, &box_a, &b, &box_b).unwrap();
        let mut want = a.pixels().clone();
        if !box_a.is_empty() && !box_b.is_empty() {
            for c in 0..3 {
                let plane = crop_plane(&b, c, &box_b);
                for y in box_a.y0..box_a.y1 {
                    for x in box_a.x0..box_a.x1 {
                        want[[c, y, x]] =
                            bilinear(&plane, box_a.height(), box_a.width(), y - box_a.y0, x - box_a.x0);
                    }
                }
            }
        }
        worst = worst.max(max_abs_diff(out.pixels(), &want));
    }
    worst
}

pub fn semantic_ratio_err(seed: u64, n: usize) -> f64 {
    let mut rng = from_seed(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let (h, w) = (rng.random_range(1..14), rng.random_range(1..14));
        let mut dense = || make_spm(Array2::from_shape_fn((h, w), |_| rng.random::<f64>())).unwrap();
        let (spm_a, spm_b) = (dense(), dense());
        let (box_a, box_b) = (rand_box(&mut rng, w, h), rand_box(&mut rng, w, h));
        let (rho_a, rho_b) = semantic_ratio_labels(&spm_a, &box_a, &spm_b, &box_b).unwrap();
        let (mut mass_a, mut mass_b) = (0.0, 0.0);
        for y in 0..h {
            for x in 0..w {
                if inside(&box_a, y, x) {
                    mass_a += spm_a.get(y, x);
                }
                if inside(&box_b, y, x) {
                    mass_b += spm_b.get(y, x);
                }
            }
        }
        worst = worst
            .max((rho_a - (1.0 - mass_a).clamp(0.0, 1.0)).abs())
            .max((rho_b - mass_b.clamp(0.0, 1.0)).abs());
    }
    worst
}

pub fn compute_cam_err(seed: u64, n: usize) -> f64 {
    let mut rng = from_seed(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let (d, h, w) = (
            rng.random_range(1..6),
            rng.random_range(1..6),
            rng.random_range(1..6),
        );
        let feats = Array3::from_shape_fn((d, h, w), |_| rng.random_range(-1.0..1.0));
        let weights = Array1::from_shape_fn(d, |_| rng.random_range(-1.0..1.0));
        let (oh, ow) = (h + rng.random_range(0..10), w + rng.random_range(0..10));
        let stack = ActivationStack::new(feats.clone()).unwrap();
        let cam = compute_cam(&stack, weights.view(), oh, ow).unwrap();
        let low: Vec<Vec<f64>> = (0..h)
            .map(|y| {
                (0..w)
                    .map(|x| (0..d).map(|l| weights[l] * feats[[l, y, x]]).sum())
                    .collect()
            })
            .collect();
        for i in 0..oh {
            for j in 0..ow {
                worst = worst.max((cam[[i, j]] - bilinear(&low, oh, ow, i, j).max(0.0)).abs());
            }
        }
    }
    worst
}

fn random_arch(rng: &mut impl Rng) -> Architecture {
    let blocks = rng.random_range(1..4);
    Architecture {
        input_channels: if rng.random_bool(0.5) { 1 } else { 3 },
        input_height: rng.random_range(3..10),
        input_width: rng.random_range(3..10),
        num_classes: rng.random_range(2..5),
        model: ModelConfig {
            channels: (0..blocks).map(|_| rng.random_range(1..5)).collect(),
            strides: (0..blocks).map(|_| rng.random_range(1..3)).collect(),
            kernel: [1, 3][rng.random_range(0..2)],
            input_offset: rng.random_range(0.0..1.0),
            ..ModelConfig::default()
        },
    }
}

/// Direct six-loop zero-padded strided convolution followed by ReLU.
fn conv_relu(
    input: &Array3<f64>,
    weight: &Array2<f64>,
    bias: &Array1<f64>,
    k: usize,
    stride: usize,
) -> Array3<f64> {
    let (ci, ih, iw) = input.dim();
    let pad = k / 2;
    let oh = (ih + 2 * pad - k) / stride + 1;
    let ow = (iw + 2 * pad - k) / stride + 1;
    let mut out = Array3::zeros((weight.nrows(), oh, ow));
    for o in 0..weight.nrows() {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = bias[o];
                for c in 0..ci {
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if iy >= 0 && ix >= 0 && (iy as usize) < ih && (ix as usize) < iw {
                                acc +=
                                    weight[[o, (c * k + ky) * k + kx]] * input[[c, iy as usize, ix as usize]];
                            }
                        }
                    }
                }
                out[[o, oy, ox]] = acc.max(0.0);
            }
        }
    }
    out
}

/// Features and logits of random architectures against direct convolution and a scalar GAP head.
pub fn forward_err(seed: u64, n: usize) -> f64 {
    let mut rng = from_seed(seed);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < n {
        let arch = random_arch(&mut rng);
        if arch.validate().is_err() {
            continue;
        }
        done += 1;
        let m = arch.model.clone();
        let model = Classifier::new(arch.clone(), &mut rng).unwrap();
        let img = rand_image(&mut rng, arch.input_channels, arch.input_height, arch.input_width);
        let mut x = img.pixels().mapv(|v| v - m.input_offset);
        for (p, &s) in model.params().convs.iter().zip(&m.strides) {
            x = conv_relu(&x, &p.weight, &p.bias, m.kernel, s);
        }
        let (d, h, w) = x.dim();
        let out = model.forward(&img).unwrap();
        worst = worst.max(max_abs_diff(out.features.features(), &x));
        for k in 0..arch.num_classes {
            let mut logit = 0.0;
            for l in 0..d {
                let mut sum = 0.0;
                for y in 0..h {
                    for xx in 0..w {
                        sum += x[[l, y, xx]];
                    }
                }
                logit += model.params().head[[k, l]] * sum / (h * w) as f64;
            }
            worst = worst.max((out.logits[k] - logit).abs());
        }
    }
    worst
}

pub fn mixed_loss_err(seed: u64, n: usize) -> f64 {
    let mut rng = from_seed(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let k = rng.random_range(2..8);
        let logits: Array1<f64> = Array1::from_shape_fn(k, |_| rng.random_range(-5.0..5.0));
        let t = MixedTarget {
            label_a: rng.random_range(0..k),
            label_b: rng.random_range(0..k),
            rho_a: rng.random(),
            rho_b: rng.random(),
        };
        let z: f64 = logits.iter().map(|v| v.exp()).sum();
        let ce = |y: usize| -(logits[y].exp() / z).ln();
        let want = t.rho_a * ce(t.label_a) + t.rho_b * ce(t.label_b);
        worst = worst.max((mixed_loss(logits.view(), &t) - want).abs());
    }
    worst
}

/// A backbone-free model is multinomial logistic regression on the image mean,
/// so one SGD step from zero momentum has a closed form.
pub fn train_step_err(seed: u64, n: usize) -> f64 {
    let mut rng = from_seed(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let k = rng.random_range(2..5);
        let arch = Architecture {
            input_channels: 1,
            input_height: rng.random_range(1..5),
            input_width: rng.random_range(1..5),
            num_classes: k,
            model: ModelConfig {
                channels: vec![],
                strides: vec![],
                kernel: 1,
                input_offset: 0.0,
                ..ModelConfig::default()
            },
        };
        let mut model = Classifier::new(arch.clone(), &mut rng).unwrap();
        let w0: Vec<f64> = model.params().head.iter().copied().collect();
        let batch_len = rng.random_range(1..4);
        let batch: Vec<MixResult> = (0..batch_len)
            .map(|_| MixResult {
                label_b: rng.random_range(0..k),
                rho_a: rng.random(),
                rho_b: rng.random(),
                ..MixResult::clean(
                    rand_image(&mut rng, 1, arch.input_height, arch.input_width),
                    rng.random_range(0..k),
                )
            })
            .collect();
        let lr = rng.random_range(0.01..1.0);
        let mut grad = vec![0.0; k];
        for s in &batch {
            let px = s.image.pixels();
            let mean = px.iter().sum::<f64>() / px.len() as f64;
            let logits: Vec<f64> = w0.iter().map(|w| w * mean).collect();
            let z: f64 = logits.iter().map(|v| v.exp()).sum();
            for c in 0..k {
                let p = logits[c].exp() / z;
                let y = s.rho_a * f64::from(u8::from(c == s.label_a))
                    + s.rho_b * f64::from(u8::from(c == s.label_b));
                grad[c] += ((s.rho_a + s.rho_b) * p - y) * mean / batch_len as f64;
            }
        }
        let mut opt = Sgd::new(&model, 0.9);
        train_step(
            &mut model,
            &mut opt,
            &batch,
            lr,
            LossWeights::default(),
            BatchId::default(),
        )
        .unwrap();
        for c in 0..k {
            worst = worst.max((model.params().head[[c, 0]] - (w0[c] - lr * grad[c])).abs());
        }
    }
    worst
}

pub fn true_semantic_ratio_err(seed: u64, n: usize) -> f64 {
    let mut rng = from_seed(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let (h, w) = (rng.random_range(1..14), rng.random_range(1..14));
        let mask = Array2::from_shape_fn((h, w), |_| rng.random_bool(0.3));
        let sample = Sample {
            image: Image::filled(1, h, w, 0.0).unwrap(),
            label: 0,
            semantic_mask: Some(mask.clone()),
            source: None,
        };
        let bx = rand_box(&mut rng, w, h);
        let total = mask.iter().filter(|&&m| m).count();
        let mut hit = 0;
        for y in 0..h {
            for x in 0..w {
                if mask[[y, x]] && inside(&bx, y, x) {
                    hit += 1;
                }
            }
        }
        let want = if total == 0 {
            0.0
        } else {
            hit as f64 / total as f64
        };
        worst = worst.max((true_semantic_ratio(&sample, &bx).unwrap() - want).abs());
    }
    worst
}

/// Every oracle check as `(operation, max error)`.
pub fn all(n: usize) -> Vec<(&'static str, f64)> {
    vec![
        ("mixup", mixup_err(100, n)),
        ("cutmix", cutmix_err(101, n)),
        ("cutout", cutout_err(102, n)),
        ("transform_patch", transform_patch_err(103, n)),
        ("snapmix_image", snapmix_image_err(104, n)),
        ("semantic_ratio_labels", semantic_ratio_err(105, n)),
        ("compute_cam", compute_cam_err(106, n)),
        ("forward", forward_err(107, n)),
        ("mixed_loss", mixed_loss_err(108, n)),
        ("train_step", train_step_err(109, n)),
        ("true_semantic_ratio", true_semantic_ratio_err(110, n)),
    ]
}
