//! Seeded loops over the core invariants. Each returns a short summary on
//! success and a description of the first violation otherwise.

use ndarray::Array2;
use rand::Rng;
use snapmix_core::augment::{area_ratio_labels, cutmix, mixup, semantic_ratio_labels, snapmix};
use snapmix_core::cam::{make_spm, spm_for};
use snapmix_core::rng::from_seed;
use snapmix_core::{Architecture, BoxRegion, Classifier, ModelConfig, SemanticPercentMap};

use super::oracle::{inside, rand_box, rand_image};

pub type Outcome = Result<String, String>;

pub fn spm_normalized_for_random_models(seed: u64, n: usize) -> Outcome {
    let mut rng = from_seed(seed);
    let (mut done, mut worst) = (0, 0.0f64);
    while done < n {
        let blocks = rng.random_range(1..4);
        let side = rng.random_range(4..16);
        let arch = Architecture {
            input_channels: 3,
            input_height: side,
            input_width: side,
            num_classes: rng.random_range(2..6),
            model: ModelConfig {
                channels: (0..blocks).map(|_| rng.random_range(1..6)).collect(),
                strides: (0..blocks).map(|_| rng.random_range(1..3)).collect(),
                ..ModelConfig::default()
            },
        };
        if arch.validate().is_err() {
            continue;
        }
        done += 1;
        let classes = arch.num_classes;
        let model = Classifier::new(arch, &mut rng).map_err(|e| e.to_string())?;
        let img = rand_image(&mut rng, 3, side, side);
        let spm = spm_for(&model, &img, rng.random_range(0..classes)).map_err(|e| e.to_string())?;
        let dense = spm.to_dense();
        if dense.dim() != (side, side) || dense.iter().any(|&v| v < 0.0) {
            return Err(format!("bad SPM for a {side}x{side} image"));
        }
        worst = worst.max((dense.sum() - 1.0).abs());
    }
    if worst > 1e-6 {
        return Err(format!("|sum - 1| reached {worst:e}"));
    }
    Ok(format!("{n} models, max |sum - 1| = {worst:.1e}"))
}

/// Every box, empty ones included, on a `side x side` image.
pub fn uniform_reduces_to_area_exhaustively(side: usize) -> Outcome {
    let spm = SemanticPercentMap::uniform(side, side).unwrap();
    let reference = BoxRegion::new(0, 0, side.div_ceil(2), side.div_ceil(2), side, side).unwrap();
    let (mut boxes, mut worst) = (0usize, 0.0f64);
    for x0 in 0..=side {
        for x1 in x0..=side {
            for y0 in 0..=side {
                for y1 in y0..=side {
                    let bx = BoxRegion::new(x0, y0, x1, y1, side, side).unwrap();
                    let (ra, _) = semantic_ratio_labels(&spm, &bx, &spm, &reference).unwrap();
                    let (_, rb) = semantic_ratio_labels(&spm, &reference, &spm, &bx).unwrap();
                    let (area_a, area_b) = area_ratio_labels(&bx);
                    worst = worst.max((ra - area_a).abs()).max((rb - area_b).abs());
                    boxes += 1;
                }
            }
        }
    }
    if worst > 1e-9 {
        return Err(format!("deviation {worst:e} from area labels"));
    }
    Ok(format!(
        "{boxes} boxes on {side}x{side}, max deviation {worst:.1e}"
    ))
}

pub fn mixup_cutmix_complementary(seed: u64, n: usize) -> Outcome {
    let mut rng = from_seed(seed);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let (h, w) = (rng.random_range(1..16), rng.random_range(1..16));
        let (a, b) = (rand_image(&mut rng, 3, h, w), rand_image(&mut rng, 3, h, w));
        let m = mixup(&a, 0, &b, 1, rng.random()).map_err(|e| e.to_string())?;
        let c = cutmix(&a, 0, &b, 1, &rand_box(&mut rng, w, h)).map_err(|e| e.to_string())?;
        worst = worst
            .max((m.rho_a + m.rho_b - 1.0).abs())
            .max((c.rho_a + c.rho_b - 1.0).abs());
    }
    if worst > 1e-9 {
        return Err(format!("|rho_a + rho_b - 1| reached {worst:e}"));
    }
    Ok(format!(
        "{n} mixup + {n} cutmix samples, max |sum - 1| = {worst:.1e}"
    ))
}

fn random_spm(rng: &mut impl Rng, h: usize, w: usize) -> SemanticPercentMap {
    make_spm(Array2::from_shape_fn((h, w), |_| rng.random::<f64>())).unwrap()
}

pub fn snapmix_paste_is_local(seed: u64, n: usize) -> Outcome {
    let mut rng = from_seed(seed);
    for i in 0..n {
        let (h, w) = (rng.random_range(1..16), rng.random_range(1..16));
        let (a, b) = (rand_image(&mut rng, 3, h, w), rand_image(&mut rng, 3, h, w));
        let (box_a, box_b) = (rand_box(&mut rng, w, h), rand_box(&mut rng, w, h));
        let r = snapmix(&a, 0, &box_a, &b, 1, &box_b, (0.5, 0.5)).map_err(|e| e.to_string())?;
        for c in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    let v = r.image.pixels()[[c, y, x]];
                    if !inside(&box_a, y, x) && v.to_bits() != a.pixels()[[c, y, x]].to_bits() {
                        return Err(format!("instance {i}: pixel ({c},{y},{x}) outside box_a changed"));
                    }
                }
            }
        }
    }
    Ok(format!("{n} instances, outside-box pixels bitwise equal"))
}

pub fn snapmix_rho_in_unit_interval(seed: u64, n: usize) -> Outcome {
    let mut rng = from_seed(seed);
    for i in 0..n {
        let (h, w) = (rng.random_range(1..16), rng.random_range(1..16));
        let (a, b) = (rand_image(&mut rng, 3, h, w), rand_image(&mut rng, 3, h, w));
        let (box_a, box_b) = (rand_box(&mut rng, w, h), rand_box(&mut rng, w, h));
        let (spm_a, spm_b) = (random_spm(&mut rng, h, w), random_spm(&mut rng, h, w));
        let rho = semantic_ratio_labels(&spm_a, &box_a, &spm_b, &box_b).map_err(|e| e.to_string())?;
        let r = snapmix(&a, 0, &box_a, &b, 1, &box_b, rho).map_err(|e| e.to_string())?;
        if !(0.0..=1.0).contains(&r.rho_a) || !(0.0..=1.0).contains(&r.rho_b) {
            return Err(format!("instance {i}: rho ({}, {})", r.rho_a, r.rho_b));
        }
    }
    let sum = background_paste_rho_sum();
    if sum >= 1.0 {
        return Err(format!("background paste gave rho_a + rho_b = {sum}"));
    }
    Ok(format!(
        "{n} instances in [0, 1]; background paste rho_a + rho_b = {sum}"
    ))
}

/// `a`'s object fills the box that gets covered and the patch comes from a
/// corner of `b` holding none of `b`'s evidence.
pub fn background_paste_rho_sum() -> f64 {
    let (w, h) = (8, 8);
    let mut cam_a = Array2::zeros((h, w));
    let mut cam_b = Array2::zeros((h, w));
    for y in 0..4 {
        for x in 0..4 {
            cam_a[[y, x]] = 1.0;
            cam_b[[y + 4, x + 4]] = 1.0;
        }
    }
    let (spm_a, spm_b) = (make_spm(cam_a).unwrap(), make_spm(cam_b).unwrap());
    let box_a = BoxRegion::new(0, 0, 4, 4, w, h).unwrap();
    let box_b = BoxRegion::new(0, 0, 3, 3, w, h).unwrap();
    let rho = semantic_ratio_labels(&spm_a, &box_a, &spm_b, &box_b).unwrap();
    let mut rng = from_seed(0);
    let (a, b) = (rand_image(&mut rng, 3, h, w), rand_image(&mut rng, 3, h, w));
    let r = snapmix(&a, 0, &box_a, &b, 1, &box_b, rho).unwrap();
    r.rho_a + r.rho_b
}
