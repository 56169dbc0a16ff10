use crate::cam::SemanticPercentMap;
use crate::error::Result;
use crate::image::BoxRegion;

/// Area-ratio labels: `(1 - r, r)` with `r` the realized area ratio of the pasted box.
pub fn area_ratio_labels(box_a: &BoxRegion) -> (f64, f64) {
    let r = box_a.realized_ratio;
    (1.0 - r, r)
}

/// Semantic-ratio labels: `rho_a = 1 - mass(spm_a, box_a)`, `rho_b = mass(spm_b, box_b)`,
/// each clamped to `[0, 1]`. The two need not sum to one.
pub fn semantic_ratio_labels(
    spm_a: &SemanticPercentMap,
    box_a: &BoxRegion,
    spm_b: &SemanticPercentMap,
    box_b: &BoxRegion,
) -> Result<(f64, f64)> {
    let mass_a = spm_a.box_mass(box_a)?;
    let mass_b = spm_b.box_mass(box_b)?;
    Ok(((1.0 - mass_a).clamp(0.0, 1.0), mass_b.clamp(0.0, 1.0)))
}
