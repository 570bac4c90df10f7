//! Non-salient region masking.
//!
//! Images with a single category pass through unchanged. For images with
//! two or more categories, the segmentation prediction is expanded with the
//! pseudo label's objects, the resulting object mask is dilated, and every
//! pixel outside the dilated mask becomes ignore. The dilation keeps a ring
//! of background around each object.

use crate::error::{Error, Result};
use crate::maps::{is_class, ImageRecord, LabelMap, Mask, IGNORE};
use crate::morphology::dilate;

pub const DEFAULT_DILATION_R: usize = 30;

/// Partitions records into single-category and multi-category images,
/// preserving order.
pub fn split_simple_complex(records: &[ImageRecord]) -> (Vec<ImageRecord>, Vec<ImageRecord>) {
    records.iter().cloned().partition(|r| !r.is_complex())
}

/// Per-pixel union of foregrounds; the prediction wins where both carry a
/// class.
pub fn expand_prediction(prediction: &LabelMap, pseudo: &LabelMap) -> Result<LabelMap> {
    pseudo.check_dims(prediction.height(), prediction.width(), "prediction expansion")?;
    let labels = prediction
        .labels()
        .iter()
        .zip(pseudo.labels())
        .map(|(&p, &q)| if !is_class(p) && is_class(q) { q } else { p })
        .collect();
    LabelMap::new(prediction.height(), prediction.width(), labels)
}

/// Set exactly where the label is a foreground class.
pub fn object_mask(expanded: &LabelMap) -> Mask {
    let bits = expanded.labels().iter().map(|&l| is_class(l)).collect();
    Mask::new(expanded.height(), expanded.width(), bits).unwrap()
}

/// Keeps labels inside `mask_dilated` and ignores everything outside it.
/// The mask must cover every object pixel of `expanded`.
pub fn mask_label(expanded: &LabelMap, mask_dilated: &Mask) -> Result<LabelMap> {
    if (mask_dilated.height(), mask_dilated.width()) != (expanded.height(), expanded.width()) {
        return Err(Error::shape(
            "label masking",
            format!("{}x{}", expanded.height(), expanded.width()),
            format!("{}x{}", mask_dilated.height(), mask_dilated.width()),
        ));
    }
    if !object_mask(expanded).is_subset_of(mask_dilated) {
        return Err(Error::Contract(
            "dilated mask does not cover every object pixel".into(),
        ));
    }
    let labels = expanded
        .labels()
        .iter()
        .zip(mask_dilated.bits())
        .map(|(&l, &keep)| if keep { l } else { IGNORE })
        .collect();
    LabelMap::new(expanded.height(), expanded.width(), labels)
}

/// Masking applied regardless of how many categories the image holds.
pub fn mask_with_prediction(prediction: &LabelMap, pseudo: &LabelMap, r: usize) -> Result<LabelMap> {
    let expanded = expand_prediction(prediction, pseudo)?;
    let mask = dilate(&object_mask(&expanded), r)?;
    mask_label(&expanded, &mask)
}

/// Masked pseudo label for complex images; simple images return `pseudo`
/// unchanged.
pub fn nsrm_apply(prediction: &LabelMap, pseudo: &LabelMap, record: &ImageRecord, r: usize) -> Result<LabelMap> {
    if record.is_complex() {
        mask_with_prediction(prediction, pseudo, r)
    } else {
        pseudo.check_dims(prediction.height(), prediction.width(), "prediction expansion")?;
        Ok(pseudo.clone())
    }
}
