//! Segmentation metrics: confusion matrix, per-class IoU and mIoU, and
//! pseudo-label error rates against ground truth.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::maps::{is_class, LabelMap, BACKGROUND, IGNORE};

/// `(C + 1) x (C + 1)` pixel counts indexed `[gt][pred]`, over pixels whose
/// ground truth is not ignore. Pixels predicted as ignore are tallied
/// separately in `excluded`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Confusion {
    class_count: u8,
    counts: Vec<u64>,
    pub excluded: u64,
}

impl Confusion {
    pub fn new(class_count: u8) -> Self {
        let n = class_count as usize + 1;
        Confusion {
            class_count,
            counts: vec![0; n * n],
            excluded: 0,
        }
    }

    pub fn class_count(&self) -> u8 {
        self.class_count
    }

    pub fn get(&self, gt: u8, pred: u8) -> u64 {
        self.counts[gt as usize * (self.class_count as usize + 1) + pred as usize]
    }

    /// Sum of all matrix entries (the excluded tally is not part of it).
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds `other` into `self`.
    pub fn merge(&mut self, other: &Confusion) -> Result<()> {
        if other.class_count != self.class_count {
            return Err(Error::shape(
                "confusion merge",
                self.class_count,
                other.class_count,
            ));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.excluded += other.excluded;
        Ok(())
    }
}

pub fn confusion(gt: &LabelMap, pred: &LabelMap, class_count: u8) -> Result<Confusion> {
    pred.check_dims(gt.height(), gt.width(), "confusion")?;
    if class_count == IGNORE {
        return Err(Error::Parameter("class count must be below 255".into()));
    }
    gt.validate(class_count)?;
    pred.validate(class_count)?;
    let mut m = Confusion::new(class_count);
    let n = class_count as usize + 1;
    for (&g, &p) in gt.labels().iter().zip(pred.labels()) {
        if g == IGNORE {
            continue;
        }
        if p == IGNORE {
            m.excluded += 1;
            continue;
        }
        m.counts[g as usize * n + p as usize] += 1;
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Miou {
    /// IoU per class id `0..=C`; `None` where the union is empty.
    pub per_class: Vec<Option<f64>>,
    /// Mean over classes with a non-empty union.
    pub mean: f64,
}

pub fn miou(m: &Confusion) -> Result<Miou> {
    let n = m.class_count as usize + 1;
    let per_class: Vec<Option<f64>> = (0..n)
        .map(|c| {
            let tp = m.counts[c * n + c];
            let gt_total: u64 = (0..n).map(|p| m.counts[c * n + p]).sum();
            let pred_total: u64 = (0..n).map(|g| m.counts[g * n + c]).sum();
            let union = gt_total + pred_total - tp;
            (union > 0).then(|| tp as f64 / union as f64)
        })
        .collect();
    let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::UndefinedMetric);
    }
    let mean = defined.iter().sum::<f64>() / defined.len() as f64;
    Ok(Miou { per_class, mean })
}

/// `class_id,iou` per class with a defined IoU, then `mIoU,<mean>`.
pub fn format_report(result: &Miou) -> String {
    let mut out = String::new();
    for (c, iou) in result.per_class.iter().enumerate() {
        if let Some(iou) = iou {
            let _ = writeln!(out, "{c},{iou:.6}");
        }
    }
    let _ = writeln!(out, "mIoU,{:.6}", result.mean);
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LabelRates {
    /// Ground-truth object pixels labeled background.
    pub fnr: f64,
    /// Ground-truth background pixels labeled with a class.
    pub fpr: f64,
    /// Pixels labeled ignore.
    pub ignore_fraction: f64,
}

/// Rates over pixels whose ground truth is not ignore. An empty denominator
/// yields a rate of 0.
pub fn pseudo_label_rates(gt: &LabelMap, pseudo: &LabelMap) -> Result<LabelRates> {
    pseudo.check_dims(gt.height(), gt.width(), "pseudo-label rates")?;
    let (mut objects, mut missed, mut background, mut spurious, mut valid, mut ignored) =
        (0u64, 0u64, 0u64, 0u64, 0u64, 0u64);
    for (&g, &p) in gt.labels().iter().zip(pseudo.labels()) {
        if g == IGNORE {
            continue;
        }
        valid += 1;
        if p == IGNORE {
            ignored += 1;
        }
        if is_class(g) {
            objects += 1;
            if p == BACKGROUND {
                missed += 1;
            }
        } else {
            background += 1;
            if is_class(p) {
                spurious += 1;
            }
        }
    }
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(LabelRates {
        fnr: ratio(missed, objects),
        fpr: ratio(spurious, background),
        ignore_fraction: ratio(ignored, valid),
    })
}
