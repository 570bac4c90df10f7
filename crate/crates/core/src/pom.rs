//! Potential object mining: background pixels of the initial label that a
//! present class's CAM activates above a class-adaptive threshold become
//! ignore. Mined pixels never receive a class label.
//!
//! The threshold for class `c` is the median CAM value over pixels the
//! initial label assigns to `c`, or, when `c` does not appear in the initial
//! label, the upper quartile of the CAM values strictly above `t_bg`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use crate::error::{Error, Result};
use crate::maps::{AttentionStack, ClassId, LabelMap, BACKGROUND, IGNORE};
use crate::seedgen::check_present;
use crate::stats::{median, top_quartile};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    /// Class appears in the initial label.
    Median,
    /// Class is missing from the initial label.
    TopQuartile,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Median => "median",
            Branch::TopQuartile => "top_quartile",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassThreshold {
    /// `+inf` when the top-quartile branch had nothing above `t_bg`.
    pub value: f32,
    pub branch: Branch,
}

impl ClassThreshold {
    pub fn is_sentinel(&self) -> bool {
        self.value == f32::INFINITY
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PomThresholds {
    pub classes: BTreeMap<ClassId, ClassThreshold>,
}

impl PomThresholds {
    pub fn get(&self, class: ClassId) -> Option<&ClassThreshold> {
        self.classes.get(&class)
    }

    /// `class,branch,T_c` lines.
    pub fn report(&self) -> String {
        let mut out = String::new();
        for (c, t) in &self.classes {
            let _ = writeln!(out, "{c},{},{}", t.branch, t.value);
        }
        out
    }
}

pub fn compute_thresholds(
    cam: &AttentionStack,
    initial: &LabelMap,
    present: &BTreeSet<ClassId>,
    t_bg: f32,
) -> Result<PomThresholds> {
    initial.check_dims(cam.height(), cam.width(), "potential object mining")?;
    check_present(present, cam)?;
    let mut classes = BTreeMap::new();
    for &c in present {
        let plane = cam.class_plane(c).unwrap();
        let labeled: Vec<f32> = initial
            .labels()
            .iter()
            .zip(plane)
            .filter(|(&l, _)| l == c)
            .map(|(_, &v)| v)
            .collect();
        let threshold = if !labeled.is_empty() {
            ClassThreshold {
                value: median(&labeled)?,
                branch: Branch::Median,
            }
        } else {
            let active: Vec<f32> = plane.iter().copied().filter(|&v| v > t_bg).collect();
            match top_quartile(&active) {
                Ok(value) => ClassThreshold {
                    value,
                    branch: Branch::TopQuartile,
                },
                Err(Error::EmptySelection(_)) => {
                    log::warn!("class {c}: no CAM value above t_bg = {t_bg}; nothing will be mined");
                    ClassThreshold {
                        value: f32::INFINITY,
                        branch: Branch::TopQuartile,
                    }
                }
                Err(e) => return Err(e),
            }
        };
        classes.insert(c, threshold);
    }
    Ok(PomThresholds { classes })
}

/// Turns background pixels with `cam_c > T_c` for any thresholded class into
/// ignore. All other pixels are copied unchanged.
pub fn mine(initial: &LabelMap, cam: &AttentionStack, thresholds: &PomThresholds) -> Result<LabelMap> {
    initial.check_dims(cam.height(), cam.width(), "potential object mining")?;
    let planes = thresholds
        .classes
        .iter()
        .filter(|(_, t)| !t.is_sentinel())
        .map(|(&c, t)| {
            cam.class_plane(c)
                .map(|p| (p, t.value))
                .ok_or_else(|| Error::Parameter(format!("threshold for class {c} has no CAM plane")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = initial.clone();
    for (i, l) in out.labels_mut().iter_mut().enumerate() {
        if *l == BACKGROUND && planes.iter().any(|(p, t)| p[i] > *t) {
            *l = IGNORE;
        }
    }
    Ok(out)
}
