//! Background extraction: fuse accumulated attention with saliency into an
//! initial label map.
//!
//! For every pixel, `c*` is the present class with the largest attention
//! (smallest id on ties) and `m` its value.
//!
//! | saliency   | `m >= t_bg` | `m < t_bg` |
//! |------------|-------------|------------|
//! | `>= t_sal` | `c*`        | ignore     |
//! | `< t_sal`  | see [`LowSaliencyRule`] | background |

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::maps::{AttentionStack, ClassId, LabelMap, SaliencyMap, BACKGROUND, IGNORE};

pub const DEFAULT_T_BG: f32 = 0.3;
pub const DEFAULT_T_SAL: f32 = 0.5;

/// Label for non-salient pixels whose attention reaches `t_bg`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LowSaliencyRule {
    /// Saliency decides: the pixel is background. Objects outside the
    /// salient region end up as false negatives, which potential object
    /// mining then turns into ignore.
    #[default]
    Background,
    /// Treat the disagreement as a conflict and ignore the pixel.
    Ignore,
}

impl std::str::FromStr for LowSaliencyRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "background" => Ok(LowSaliencyRule::Background),
            "ignore" => Ok(LowSaliencyRule::Ignore),
            other => Err(Error::Parameter(format!(
                "unknown low-saliency rule {other:?} (expected background or ignore)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeConfig {
    pub t_bg: f32,
    pub t_sal: f32,
    pub low_saliency: LowSaliencyRule,
}

impl Default for BeConfig {
    fn default() -> Self {
        BeConfig {
            t_bg: DEFAULT_T_BG,
            t_sal: DEFAULT_T_SAL,
            low_saliency: LowSaliencyRule::default(),
        }
    }
}

pub(crate) fn check_present(present: &BTreeSet<ClassId>, stack: &AttentionStack) -> Result<()> {
    if present.is_empty() {
        return Err(Error::Parameter("no present classes".into()));
    }
    if let Some(&c) = present
        .iter()
        .find(|&&c| c == 0 || c as usize > stack.class_count())
    {
        return Err(Error::Parameter(format!(
            "present class {c} has no attention plane (stack holds {})",
            stack.class_count()
        )));
    }
    Ok(())
}

pub fn background_extract(
    oacam: &AttentionStack,
    saliency: &SaliencyMap,
    present: &BTreeSet<ClassId>,
    config: &BeConfig,
) -> Result<LabelMap> {
    let (h, w) = (oacam.height(), oacam.width());
    if (saliency.height(), saliency.width()) != (h, w) {
        return Err(Error::shape(
            "background extraction",
            format!("{h}x{w}"),
            format!("{}x{}", saliency.height(), saliency.width()),
        ));
    }
    check_present(present, oacam)?;
    for (name, t) in [("t_bg", config.t_bg), ("t_sal", config.t_sal)] {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::Parameter(format!("{name} = {t} outside (0, 1)")));
        }
    }
    let planes: Vec<(ClassId, &[f32])> = present
        .iter()
        .map(|&c| (c, oacam.class_plane(c).unwrap()))
        .collect();
    let labels = saliency
        .values()
        .iter()
        .enumerate()
        .map(|(i, &sal)| {
            let (best, m) = planes
                .iter()
                .fold((planes[0].0, f32::NEG_INFINITY), |(bc, bv), &(c, plane)| {
                    if plane[i] > bv {
                        (c, plane[i])
                    } else {
                        (bc, bv)
                    }
                });
            let attended = m >= config.t_bg;
            match (sal >= config.t_sal, attended) {
                (true, true) => best,
                (true, false) => IGNORE,
                (false, false) => BACKGROUND,
                (false, true) => match config.low_saliency {
                    LowSaliencyRule::Background => BACKGROUND,
                    LowSaliencyRule::Ignore => IGNORE,
                },
            }
        })
        .collect();
    LabelMap::new(h, w, labels)
}
