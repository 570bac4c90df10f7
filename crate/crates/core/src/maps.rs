//! Map types shared by every pipeline stage.
//!
//! Class ids are `u8`: `0` is background, `1..=C` are foreground classes and
//! [`IGNORE`] (255) marks pixels excluded from training and from the
//! ground-truth side of metrics. Attention planes are indexed by class id,
//! so plane `c - 1` holds class `c`.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

pub type ClassId = u8;

pub const BACKGROUND: ClassId = 0;
pub const IGNORE: ClassId = 255;
/// Largest usable foreground class id; 255 is reserved for ignore.
pub const MAX_CLASS: ClassId = 254;

#[inline]
pub fn is_class(label: ClassId) -> bool {
    label != BACKGROUND && label != IGNORE
}

/// Per-class non-negative attention maps, channel-major, each channel
/// row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionStack {
    class_count: usize,
    height: usize,
    width: usize,
    values: Vec<f32>,
    normalized: bool,
}

impl AttentionStack {
    pub fn new(class_count: usize, height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        if class_count == 0 || height == 0 || width == 0 {
            return Err(Error::Parameter(format!(
                "attention stack dimensions must be nonzero, got {class_count}x{height}x{width}"
            )));
        }
        let expected = class_count * height * width;
        if values.len() != expected {
            return Err(Error::shape("attention stack", expected, values.len()));
        }
        if let Some(bad) = values.iter().find(|v| v.is_nan() || **v < 0.0) {
            return Err(Error::Parameter(format!(
                "attention values must be non-negative, found {bad}"
            )));
        }
        Ok(AttentionStack {
            class_count,
            height,
            width,
            values,
            normalized: false,
        })
    }

    pub fn zeros(class_count: usize, height: usize, width: usize) -> Result<Self> {
        Self::new(
            class_count,
            height,
            width,
            vec![0.0; class_count * height * width],
        )
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.class_count, self.height, self.width)
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub(crate) fn mark_normalized(mut self) -> Self {
        self.normalized = true;
        self
    }

    /// Plane by zero-based index.
    pub fn plane(&self, index: usize) -> &[f32] {
        let n = self.pixel_count();
        &self.values[index * n..(index + 1) * n]
    }

    pub(crate) fn plane_mut(&mut self, index: usize) -> &mut [f32] {
        let n = self.pixel_count();
        &mut self.values[index * n..(index + 1) * n]
    }

    /// Plane for a foreground class id, or `None` if the id is outside
    /// `1..=class_count`.
    pub fn class_plane(&self, class: ClassId) -> Option<&[f32]> {
        let c = class as usize;
        (c >= 1 && c <= self.class_count).then(|| self.plane(c - 1))
    }

    /// Min-max scales every plane independently into `[0, 1]`. A constant
    /// plane becomes all zero.
    pub fn normalize(&self) -> AttentionStack {
        let mut out = self.clone();
        for c in 0..self.class_count {
            let plane = out.plane_mut(c);
            let (lo, hi) = plane
                .iter()
                .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            if hi > lo {
                let (lo, range) = (lo as f64, hi as f64 - lo as f64);
                for v in plane.iter_mut() {
                    *v = ((*v as f64 - lo) / range) as f32;
                }
            } else {
                plane.fill(0.0);
            }
        }
        out.normalized = true;
        out
    }

    /// Nearest-neighbour resampling to `height x width`.
    pub fn resize_nearest(&self, height: usize, width: usize) -> Result<AttentionStack> {
        if height == 0 || width == 0 {
            return Err(Error::Parameter("resize target must be nonzero".into()));
        }
        let mut values = Vec::with_capacity(self.class_count * height * width);
        for c in 0..self.class_count {
            let plane = self.plane(c);
            for y in 0..height {
                let sy = y * self.height / height;
                for x in 0..width {
                    let sx = x * self.width / width;
                    values.push(plane[sy * self.width + sx]);
                }
            }
        }
        let mut out = AttentionStack::new(self.class_count, height, width, values)?;
        out.normalized = self.normalized;
        Ok(out)
    }

    pub(crate) fn check_same_dims(&self, other: &AttentionStack, context: &'static str) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::shape(
                context,
                format!("{:?}", self.dims()),
                format!("{:?}", other.dims()),
            ));
        }
        Ok(())
    }
}

/// Per-pixel class labels.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LabelMap {
    height: usize,
    width: usize,
    labels: Vec<ClassId>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, labels: Vec<ClassId>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::shape("label map", height * width, labels.len()));
        }
        Ok(LabelMap {
            height,
            width,
            labels,
        })
    }

    pub fn filled(height: usize, width: usize, label: ClassId) -> Self {
        LabelMap {
            height,
            width,
            labels: vec![label; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [ClassId] {
        &mut self.labels
    }

    pub fn get(&self, y: usize, x: usize) -> ClassId {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, y: usize, x: usize, label: ClassId) {
        self.labels[y * self.width + x] = label;
    }

    /// Checks every value is background, ignore, or a class id `<= class_count`.
    pub fn validate(&self, class_count: u8) -> Result<()> {
        match self
            .labels
            .iter()
            .find(|&&l| l != IGNORE && l > class_count)
        {
            Some(&label) => Err(Error::InvalidLabel { label, class_count }),
            None => Ok(()),
        }
    }

    /// Number of pixels carrying `label`.
    pub fn count(&self, label: ClassId) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Pixel counts for every label value, indexed by the label byte.
    pub fn histogram(&self) -> [usize; 256] {
        let mut h = [0usize; 256];
        for &l in &self.labels {
            h[l as usize] += 1;
        }
        h
    }

    pub(crate) fn check_dims(&self, height: usize, width: usize, context: &'static str) -> Result<()> {
        if (self.height, self.width) != (height, width) {
            return Err(Error::shape(
                context,
                format!("{height}x{width}"),
                format!("{}x{}", self.height, self.width),
            ));
        }
        Ok(())
    }
}

/// Per-pixel saliency in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyMap {
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl SaliencyMap {
    pub fn new(height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::shape("saliency map", height * width, values.len()));
        }
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Parameter(format!(
                "saliency values must lie in [0, 1], found {bad}"
            )));
        }
        Ok(SaliencyMap {
            height,
            width,
            values,
        })
    }

    /// `byte / 255` per pixel.
    pub fn from_bytes(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(
            height,
            width,
            bytes.iter().map(|&b| b as f32 / 255.0).collect(),
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.values
            .iter()
            .map(|&v| (v * 255.0).round() as u8)
            .collect()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

/// Binary image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::shape("mask", height * width, bits.len()));
        }
        Ok(Mask {
            height,
            width,
            bits,
        })
    }

    pub fn empty(height: usize, width: usize) -> Self {
        Mask {
            height,
            width,
            bits: vec![false; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, y: usize, x: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// True when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.bits.len() == other.bits.len()
            && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }
}

/// Image identifier plus its image-level label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageRecord {
    image_id: String,
    present: BTreeSet<ClassId>,
}

impl ImageRecord {
    pub fn new(image_id: impl Into<String>, classes: impl IntoIterator<Item = ClassId>) -> Result<Self> {
        let image_id = image_id.into();
        if image_id.is_empty() || image_id.contains(';') || image_id.contains(char::is_whitespace) {
            return Err(Error::Parameter(format!("invalid image id {image_id:?}")));
        }
        let mut present = BTreeSet::new();
        for c in classes {
            if !is_class(c) {
                return Err(Error::Parameter(format!(
                    "image {image_id}: class id {c} outside 1..={MAX_CLASS}"
                )));
            }
            if !present.insert(c) {
                return Err(Error::Parameter(format!(
                    "image {image_id}: duplicate class id {c}"
                )));
            }
        }
        if present.is_empty() {
            return Err(Error::Parameter(format!(
                "image {image_id}: no present classes"
            )));
        }
        Ok(ImageRecord { image_id, present })
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn present(&self) -> &BTreeSet<ClassId> {
        &self.present
    }

    pub fn contains(&self, class: ClassId) -> bool {
        self.present.contains(&class)
    }

    /// Two or more present categories.
    pub fn is_complex(&self) -> bool {
        self.present.len() >= 2
    }
}

impl fmt::Display for ImageRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{};", self.image_id)?;
        for (i, c) in self.present.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}
