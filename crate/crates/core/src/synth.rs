//! Seeded synthetic scenes with planted salient and non-salient objects.
//!
//! Each scene provides ground truth, a saliency map that only covers the
//! salient objects, a simulated CAM that also responds (more weakly) to the
//! non-salient objects, a spatially enlarged attention proxy, and a
//! segmentation prediction that only found the salient objects. Every
//! output is a deterministic function of the scene spec.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grunit::{FeatureGrid, LabeledGrid, Mat};
use crate::io::{self, manifest};
use crate::maps::{AttentionStack, ClassId, ImageRecord, LabelMap, SaliencyMap, MAX_CLASS};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Rect {
        top: usize,
        left: usize,
        height: usize,
        width: usize,
    },
    Disc {
        cy: usize,
        cx: usize,
        radius: usize,
    },
}

impl Shape {
    pub fn contains(&self, y: usize, x: usize) -> bool {
        match *self {
            Shape::Rect {
                top,
                left,
                height,
                width,
            } => (top..top + height).contains(&y) && (left..left + width).contains(&x),
            Shape::Disc { cy, cx, radius } => {
                let dy = y as i64 - cy as i64;
                let dx = x as i64 - cx as i64;
                dy * dy + dx * dx <= (radius * radius) as i64
            }
        }
    }

    fn within(&self, height: usize, width: usize) -> bool {
        match *self {
            Shape::Rect {
                top,
                left,
                height: h,
                width: w,
            } => h > 0 && w > 0 && top + h <= height && left + w <= width,
            Shape::Disc { cy, cx, radius } => {
                cy >= radius && cx >= radius && cy + radius < height && cx + radius < width
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlantedObject {
    pub class: ClassId,
    pub shape: Shape,
    pub salient: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    pub class_count: u8,
    pub objects: Vec<PlantedObject>,
    pub seed: u64,
    /// Activation level of salient objects in the CAM.
    pub cam_peak: f32,
    /// Activation level of non-salient objects in the CAM.
    pub cam_offsite: f32,
    /// Half-width of the uniform noise added to every CAM value.
    pub noise_amplitude: f32,
    /// Box-filter radius used to smooth the saliency indicator.
    pub saliency_blur: usize,
    /// Max-filter radius that turns the CAM into the accumulated-attention
    /// proxy.
    pub attention_growth: usize,
}

impl SceneSpec {
    pub fn new(height: usize, width: usize, class_count: u8, objects: Vec<PlantedObject>, seed: u64) -> Self {
        SceneSpec {
            height,
            width,
            class_count,
            objects,
            seed,
            cam_peak: 0.9,
            cam_offsite: 0.45,
            noise_amplitude: 0.05,
            saliency_blur: 2,
            attention_growth: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Parameter(m));
        if self.height == 0 || self.width == 0 {
            return fail("scene size must be nonzero".into());
        }
        if self.class_count == 0 || self.class_count > MAX_CLASS {
            return fail(format!("class count {} outside 1..={MAX_CLASS}", self.class_count));
        }
        if !self.objects.iter().any(|o| o.salient) {
            return fail("scene needs at least one salient object".into());
        }
        for o in &self.objects {
            if o.class == 0 || o.class > self.class_count {
                return fail(format!("object class {} outside 1..={}", o.class, self.class_count));
            }
            if !o.shape.within(self.height, self.width) {
                return fail(format!("object {:?} outside the image", o.shape));
            }
        }
        if !(self.cam_peak > 0.0 && self.cam_peak <= 1.0) {
            return fail(format!("cam_peak {} outside (0, 1]", self.cam_peak));
        }
        if !(self.cam_offsite >= 0.0 && self.cam_offsite < self.cam_peak) {
            return fail(format!(
                "cam_offsite {} must lie in [0, cam_peak)",
                self.cam_offsite
            ));
        }
        if !(self.noise_amplitude >= 0.0 && self.noise_amplitude.is_finite()) {
            return fail("noise amplitude must be finite and non-negative".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub gt: LabelMap,
    pub saliency: SaliencyMap,
    pub cam: AttentionStack,
    pub oacam_proxy: AttentionStack,
    pub prediction: LabelMap,
    pub record: ImageRecord,
}

/// Mean over the clipped `(2r+1)^2` window.
fn box_blur(values: &[f32], h: usize, w: usize, r: usize) -> Vec<f32> {
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(r), (y + r).min(h - 1));
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(r), (x + r).min(w - 1));
            let mut sum = 0.0f32;
            for yy in y0..=y1 {
                sum += values[yy * w + x0..=yy * w + x1].iter().sum::<f32>();
            }
            out[y * w + x] = sum / ((y1 - y0 + 1) * (x1 - x0 + 1)) as f32;
        }
    }
    out
}

/// Maximum over the clipped `(2r+1)^2` window, separably.
fn max_filter(values: &[f32], h: usize, w: usize, r: usize) -> Vec<f32> {
    let mut rows = vec![0.0f32; h * w];
    for y in 0..h {
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(r), (x + r).min(w - 1));
            rows[y * w + x] = values[y * w + x0..=y * w + x1]
                .iter()
                .copied()
                .fold(0.0, f32::max);
        }
    }
    let mut out = vec![0.0f32; h * w];
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(r), (y + r).min(h - 1));
        for x in 0..w {
            out[y * w + x] = (y0..=y1).map(|yy| rows[yy * w + x]).fold(0.0, f32::max);
        }
    }
    out
}

pub fn generate(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let (h, w) = (spec.height, spec.width);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut gt = LabelMap::filled(h, w, 0);
    let mut prediction = LabelMap::filled(h, w, 0);
    let mut salient = vec![0.0f32; h * w];
    let mut level = vec![0.0f32; spec.class_count as usize * h * w];
    for o in &spec.objects {
        let act = if o.salient { spec.cam_peak } else { spec.cam_offsite };
        let plane = (o.class as usize - 1) * h * w;
        for y in 0..h {
            for x in 0..w {
                if o.shape.contains(y, x) {
                    let i = y * w + x;
                    gt.labels_mut()[i] = o.class;
                    if o.salient {
                        prediction.labels_mut()[i] = o.class;
                        salient[i] = 1.0;
                    }
                    level[plane + i] = level[plane + i].max(act);
                }
            }
        }
    }

    // Quantised so the in-memory map equals what the PGM file holds.
    let smoothed = box_blur(&salient, h, w, spec.saliency_blur);
    let bytes: Vec<u8> = smoothed.iter().map(|v| (v * 255.0).round() as u8).collect();
    let saliency = SaliencyMap::from_bytes(h, w, &bytes)?;

    let a = spec.noise_amplitude;
    let cam_values: Vec<f32> = level
        .iter()
        .map(|&v| {
            let noise = if a > 0.0 { rng.gen_range(-a..=a) } else { 0.0 };
            (v + noise).clamp(0.0, 1.0)
        })
        .collect();
    let cam = AttentionStack::new(spec.class_count as usize, h, w, cam_values)?;

    let mut proxy = Vec::with_capacity(cam.values().len());
    for c in 0..cam.class_count() {
        proxy.extend(max_filter(cam.plane(c), h, w, spec.attention_growth));
    }
    let oacam_proxy = AttentionStack::new(spec.class_count as usize, h, w, proxy)?;

    let classes: BTreeSet<ClassId> = spec.objects.iter().map(|o| o.class).collect();
    let record = ImageRecord::new(format!("scene_{}", spec.seed), classes)?;
    Ok(Scene {
        gt,
        saliency,
        cam,
        oacam_proxy,
        prediction,
        record,
    })
}

/// Corpus-level generation settings.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusOptions {
    /// Square image side in pixels (at least 32).
    pub size: usize,
    pub class_count: u8,
    pub cam_peak: f32,
    pub cam_offsite: f32,
    pub noise_amplitude: f32,
    /// When set, also emit `<id>.feat.fmap` grids with this many channels.
    pub feature_dim: Option<usize>,
    /// Downsampling factor between image and feature grid.
    pub feature_stride: usize,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        CorpusOptions {
            size: 64,
            class_count: 20,
            cam_peak: 0.9,
            cam_offsite: 0.45,
            noise_amplitude: 0.05,
            feature_dim: None,
            feature_stride: 8,
        }
    }
}

pub fn image_id(index: usize) -> String {
    format!("img_{index:04}")
}

/// `floor(count * mix)` complex images, spread evenly over the indices.
pub fn is_complex_index(index: usize, mix: f64) -> bool {
    ((index + 1) as f64 * mix).floor() > (index as f64 * mix).floor()
}

fn image_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn random_shape(rng: &mut ChaCha8Rng, top: usize, left: usize, extent_h: usize, extent_w: usize, min: usize) -> Shape {
    if rng.gen_bool(0.5) {
        let max_r = (extent_h.min(extent_w) - 1) / 2;
        let radius = rng.gen_range((min / 2).min(max_r)..=max_r);
        let cy = rng.gen_range(top + radius..top + extent_h - radius);
        let cx = rng.gen_range(left + radius..left + extent_w - radius);
        Shape::Disc { cy, cx, radius }
    } else {
        let height = rng.gen_range(min.min(extent_h)..=extent_h);
        let width = rng.gen_range(min.min(extent_w)..=extent_w);
        Shape::Rect {
            top: rng.gen_range(top..=top + extent_h - height),
            left: rng.gen_range(left..=left + extent_w - width),
            height,
            width,
        }
    }
}

/// Scene layout for image `index` of a corpus. Salient objects sit in the
/// central half of the image; non-salient objects sit in corner cells far
/// enough from the centre that the smoothed saliency never reaches them,
/// and their classes differ from every salient class of the image.
pub fn corpus_scene(index: usize, complex: bool, seed: u64, opts: &CorpusOptions) -> Result<SceneSpec> {
    let s = opts.size;
    if s < 32 {
        return Err(Error::Parameter(format!("corpus image size {s} below 32")));
    }
    if opts.class_count < 2 {
        return Err(Error::Parameter("corpus needs at least two classes".into()));
    }
    let mut rng = image_rng(seed, index);
    let mut classes: Vec<ClassId> = (1..=opts.class_count).collect();
    // Partial Fisher-Yates: the first four entries are distinct random classes.
    for i in 0..4.min(classes.len()) {
        let j = rng.gen_range(i..classes.len());
        classes.swap(i, j);
    }
    let blur = 2;
    let lo = s / 4;
    let central = s / 2;
    let mut objects = Vec::new();
    if !complex {
        let n = rng.gen_range(1..=2usize);
        let cell = central / n;
        for k in 0..n {
            let shape = random_shape(&mut rng, lo, lo + k * cell, central, cell - 1, central / 4);
            objects.push(PlantedObject {
                class: classes[0],
                shape,
                salient: true,
            });
        }
    } else {
        let salient_classes = if opts.class_count >= 4 { rng.gen_range(1..=2usize) } else { 1 };
        let n_salient = salient_classes.max(rng.gen_range(1..=2usize));
        let cell = central / n_salient;
        for k in 0..n_salient {
            let shape = random_shape(&mut rng, lo, lo + k * cell, central, cell - 1, central / 4);
            objects.push(PlantedObject {
                class: classes[k.min(salient_classes - 1)],
                shape,
                salient: true,
            });
        }
        // Corner cells end two blur radii short of the central region.
        let corner = lo - 2 * blur - 1;
        let n_hidden = rng.gen_range(1..=2usize);
        let first_corner = rng.gen_range(0..4usize);
        let hidden_classes = &classes[salient_classes..];
        for k in 0..n_hidden {
            let which = (first_corner + 2 * k) % 4;
            let top = if which < 2 { 0 } else { s - corner };
            let left = if which % 2 == 0 { 0 } else { s - corner };
            let shape = random_shape(&mut rng, top, left, corner, corner, corner / 2);
            let class = hidden_classes[rng.gen_range(0..hidden_classes.len().min(2))];
            objects.push(PlantedObject {
                class,
                shape,
                salient: false,
            });
        }
    }
    let mut spec = SceneSpec::new(s, s, opts.class_count, objects, rng.gen());
    spec.cam_peak = opts.cam_peak;
    spec.cam_offsite = opts.cam_offsite;
    spec.noise_amplitude = opts.noise_amplitude;
    spec.saliency_blur = blur;
    Ok(spec)
}

/// Scene specs for a whole corpus, in manifest order.
pub fn corpus_specs(count: usize, mix: f64, seed: u64, opts: &CorpusOptions) -> Result<Vec<(String, SceneSpec)>> {
    if count == 0 {
        return Err(Error::Parameter("corpus count must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&mix) {
        return Err(Error::Parameter(format!("complex mix {mix} outside [0, 1]")));
    }
    (0..count)
        .map(|i| Ok((image_id(i), corpus_scene(i, is_complex_index(i, mix), seed, opts)?)))
        .collect()
}

/// Generates one corpus scene and relabels its record with `id`.
pub fn generate_named(id: &str, spec: &SceneSpec) -> Result<Scene> {
    let mut scene = generate(spec)?;
    scene.record = ImageRecord::new(id, scene.record.present().iter().copied())?;
    Ok(scene)
}

/// Downsampled class-occupancy features: channel `(c - 1) % dim` of a cell
/// holds the fraction of its pixels labeled `c`, plus uniform noise of
/// half-width 0.05.
pub fn features_from_labels(gt: &LabelMap, stride: usize, dim: usize, rng: &mut impl Rng) -> Result<FeatureGrid> {
    if stride == 0 || dim == 0 {
        return Err(Error::Parameter("feature stride and dim must be nonzero".into()));
    }
    let (gh, gw) = (gt.height() / stride, gt.width() / stride);
    if gh == 0 || gw == 0 {
        return Err(Error::Parameter("feature stride larger than the image".into()));
    }
    let mut m = Mat::zeros(gh * gw, dim);
    let area = (stride * stride) as f64;
    for gy in 0..gh {
        for gx in 0..gw {
            let cell = gy * gw + gx;
            for y in gy * stride..(gy + 1) * stride {
                for x in gx * stride..(gx + 1) * stride {
                    let l = gt.get(y, x);
                    if crate::maps::is_class(l) {
                        m[(cell, (l as usize - 1) % dim)] += 1.0 / area;
                    }
                }
            }
            for k in 0..dim {
                m[(cell, k)] += rng.gen_range(-0.05..=0.05);
            }
        }
    }
    FeatureGrid::new(gh, gw, m)
}

/// Writes every per-image file plus `corpus.manifest` into `dir`.
pub fn make_corpus(dir: &Path, count: usize, mix: f64, seed: u64, opts: &CorpusOptions) -> Result<Vec<ImageRecord>> {
    let specs = corpus_specs(count, mix, seed, opts)?;
    fs::create_dir_all(dir).map_err(|e| Error::io_at(dir, e))?;
    let records = specs
        .par_iter()
        .enumerate()
        .map(|(i, (id, spec))| {
            let scene = generate_named(id, spec)?;
            let path = |suffix: &str| dir.join(format!("{id}.{suffix}"));
            io::save_label_map(&scene.gt, path("gt.pgm"))?;
            io::save_saliency(&scene.saliency, path("sal.pgm"))?;
            io::save_fmap(&scene.cam, path("cam.fmap"))?;
            io::save_fmap(&scene.oacam_proxy, path("oacam.fmap"))?;
            io::save_label_map(&scene.prediction, path("pred.pgm"))?;
            if let Some(dim) = opts.feature_dim {
                let mut rng = image_rng(seed ^ 0x5eed_f00d, i);
                let grid = features_from_labels(&scene.gt, opts.feature_stride, dim, &mut rng)?;
                io::save_features(&grid, path("feat.fmap"))?;
            }
            Ok(scene.record)
        })
        .collect::<Result<Vec<_>>>()?;
    manifest::save(&records, dir.join(manifest::FILE_NAME))?;
    Ok(records)
}

/// Linearly separable two-class toy set on a 4x4 grid with 4 channels.
///
/// Each sample holds class 1, class 2 or both. A present class `c` adds 1.0
/// to channel `c - 1` at four random locations; every entry also gets
/// uniform noise of half-width 0.1.
pub fn separable_toy_set(count: usize, seed: u64) -> Vec<LabeledGrid> {
    const SIDE: usize = 4;
    const DIM: usize = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let classes: BTreeSet<ClassId> = match rng.gen_range(0..3) {
                0 => [1].into(),
                1 => [2].into(),
                _ => [1, 2].into(),
            };
            let mut m = Mat::from_fn(SIDE * SIDE, DIM, |_, _| rng.gen_range(-0.1..=0.1));
            for &c in &classes {
                for _ in 0..4 {
                    let l = rng.gen_range(0..SIDE * SIDE);
                    m[(l, c as usize - 1)] += 1.0;
                }
            }
            LabeledGrid {
                grid: FeatureGrid::new(SIDE, SIDE, m).unwrap(),
                classes,
            }
        })
        .collect()
}
