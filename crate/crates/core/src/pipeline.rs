//! Per-image stage chain (background extraction, potential object mining,
//! non-salient region masking) and the batch driver over a corpus
//! directory.
//!
//! Images are processed in parallel but results are merged in manifest
//! order, so every report is independent of the worker count.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{confusion, format_report, miou, pseudo_label_rates, Confusion, LabelRates};
use crate::io::{self, manifest};
use crate::maps::{AttentionStack, ImageRecord, LabelMap, SaliencyMap, MAX_CLASS};
use crate::nsrm::{nsrm_apply, DEFAULT_DILATION_R};
use crate::pom::{compute_thresholds, mine, PomThresholds};
use crate::seedgen::{background_extract, BeConfig};

pub const REPORT_FILE: &str = "report.txt";
pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub be: BeConfig,
    pub dilation_r: usize,
    /// Worker threads; `None` uses every available core.
    pub jobs: Option<usize>,
    /// Also write `<id>.thresholds.txt`.
    pub write_thresholds: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            be: BeConfig::default(),
            dilation_r: DEFAULT_DILATION_R,
            jobs: None,
            write_thresholds: false,
        }
    }
}

/// Inputs for one image. Attention maps need not be normalized yet.
#[derive(Clone, Debug)]
pub struct ImageInputs {
    pub record: ImageRecord,
    pub saliency: SaliencyMap,
    pub cam: AttentionStack,
    pub oacam: AttentionStack,
    pub prediction: LabelMap,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageOutputs {
    pub initial: LabelMap,
    pub thresholds: PomThresholds,
    pub pom: LabelMap,
    pub nsrm: LabelMap,
}

pub fn process_image(inputs: &ImageInputs, config: &PipelineConfig) -> Result<ImageOutputs> {
    let present = inputs.record.present();
    let oacam = inputs.oacam.normalize();
    let cam = inputs.cam.normalize();
    let initial = background_extract(&oacam, &inputs.saliency, present, &config.be)?;
    let thresholds = compute_thresholds(&cam, &initial, present, config.be.t_bg)?;
    let pom = mine(&initial, &cam, &thresholds)?;
    let nsrm = nsrm_apply(&inputs.prediction, &pom, &inputs.record, config.dilation_r)?;
    Ok(ImageOutputs {
        initial,
        thresholds,
        pom,
        nsrm,
    })
}

pub fn corpus_path(dir: &Path, id: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{id}.{suffix}"))
}

pub fn load_inputs(dir: &Path, record: &ImageRecord) -> Result<ImageInputs> {
    let id = record.image_id();
    Ok(ImageInputs {
        record: record.clone(),
        saliency: io::load_saliency(corpus_path(dir, id, "sal.pgm"))?,
        cam: io::load_fmap(corpus_path(dir, id, "cam.fmap"))?,
        oacam: io::load_fmap(corpus_path(dir, id, "oacam.fmap"))?,
        prediction: io::load_label_map(corpus_path(dir, id, "pred.pgm"))?,
    })
}

/// Applies `f` to every record on a pool of `jobs` workers (all cores when
/// `None`) and returns the results in record order. Errors carry the image
/// id.
pub fn map_images<T, F>(records: &[ImageRecord], jobs: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&ImageRecord) -> Result<T> + Sync,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = jobs {
        builder = builder.num_threads(jobs.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
    pool.install(|| {
        records
            .par_iter()
            .map(|r| f(r).map_err(|e| e.for_image(r.image_id())))
            .collect()
    })
}

/// Metrics of every stage for one image.
#[derive(Clone, Debug)]
pub struct StageMetrics {
    pub confusion: [Confusion; 3],
    pub rates: [LabelRates; 3],
}

pub const STAGES: [&str; 3] = ["initial", "pom", "nsrm"];

fn stage_metrics(gt: &LabelMap, out: &ImageOutputs, class_count: u8) -> Result<StageMetrics> {
    let maps = [&out.initial, &out.pom, &out.nsrm];
    let mut conf = Vec::with_capacity(3);
    let mut rates = Vec::with_capacity(3);
    for m in maps {
        conf.push(confusion(gt, m, class_count)?);
        rates.push(pseudo_label_rates(gt, m)?);
    }
    Ok(StageMetrics {
        confusion: conf.try_into().unwrap(),
        rates: rates.try_into().unwrap(),
    })
}

#[derive(Clone, Debug)]
pub struct PipelineSummary {
    pub images: usize,
    pub complex: usize,
    pub confusion: [Confusion; 3],
    /// Mean per-image rates for each stage.
    pub mean_rates: [LabelRates; 3],
    pub report: String,
    pub summary: String,
}

fn run_image(corpus: &Path, out_dir: &Path, record: &ImageRecord, config: &PipelineConfig) -> Result<StageMetrics> {
    let id = record.image_id();
    let inputs = load_inputs(corpus, record)?;
    let gt = io::load_label_map(corpus_path(corpus, id, "gt.pgm"))?;
    let outputs = process_image(&inputs, config)?;
    io::save_label_map(&outputs.initial, corpus_path(out_dir, id, "initial.pgm"))?;
    io::save_label_map(&outputs.pom, corpus_path(out_dir, id, "pom.pgm"))?;
    io::save_label_map(&outputs.nsrm, corpus_path(out_dir, id, "nsrm.pgm"))?;
    if config.write_thresholds {
        let path = corpus_path(out_dir, id, "thresholds.txt");
        fs::write(&path, outputs.thresholds.report()).map_err(|e| Error::io_at(path, e))?;
    }
    let class_count = u8::try_from(inputs.cam.class_count())
        .ok()
        .filter(|&c| c <= MAX_CLASS)
        .ok_or_else(|| Error::Parameter("attention stack has more than 254 classes".into()))?;
    stage_metrics(&gt, &outputs, class_count)
}

/// Runs every stage over the manifest in `corpus`, writing label maps,
/// `report.txt` and `summary.txt` into `out_dir`.
pub fn run_pipeline(corpus: &Path, out_dir: &Path, config: &PipelineConfig) -> Result<PipelineSummary> {
    let records = manifest::load(corpus.join(manifest::FILE_NAME))?;
    if records.is_empty() {
        return Err(Error::Parameter("manifest lists no images".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io_at(out_dir, e))?;
    let per_image = map_images(&records, config.jobs, |r| run_image(corpus, out_dir, r, config))?;

    let class_count = per_image[0].confusion[0].class_count();
    let mut totals = [
        Confusion::new(class_count),
        Confusion::new(class_count),
        Confusion::new(class_count),
    ];
    let mut sums = [LabelRates::default(); 3];
    for m in &per_image {
        for s in 0..3 {
            totals[s].merge(&m.confusion[s])?;
            sums[s].fnr += m.rates[s].fnr;
            sums[s].fpr += m.rates[s].fpr;
            sums[s].ignore_fraction += m.rates[s].ignore_fraction;
        }
    }
    let n = per_image.len() as f64;
    let mean_rates = sums.map(|r| LabelRates {
        fnr: r.fnr / n,
        fpr: r.fpr / n,
        ignore_fraction: r.ignore_fraction / n,
    });

    let final_miou = miou(&totals[2])?;
    let report = format_report(&final_miou);
    let complex = records.iter().filter(|r| r.is_complex()).count();
    let mut summary = String::new();
    let _ = writeln!(summary, "images={}", records.len());
    let _ = writeln!(summary, "complex={complex}");
    for (s, name) in STAGES.iter().enumerate() {
        let m = miou(&totals[s])?;
        let _ = writeln!(summary, "miou_{name}={:.6}", m.mean);
        let _ = writeln!(summary, "fnr_{name}={:.6}", mean_rates[s].fnr);
        let _ = writeln!(summary, "fpr_{name}={:.6}", mean_rates[s].fpr);
        let _ = writeln!(summary, "ignore_{name}={:.6}", mean_rates[s].ignore_fraction);
    }
    let write = |name: &str, text: &str| {
        let path = out_dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io_at(path, e))
    };
    write(REPORT_FILE, &report)?;
    write(SUMMARY_FILE, &summary)?;
    Ok(PipelineSummary {
        images: records.len(),
        complex,
        confusion: totals,
        mean_rates,
        report,
        summary,
    })
}
