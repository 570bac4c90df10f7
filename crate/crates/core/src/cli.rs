//! Command-line front end.
//!
//! Every flag may also come from a `--config` file (see [`crate::config`]);
//! a flag given on the command line wins over the file, and the file wins
//! over the built-in default. Each subcommand prints one summary line.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::camgen::{accumulate, snapshot_series};
use crate::colormap::colorize;
use crate::config::ConfigFile;
use crate::error::{Error, Result};
use crate::eval::{confusion, format_report, miou, Confusion};
use crate::grunit::{train_toy, LabeledGrid, TrainConfig};
use crate::io::{self, grpm, manifest, pnm};
use crate::maps::{ImageRecord, MAX_CLASS};
use crate::nsrm::{nsrm_apply, DEFAULT_DILATION_R};
use crate::pipeline::{corpus_path, map_images, run_pipeline, PipelineConfig};
use crate::pom::{compute_thresholds, mine};
use crate::seedgen::{background_extract, BeConfig, LowSaliencyRule, DEFAULT_T_BG, DEFAULT_T_SAL};
use crate::synth::{is_complex_index, make_corpus, separable_toy_set, CorpusOptions};

#[derive(Debug, Parser)]
#[command(name = "pseudolabel", version, about = "Pseudo-label generation for weakly supervised segmentation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic corpus with ground truth, saliency and attention maps.
    Synth(SynthArgs),
    /// Train the reasoning unit on corpus features (or the separable toy set).
    TrainGr(TrainArgs),
    /// Compute CAM and accumulated attention from trained snapshots.
    Cam(CamArgs),
    /// Pointwise maximum of two attention files.
    Accumulate(AccumulateArgs),
    /// Initial labels from accumulated attention and saliency.
    Seed(StageArgs),
    /// Potential object mining on initial labels.
    Pom(StageArgs),
    /// Non-salient region masking of mined labels.
    Nsrm(StageArgs),
    /// Per-class IoU and mIoU of predicted labels.
    Eval(EvalArgs),
    /// Colour a label map with the PASCAL VOC palette.
    Viz(VizArgs),
    /// seed, pom, nsrm and eval over a whole corpus.
    Pipeline(StageArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of images [default: 100]
    #[arg(long)]
    pub count: Option<usize>,
    /// Fraction of complex (multi-class) images [default: 0.5]
    #[arg(long)]
    pub mix: Option<f64>,
    /// [default: 7]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Image side in pixels [default: 64]
    #[arg(long)]
    pub size: Option<usize>,
    /// Foreground class count [default: 20]
    #[arg(long)]
    pub classes: Option<u8>,
    /// [default: 0.9]
    #[arg(long)]
    pub cam_peak: Option<f32>,
    /// [default: 0.45]
    #[arg(long)]
    pub cam_offsite: Option<f32>,
    /// CAM noise half-width [default: 0.05]
    #[arg(long)]
    pub noise: Option<f32>,
    /// Also write feature grids with this many channels.
    #[arg(long)]
    pub features: Option<usize>,
    /// [default: 8]
    #[arg(long)]
    pub feature_stride: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Corpus with `<id>.feat.fmap` files.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Train on this many samples of the separable toy set instead.
    #[arg(long)]
    pub toy: Option<usize>,
    /// Directory for `gr.grpm`, per-epoch snapshots and `loss.txt`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// [default: 14]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// [default: 0.001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// [default: 0.9]
    #[arg(long)]
    pub momentum: Option<f64>,
    /// Latent node count [default: 64]
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Foreground class count [default: 20, or 2 with --toy]
    #[arg(long)]
    pub classes: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CamArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Directory written by `train-gr`.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Output directory [default: the corpus]
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AccumulateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Previous accumulated map; omit to start a new one.
    #[arg(long)]
    pub prev: Option<PathBuf>,
    #[arg(long)]
    pub current: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StageArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Where earlier-stage labels are read from [default: --out]
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Output directory [default: the corpus]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// [default: 0.3]
    #[arg(long)]
    pub t_bg: Option<f32>,
    /// [default: 0.5]
    #[arg(long)]
    pub t_sal: Option<f32>,
    /// Label for non-salient pixels with strong attention: background or ignore [default: background]
    #[arg(long)]
    pub low_saliency: Option<LowSaliencyRule>,
    /// Dilation kernel size [default: 30]
    #[arg(long)]
    pub dilation_r: Option<usize>,
    /// Worker threads [default: all cores]
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Also write `<id>.thresholds.txt`.
    #[arg(long)]
    pub thresholds: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory with `corpus.manifest` and `<id>.gt.pgm`.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Directory with `<id>.<suffix>.pgm`.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// [default: nsrm]
    #[arg(long)]
    pub suffix: Option<String>,
    /// Foreground class count [default: 20]
    #[arg(long)]
    pub classes: Option<u8>,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VizArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub label: Option<PathBuf>,
    /// [default: the label path with a .ppm extension]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn load_config(path: &Option<PathBuf>) -> Result<ConfigFile> {
    match path {
        Some(p) => ConfigFile::load(p),
        None => Ok(ConfigFile::default()),
    }
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| Error::Parameter(format!("missing --{flag} (flag or config key)")))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io_at(dir, e))
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit status: 0 on success, 2 on usage errors, 1 on any other
/// failure.
pub fn run_subcommand<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(line) => {
            println!("{line}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Runs one subcommand and returns its summary line.
pub fn execute(command: Command) -> Result<String> {
    match command {
        Command::Synth(a) => synth(a),
        Command::TrainGr(a) => train(a),
        Command::Cam(a) => cam(a),
        Command::Accumulate(a) => accumulate_cmd(a),
        Command::Seed(a) => stage(a, Stage::Seed),
        Command::Pom(a) => stage(a, Stage::Pom),
        Command::Nsrm(a) => stage(a, Stage::Nsrm),
        Command::Eval(a) => eval(a),
        Command::Viz(a) => viz(a),
        Command::Pipeline(a) => pipeline(a),
    }
}

fn synth(a: SynthArgs) -> Result<String> {
    let cfg = load_config(&a.config)?;
    let out = required(cfg.resolve_opt(a.out, "out")?, "out")?;
    let count = cfg.resolve(a.count, "count", 100)?;
    let mix = cfg.resolve(a.mix, "mix", 0.5)?;
    let seed = cfg.resolve(a.seed, "seed", 7)?;
    if !(0.0..=1.0).contains(&mix) {
        return Err(Error::Parameter(format!("mix {mix} outside [0, 1]")));
    }
    let d = CorpusOptions::default();
    let opts = CorpusOptions {
        size: cfg.resolve(a.size, "size", d.size)?,
        class_count: cfg.resolve(a.classes, "classes", d.class_count)?,
        cam_peak: cfg.resolve(a.cam_peak, "cam_peak", d.cam_peak)?,
        cam_offsite: cfg.resolve(a.cam_offsite, "cam_offsite", d.cam_offsite)?,
        noise_amplitude: cfg.resolve(a.noise, "noise", d.noise_amplitude)?,
        feature_dim: cfg.resolve_opt(a.features, "features")?,
        feature_stride: cfg.resolve(a.feature_stride, "feature_stride", d.feature_stride)?,
    };
    let records = make_corpus(&out, count, mix, seed, &opts)?;
    let complex = (0..count).filter(|&i| is_complex_index(i, mix)).count();
    Ok(format!(
        "synth: wrote {} images ({complex} complex) to {}",
        records.len(),
        out.display()
    ))
}

fn snapshot_name(epoch: usize) -> String {
    format!("epoch_{epoch:04}.grpm")
}

fn train(a: TrainArgs) -> Result<String> {
    let cfg = load_config(&a.config)?;
    let out = required(cfg.resolve_opt(a.out, "out")?, "out")?;
    let toy = cfg.resolve_opt(a.toy, "toy")?;
    let d = TrainConfig::default();
    let seed = cfg.resolve(a.seed, "seed", d.seed)?;
    let (dataset, default_classes) = match toy {
        Some(n) => (separable_toy_set(n, seed), 2),
        None => {
            let corpus = required(cfg.resolve_opt(a.corpus, "corpus")?, "corpus")?;
            let records = manifest::load(corpus.join(manifest::FILE_NAME))?;
            let data = map_images(&records, None, |r| {
                Ok(LabeledGrid {
                    grid: io::load_features(corpus_path(&corpus, r.image_id(), "feat.fmap"))?,
                    classes: r.present().clone(),
                })
            })?;
            (data, d.classes)
        }
    };
    let config = TrainConfig {
        learning_rate: cfg.resolve(a.lr, "lr", d.learning_rate)?,
        momentum: cfg.resolve(a.momentum, "momentum", d.momentum)?,
        epochs: cfg.resolve(a.epochs, "epochs", d.epochs)?,
        seed,
        nodes: cfg.resolve(a.nodes, "nodes", d.nodes)?,
        classes: cfg.resolve(a.classes, "classes", default_classes)?,
    };
    let outcome = train_toy(&dataset, &config)?;
    create_dir(&out)?;
    grpm::save(&outcome.params, out.join("gr.grpm"))?;
    for (e, p) in outcome.snapshots.iter().enumerate() {
        grpm::save(p, out.join(snapshot_name(e + 1)))?;
    }
    let mut trace: String = outcome
        .losses
        .iter()
        .enumerate()
        .map(|(e, l)| format!("{},{l:.9}\n", e + 1))
        .collect();
    trace.push_str(&format!("final,{:.9}\n", outcome.final_loss));
    let path = out.join("loss.txt");
    fs::write(&path, trace).map_err(|e| Error::io_at(path, e))?;
    Ok(format!(
        "train-gr: {} samples, {} epochs, loss {:.6} -> {:.6}",
        dataset.len(),
        config.epochs,
        outcome.losses.first().copied().unwrap_or(outcome.final_loss),
        outcome.final_loss
    ))
}

fn load_snapshots(dir: &Path) -> Result<Vec<crate::grunit::GrParams>> {
    let mut names: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io_at(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("epoch_") && n.ends_with(".grpm"))
        })
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::Parameter(format!(
            "no epoch_*.grpm snapshots in {}",
            dir.display()
        )));
    }
    names.iter().map(grpm::load).collect()
}

fn cam(a: CamArgs) -> Result<String> {
    let cfg = load_config(&a.config)?;
    let corpus = required(cfg.resolve_opt(a.corpus, "corpus")?, "corpus")?;
    let params = required(cfg.resolve_opt(a.params, "params")?, "params")?;
    let out = cfg.resolve_opt(a.out, "out")?.unwrap_or_else(|| corpus.clone());
    let jobs = cfg.resolve_opt(a.jobs, "jobs")?;
    let series = load_snapshots(&params)?;
    let records = manifest::load(corpus.join(manifest::FILE_NAME))?;
    create_dir(&out)?;
    map_images(&records, jobs, |r| {
        let id = r.image_id();
        let grid = io::load_features(corpus_path(&corpus, id, "feat.fmap"))?;
        let sal = io::load_saliency(corpus_path(&corpus, id, "sal.pgm"))?;
        let maps = snapshot_series(&series, &grid)?;
        let (h, w) = (sal.height(), sal.width());
        io::save_fmap(&maps.cam.resize_nearest(h, w)?, corpus_path(&out, id, "cam.fmap"))?;
        io::save_fmap(&maps.oacam.resize_nearest(h, w)?, corpus_path(&out, id, "oacam.fmap"))?;
        Ok(())
    })?;
    Ok(format!(
        "cam: {} images from {} snapshots",
        records.len(),
        series.len()
    ))
}

fn accumulate_cmd(a: AccumulateArgs) -> Result<String> {
    let cfg = load_config(&a.config)?;
    let prev = cfg.resolve_opt(a.prev, "prev")?;
    let current = required(cfg.resolve_opt(a.current, "current")?, "current")?;
    let out = required(cfg.resolve_opt(a.out, "out")?, "out")?;
    let prev = prev.map(io::load_fmap).transpose()?;
    let acc = accumulate(prev.as_ref(), &io::load_fmap(&current)?)?;
    io::save_fmap(&acc, &out)?;
    let (c, h, w) = acc.dims();
    Ok(format!("accumulate: {c}x{h}x{w} -> {}", out.display()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stage {
    Seed,
    Pom,
    Nsrm,
}

struct StageSetup {
    corpus: PathBuf,
    labels: PathBuf,
    out: PathBuf,
    config: PipelineConfig,
}

fn stage_setup(a: StageArgs) -> Result<StageSetup> {
    let cfg = load_config(&a.config)?;
    let corpus = required(cfg.resolve_opt(a.corpus, "corpus")?, "corpus")?;
    let out = cfg.resolve_opt(a.out, "out")?.unwrap_or_else(|| corpus.clone());
    let labels = cfg.resolve_opt(a.labels, "labels")?.unwrap_or_else(|| out.clone());
    let thresholds = a.thresholds || cfg.get("thresholds")?.unwrap_or(false);
    let config = PipelineConfig {
        be: BeConfig {
            t_bg: cfg.resolve(a.t_bg, "t_bg", DEFAULT_T_BG)?,
            t_sal: cfg.resolve(a.t_sal, "t_sal", DEFAULT_T_SAL)?,
            low_saliency: cfg.resolve(a.low_saliency, "low_saliency", LowSaliencyRule::default())?,
        },
        dilation_r: cfg.resolve(a.dilation_r, "dilation_r", DEFAULT_DILATION_R)?,
        jobs: cfg.resolve_opt(a.jobs, "jobs")?,
        write_thresholds: thresholds,
    };
    Ok(StageSetup {
        corpus,
        labels,
        out,
        config,
    })
}

fn run_stage(s: &StageSetup, stage: Stage, r: &ImageRecord) -> Result<()> {
    let id = r.image_id();
    let corpus = &s.corpus;
    let be = &s.config.be;
    match stage {
        Stage::Seed => {
            let oacam = io::load_fmap(corpus_path(corpus, id, "oacam.fmap"))?.normalize();
            let sal = io::load_saliency(corpus_path(corpus, id, "sal.pgm"))?;
            let initial = background_extract(&oacam, &sal, r.present(), be)?;
            io::save_label_map(&initial, corpus_path(&s.out, id, "initial.pgm"))
        }
        Stage::Pom => {
            let cam = io::load_fmap(corpus_path(corpus, id, "cam.fmap"))?.normalize();
            let initial = io::load_label_map(corpus_path(&s.labels, id, "initial.pgm"))?;
            let th = compute_thresholds(&cam, &initial, r.present(), be.t_bg)?;
            if s.config.write_thresholds {
                let path = corpus_path(&s.out, id, "thresholds.txt");
                fs::write(&path, th.report()).map_err(|e| Error::io_at(path, e))?;
            }
            io::save_label_map(&mine(&initial, &cam, &th)?, corpus_path(&s.out, id, "pom.pgm"))
        }
        Stage::Nsrm => {
            let pred = io::load_label_map(corpus_path(corpus, id, "pred.pgm"))?;
            let pom = io::load_label_map(corpus_path(&s.labels, id, "pom.pgm"))?;
            let out = nsrm_apply(&pred, &pom, r, s.config.dilation_r)?;
            io::save_label_map(&out, corpus_path(&s.out, id, "nsrm.pgm"))
        }
    }
}

fn stage(a: StageArgs, stage: Stage) -> Result<String> {
    let s = stage_setup(a)?;
    let records = manifest::load(s.corpus.join(manifest::FILE_NAME))?;
    create_dir(&s.out)?;
    map_images(&records, s.config.jobs, |r| run_stage(&s, stage, r))?;
    let name = match stage {
        Stage::Seed => "seed",
        Stage::Pom => "pom",
        Stage::Nsrm => "nsrm",
    };
    Ok(format!(
        "{name}: {} images -> {}",
        records.len(),
        s.out.display()
    ))
}

fn pipeline(a: StageArgs) -> Result<String> {
    let s = stage_setup(a)?;
    let summary = run_pipeline(&s.corpus, &s.out, &s.config)?;
    let m = miou(&summary.confusion[2])?;
    Ok(format!(
        "pipeline: {} images ({} complex), mIoU {:.6} -> {}",
        summary.images,
        summary.complex,
        m.mean,
        s.out.display()
    ))
}

fn eval(a: EvalArgs) -> Result<String> {
    let cfg = load_config(&a.config)?;
    let gt_dir = required(cfg.resolve_opt(a.gt, "gt")?, "gt")?;
    let pred_dir = required(cfg.resolve_opt(a.pred, "pred")?, "pred")?;
    let suffix: String = cfg.resolve(a.suffix, "suffix", "nsrm".to_string())?;
    let classes = cfg.resolve(a.classes, "classes", 20u8)?;
    if classes == 0 || classes > MAX_CLASS {
        return Err(Error::Parameter(format!("class count {classes} outside 1..=254")));
    }
    let out = cfg.resolve_opt(a.out, "out")?;
    let jobs = cfg.resolve_opt(a.jobs, "jobs")?;
    let records = manifest::load(gt_dir.join(manifest::FILE_NAME))?;
    let parts = map_images(&records, jobs, |r| {
        let id = r.image_id();
        let gt = io::load_label_map(corpus_path(&gt_dir, id, "gt.pgm"))?;
        let pred = io::load_label_map(corpus_path(&pred_dir, id, &format!("{suffix}.pgm")))?;
        confusion(&gt, &pred, classes)
    })?;
    let mut total = Confusion::new(classes);
    for p in &parts {
        total.merge(p)?;
    }
    let result = miou(&total)?;
    let report = format_report(&result);
    print!("{report}");
    if let Some(path) = out {
        fs::write(&path, &report).map_err(|e| Error::io_at(path, e))?;
    }
    Ok(format!(
        "eval: {} images, mIoU {:.6}",
        records.len(),
        result.mean
    ))
}

fn viz(a: VizArgs) -> Result<String> {
    let cfg = load_config(&a.config)?;
    let label = required(cfg.resolve_opt(a.label, "label")?, "label")?;
    let out = cfg
        .resolve_opt(a.out, "out")?
        .unwrap_or_else(|| label.with_extension("ppm"));
    let map = io::load_label_map(&label)?;
    pnm::write(&colorize(&map), &out)?;
    Ok(format!(
        "viz: {}x{} -> {}",
        map.width(),
        map.height(),
        out.display()
    ))
}
