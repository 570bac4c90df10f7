use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pseudolabel::cli::run_subcommand;
use pseudolabel::io::{self, manifest};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pseudolabel")).args(args).output().unwrap()
}

fn run(args: &[&str]) -> i32 {
    run_subcommand(std::iter::once("pseudolabel").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, count: &str, extra: &[&str]) {
    let mut args = vec!["synth", "--out", p(dir), "--count", count, "--seed", "5"];
    args.extend_from_slice(extra);
    assert_eq!(run(&args), 0);
}

#[test]
fn pipeline_writes_layout_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    synth(&corpus, "6", &[]);
    let out = bin(&["pipeline", "--corpus", p(&corpus), "--t-bg", "0.3", "--dilation-r", "30"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1);
    assert!(stdout.starts_with("pipeline: 6 images (3 complex)"));
    for r in manifest::load(corpus.join("corpus.manifest")).unwrap() {
        for stage in ["initial", "pom", "nsrm"] {
            assert!(corpus.join(format!("{}.{stage}.pgm", r.image_id())).exists());
        }
    }
    let report = fs::read_to_string(corpus.join("report.txt")).unwrap();
    assert!(report.lines().last().unwrap().starts_with("mIoU,"));
    let summary = fs::read_to_string(corpus.join("summary.txt")).unwrap();
    assert!(summary.starts_with("images=6\ncomplex=3\n"));
}

#[test]
fn separate_stages_match_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("c");
    let (staged, chained) = (tmp.path().join("staged"), tmp.path().join("chained"));
    synth(&corpus, "4", &["--mix", "0.5"]);
    for stage in ["seed", "pom", "nsrm"] {
        assert_eq!(run(&[stage, "--corpus", p(&corpus), "--out", p(&staged), "--jobs", "1"]), 0);
    }
    assert_eq!(run(&["pipeline", "--corpus", p(&corpus), "--out", p(&chained)]), 0);
    for r in manifest::load(corpus.join("corpus.manifest")).unwrap() {
        for stage in ["initial", "pom", "nsrm"] {
            let name = format!("{}.{stage}.pgm", r.image_id());
            assert_eq!(fs::read(staged.join(&name)).unwrap(), fs::read(chained.join(&name)).unwrap());
        }
    }
    let report = tmp.path().join("eval.txt");
    assert_eq!(
        run(&["eval", "--gt", p(&corpus), "--pred", p(&staged), "--out", p(&report)]),
        0
    );
    assert_eq!(
        fs::read_to_string(report).unwrap(),
        fs::read_to_string(chained.join("report.txt")).unwrap()
    );
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("c");
    synth(&corpus, "4", &[]);
    let cfg = tmp.path().join("run.conf");
    fs::write(
        &cfg,
        format!("# small ring\ncorpus = {}\ndilation-r = 2\nthresholds = true\n", p(&corpus)),
    )
    .unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run(&["pipeline", "--config", p(&cfg), "--out", p(&a)]), 0);
    assert!(a.join("img_0000.thresholds.txt").exists());
    assert_eq!(run(&["pipeline", "--corpus", p(&corpus), "--out", p(&b), "--dilation-r", "2"]), 0);
    assert_eq!(fs::read(a.join("summary.txt")).unwrap(), fs::read(b.join("summary.txt")).unwrap());
    let c = tmp.path().join("c30");
    assert_eq!(run(&["pipeline", "--config", p(&cfg), "--out", p(&c), "--dilation-r", "30"]), 0);
    assert_ne!(fs::read(a.join("summary.txt")).unwrap(), fs::read(c.join("summary.txt")).unwrap());

    fs::write(&cfg, "no_such_key = 1\n").unwrap();
    assert_eq!(run(&["pipeline", "--config", p(&cfg)]), 1);
}

#[test]
fn errors_and_exit_codes() {
    let out = bin(&["pipeline", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    let out = bin(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    let out = bin(&["pipeline"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--corpus"));

    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("c");
    synth(&corpus, "3", &[]);
    fs::remove_file(corpus.join("img_0001.sal.pgm")).unwrap();
    let out = bin(&["pipeline", "--corpus", p(&corpus)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("image img_0001"), "{err}");
}

#[test]
fn viz_writes_ppm() {
    let tmp = tempfile::tempdir().unwrap();
    let label = tmp.path().join("x.pgm");
    io::save_label_map(&pseudolabel::maps::LabelMap::new(1, 2, vec![1, 255]).unwrap(), &label).unwrap();
    let out = bin(&["viz", "--label", p(&label)]);
    assert!(out.status.success());
    let ppm = fs::read(tmp.path().join("x.ppm")).unwrap();
    assert_eq!(ppm, b"P6\n2 1\n255\n\x80\x00\x00\xe0\xe0\xc0");
}

#[test]
fn training_cam_and_accumulate() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("c");
    let params = tmp.path().join("params");
    synth(&corpus, "4", &["--features", "8"]);
    assert!(corpus.join("img_0000.feat.fmap").exists());
    assert_eq!(
        run(&[
            "train-gr", "--corpus", p(&corpus), "--out", p(&params), "--epochs", "3", "--nodes", "4", "--lr", "0.01",
        ]),
        0
    );
    for f in ["gr.grpm", "epoch_0001.grpm", "epoch_0003.grpm", "loss.txt"] {
        assert!(params.join(f).exists(), "{f}");
    }
    assert_eq!(fs::read_to_string(params.join("loss.txt")).unwrap().lines().count(), 4);
    let maps = tmp.path().join("maps");
    assert_eq!(run(&["cam", "--corpus", p(&corpus), "--params", p(&params), "--out", p(&maps)]), 0);
    let cam = io::load_fmap(maps.join("img_0000.cam.fmap")).unwrap();
    let oacam = io::load_fmap(maps.join("img_0000.oacam.fmap")).unwrap();
    assert_eq!(cam.dims(), (20, 64, 64));
    assert!(oacam.values().iter().zip(cam.values()).all(|(a, b)| a >= b));

    let acc = tmp.path().join("acc.fmap");
    let (a, b) = (maps.join("img_0000.cam.fmap"), maps.join("img_0000.oacam.fmap"));
    assert_eq!(run(&["accumulate", "--current", p(&a), "--out", p(&acc)]), 0);
    assert_eq!(fs::read(&acc).unwrap(), fs::read(&a).unwrap());
    assert_eq!(run(&["accumulate", "--prev", p(&a), "--current", p(&b), "--out", p(&acc)]), 0);
    assert_eq!(fs::read(&acc).unwrap(), fs::read(&b).unwrap());

    let toy = tmp.path().join("toy");
    assert_eq!(run(&["train-gr", "--toy", "8", "--out", p(&toy), "--epochs", "2", "--nodes", "2"]), 0);
}

#[test]
fn synth_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    synth(&a, "5", &["--size", "32"]);
    synth(&b, "5", &["--size", "32"]);
    let names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 5 * 5 + 1);
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap());
    }
}
